#pragma once
// Concrete desk-scale environments and the stochasticity / partial-observability
// wrappers, plus a string-keyed registry ("pendulum+ext_force" stacks wrappers
// left to right around the base id).

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "sarlab/rng.hpp"
#include "sarlab/timegrid.hpp"

namespace sarlab {

// ---------------------------------------------------------------------------
// Alert-then-off: a two-state automaton on a unit physical horizon. The state
// flips from normal to alerted exactly once, at a uniformly random time; the
// agent must set off = 1 within the reaction window x after the flip, but
// setting it while normal terminates with the penalty. Surviving to t = 1
// pays a standard-normal terminal reward plus the accumulated f(num) stream.
struct AlertParams {
  double x = 0.01;        // reaction window, seconds; must exceed delta
  double nu = 1e4;        // penalty magnitude
  std::function<double(double)> f;  // reward rate in num; default 0
  double flip_time_override = std::numeric_limits<double>::quiet_NaN();  // tests only
};

class AlertThenOffEnv final : public Env {
 public:
  using Params = AlertParams;

  AlertThenOffEnv(double delta, std::uint64_t seed, Params params = {})
      : delta_(delta), params_(std::move(params)), rng_(seed, 0xa1e7) {
    if (!(delta > 0.0) || delta >= 1.0)
      throw std::domain_error("alert_then_off: delta must lie in (0, 1)");
    if (!(params_.x > delta))
      throw std::domain_error("alert_then_off: reaction window must exceed delta");
    if (!(params_.nu > 0.0)) throw std::domain_error("alert_then_off: penalty must be positive");
    n_steps_ = std::llround(1.0 / delta);
  }

  std::vector<double> reset() override {
    flip_time_ = std::isnan(params_.flip_time_override) ? rng_.uniform01()
                                                        : params_.flip_time_override;
    xi_ = rng_.normal();
    deadline_ = flip_time_ + params_.x;
    alerted_ = false;
    flipped_ = false;
    steps_ = 0;
    done_ = false;
    return observe();
  }

  StepResult step(std::span<const double> action) override {
    if (done_) throw std::logic_error("step called on a finished episode");
    if (action.size() != 2) throw std::invalid_argument("alert_then_off: action is (off, num)");
    const bool off = action[0] > 0.5;
    const double num = action[1];

    double reward = params_.f ? params_.f(num) * delta_ : 0.0;

    // The press acts on the state the agent observed.
    if (off) {
      if (!alerted_) {
        done_ = true;
        return {observe(), reward - params_.nu, true, false};
      }
      alerted_ = false;  // cleared within the window (a breach would have ended earlier)
    }

    ++steps_;
    const double t = double(steps_) * delta_;

    if (!flipped_ && flip_time_ < t) {
      alerted_ = true;
      flipped_ = true;
    }
    if (alerted_ && t > deadline_) {
      done_ = true;
      return {observe(), reward - params_.nu, true, false};
    }
    if (steps_ >= n_steps_) {
      done_ = true;
      return {observe(), reward + xi_, true, false};
    }
    return {observe(), reward, false, false};
  }

  int obs_dim() const override { return 2; }
  int action_dim() const override { return 2; }
  double delta() const override { return delta_; }
  double gamma_delta() const override { return 1.0; }
  long max_steps() const override { return n_steps_; }
  long steps_taken() const override { return steps_; }
  bool done() const override { return done_; }

  double flip_time() const { return flip_time_; }
  double reaction_window() const { return params_.x; }
  double terminal_noise() const { return xi_; }
  bool alerted() const { return alerted_; }

 private:
  std::vector<double> observe() const {
    return {alerted_ ? 1.0 : 0.0, double(steps_) * delta_};
  }

  double delta_;
  Params params_;
  Rng rng_;
  long n_steps_ = 0;

  double flip_time_ = 0.0, deadline_ = 0.0, xi_ = 0.0;
  bool alerted_ = false, flipped_ = false, done_ = false;
  long steps_ = 0;
};

/// Hand-coded optimal off-policy for AlertThenOffEnv: press exactly when the
/// alert is visible. Returns (off, num).
inline std::vector<double> alert_optimal_action(std::span<const double> obs, double num = 0.0) {
  return {obs[0] > 0.5 ? 1.0 : 0.0, num};
}

// ---------------------------------------------------------------------------
// 1-D random walk: N steps of size 2/N in the direction of the action's sign;
// the only reward is the indicator of |position| >= 1 at the horizon. The
// position is tracked on the integer lattice so boundary tests are exact.
class RandomWalkEnv final : public Env {
 public:
  RandomWalkEnv(int n_steps, std::uint64_t seed)
      : n_(n_steps), delta_(2.0 / double(n_steps)), rng_(seed, 0x3a1c) {
    if (n_steps < 2 || n_steps % 2 != 0)
      throw std::domain_error("random_walk: step count must be even and at least 2");
  }

  std::vector<double> reset() override {
    k_ = 0;
    steps_ = 0;
    done_ = false;
    return observe();
  }

  StepResult step(std::span<const double> action) override {
    if (done_) throw std::logic_error("step called on a finished episode");
    if (action.size() != 1) throw std::invalid_argument("random_walk: action is 1-dim");
    k_ += action[0] >= 0.0 ? 1 : -1;
    ++steps_;
    double reward = 0.0;
    if (steps_ >= n_) {
      done_ = true;
      reward = success() ? 1.0 : 0.0;
    }
    return {observe(), reward, done_, false};
  }

  bool success() const { return 2 * std::abs(k_) >= n_; }  // |pos| >= 1 exactly

  int obs_dim() const override { return 2; }
  int action_dim() const override { return 1; }
  double delta() const override { return delta_; }
  double gamma_delta() const override { return 1.0; }
  long max_steps() const override { return n_; }
  long steps_taken() const override { return steps_; }
  bool done() const override { return done_; }

 private:
  std::vector<double> observe() const {
    return {2.0 * double(k_) / double(n_), double(steps_) * delta_};
  }

  int n_;
  double delta_;
  Rng rng_;
  long k_ = 0, steps_ = 0;
  bool done_ = false;
};

/// Exact success probability of the ±1 coin-flip policy on RandomWalkEnv:
/// P(X <= N/4) + P(X >= 3N/4) for X ~ Binomial(N, 1/2). Integer enumeration
/// up to N = 64 (exact in double); log-space summation beyond.
inline double random_walk_success_probability(long n) {
  if (n < 2 || n % 2 != 0)
    throw std::domain_error("random_walk_success_probability: N must be even and at least 2");
  const long k_lo = n / 4;  // floor; the <= N/4 tail
  if (n <= 64) {
    unsigned long long c = 1, tail = 0;  // C(n, 0)
    for (long k = 0; k <= k_lo; ++k) {
      tail += c;
      c = c * (unsigned long long)(n - k) / (unsigned long long)(k + 1);
    }
    return double(2 * tail) * std::ldexp(1.0, -int(n));
  }
  const double log2n = double(n) * std::log(2.0);
  double sum = 0.0;
  for (long k = 0; k <= k_lo; ++k)
    sum += std::exp(std::lgamma(double(n) + 1.0) - std::lgamma(double(k) + 1.0) -
                    std::lgamma(double(n - k) + 1.0) - log2n);
  return 2.0 * sum;
}

// ---------------------------------------------------------------------------
// Cart-pole balance in physical units. Terminal only on pole angle; the
// reward rate is 1 while balanced, so return measures survival time.
struct PendulumParams {
  double gravity = 9.8;
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double pole_half_length = 0.5;
  double force_gain = 5.0;    // newtons per unit action
  double action_bound = 3.0;
  double fall_angle = 0.2;    // radians
  double init_range = 0.01;   // uniform init half-width on every state dim
  long base_steps = 1000;
  double gamma0 = 0.99;
  double delta0 = 0.04;
};

inline ContinuousMDP make_pendulum(PendulumParams p = {}) {
  ContinuousMDP m;
  m.state_dim = 4;  // cart position, cart velocity, pole angle, pole angular velocity
  m.action_dim = 1;
  m.action_low = {-p.action_bound};
  m.action_high = {p.action_bound};
  m.disturbance_dim = 1;  // extra force on the cart
  const double total_mass = p.cart_mass + p.pole_mass;
  const double ml = p.pole_mass * p.pole_half_length;
  m.dynamics = [p, total_mass, ml](std::span<const double> s, std::span<const double> a,
                                   std::span<const double> dist, std::span<double> ds) {
    const double theta = s[2], omega = s[3];
    const double force = p.force_gain * a[0] + (dist.empty() ? 0.0 : dist[0]);
    const double cos_t = std::cos(theta), sin_t = std::sin(theta);
    const double tmp = (force + ml * omega * omega * sin_t) / total_mass;
    const double denom = p.pole_half_length * (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total_mass);
    const double alpha = (p.gravity * sin_t - cos_t * tmp) / denom;
    ds[0] = s[1];
    ds[1] = tmp - ml * alpha * cos_t / total_mass;
    ds[2] = omega;
    ds[3] = alpha;
  };
  m.reward_rate = [](std::span<const double>, std::span<const double>) { return 1.0; };
  m.initial_state = [r = p.init_range](Rng& rng, std::span<double> s0) {
    for (double& v : s0) v = rng.uniform(-r, r);
  };
  m.terminal = [thr = p.fall_angle](std::span<const double> s) { return std::abs(s[2]) > thr; };
  m.horizon = double(p.base_steps) * p.delta0;
  m.gamma0 = p.gamma0;
  m.delta0 = p.delta0;
  return m;
}

// ---------------------------------------------------------------------------
// 2-D double integrator chasing a goal; reward rate is the negative distance.
// The closed-form step makes it the ExactClosedForm reference environment.
struct PointMassParams {
  double goal_x = 0.5;
  double goal_y = 0.5;
  double init_range = 0.1;
  long base_steps = 100;
  double gamma0 = 0.99;
  double delta0 = 0.05;
};

inline ContinuousMDP make_point_mass(PointMassParams p = {}) {
  ContinuousMDP m;
  m.state_dim = 4;  // px, py, vx, vy
  m.action_dim = 2;
  m.action_low = {-1.0, -1.0};
  m.action_high = {1.0, 1.0};
  m.disturbance_dim = 2;
  m.dynamics = [](std::span<const double> s, std::span<const double> a,
                  std::span<const double> dist, std::span<double> ds) {
    const double fx = a[0] + (dist.empty() ? 0.0 : dist[0]);
    const double fy = a[1] + (dist.empty() ? 0.0 : dist[1]);
    ds[0] = s[2];
    ds[1] = s[3];
    ds[2] = fx;
    ds[3] = fy;
  };
  m.exact_step = [](std::span<const double> s, std::span<const double> a,
                    std::span<const double> dist, double dt, std::span<double> out) {
    const double fx = a[0] + (dist.empty() ? 0.0 : dist[0]);
    const double fy = a[1] + (dist.empty() ? 0.0 : dist[1]);
    out[0] = s[0] + s[2] * dt + 0.5 * fx * dt * dt;
    out[1] = s[1] + s[3] * dt + 0.5 * fy * dt * dt;
    out[2] = s[2] + fx * dt;
    out[3] = s[3] + fy * dt;
  };
  m.reward_rate = [gx = p.goal_x, gy = p.goal_y](std::span<const double> s,
                                                 std::span<const double>) {
    return -std::hypot(s[0] - gx, s[1] - gy);
  };
  m.initial_state = [r = p.init_range](Rng& rng, std::span<double> s0) {
    s0[0] = rng.uniform(-r, r);
    s0[1] = rng.uniform(-r, r);
    s0[2] = 0.0;
    s0[3] = 0.0;
  };
  m.horizon = double(p.base_steps) * p.delta0;
  m.gamma0 = p.gamma0;
  m.delta0 = p.delta0;
  m.integrator = Integrator::ExactClosedForm;
  return m;
}

// ---------------------------------------------------------------------------
// Wrappers. Everything forwards by default; subclasses override the pieces
// they change. begin_decision() is the hook the macro-action executor fires
// once per decision, so per-decision stochasticity samples exactly there.
class EnvWrapper : public Env {
 public:
  explicit EnvWrapper(std::unique_ptr<Env> inner) : inner_(std::move(inner)) {
    if (!inner_) throw std::invalid_argument("wrapper: missing inner environment");
  }

  std::vector<double> reset() override { return inner_->reset(); }
  StepResult step(std::span<const double> action) override { return inner_->step(action); }
  int obs_dim() const override { return inner_->obs_dim(); }
  int action_dim() const override { return inner_->action_dim(); }
  double delta() const override { return inner_->delta(); }
  double gamma_delta() const override { return inner_->gamma_delta(); }
  long max_steps() const override { return inner_->max_steps(); }
  long steps_taken() const override { return inner_->steps_taken(); }
  bool done() const override { return inner_->done(); }
  void begin_decision() override { inner_->begin_decision(); }
  int disturbance_dim() const override { return inner_->disturbance_dim(); }
  void set_disturbance(std::span<const double> d) override { inner_->set_disturbance(d); }
  std::span<const double> applied_disturbance() const override {
    return inner_->applied_disturbance();
  }
  long action_clip_count() const override { return inner_->action_clip_count(); }

 protected:
  std::unique_ptr<Env> inner_;
};

/// With probability p_ext at each decision step, pushes a zero-mean Gaussian
/// force (std sigma_ext per disturbance dim) into the inner dynamics. The
/// force is sampled at the decision boundary and persists until the next one,
/// so longer holds ride out the same perturbation.
class ExternalForceWrapper : public EnvWrapper {
 public:
  ExternalForceWrapper(std::unique_ptr<Env> inner, double p_ext, double sigma_ext,
                       std::uint64_t seed)
      : EnvWrapper(std::move(inner)), p_(p_ext), sigma_(sigma_ext), rng_(seed, 0xf03c) {
    if (p_ < 0.0 || p_ > 1.0) throw std::invalid_argument("ext_force: probability in [0, 1]");
    if (sigma_ < 0.0) throw std::invalid_argument("ext_force: sigma must be non-negative");
    if (inner_->disturbance_dim() < 1)
      throw std::invalid_argument("ext_force: inner environment accepts no disturbance");
    force_.assign(std::size_t(inner_->disturbance_dim()), 0.0);
  }

  void begin_decision() override {
    inner_->begin_decision();
    const bool active = rng_.bernoulli(p_);
    for (double& f : force_) {
      const double draw = rng_.normal();  // always drawn: keeps the stream aligned
      f = active ? sigma_ * draw : 0.0;
    }
    inner_->set_disturbance(force_);
  }

  std::vector<double> reset() override {
    std::fill(force_.begin(), force_.end(), 0.0);
    return inner_->reset();
  }

  std::span<const double> current_force() const { return force_; }

 protected:
  double p_, sigma_;
  Rng rng_;
  std::vector<double> force_;
};

/// ExternalForceWrapper that also appends the applied force, clipped to
/// [-1, 1] per dimension, to the observation (zeros while inactive).
class PerceptibleForceWrapper final : public ExternalForceWrapper {
 public:
  PerceptibleForceWrapper(std::unique_ptr<Env> inner, double p_ext, double sigma_ext,
                          std::uint64_t seed)
      : ExternalForceWrapper(std::move(inner), p_ext, sigma_ext, seed) {}

  int obs_dim() const override { return inner_->obs_dim() + int(force_.size()); }

  std::vector<double> reset() override { return extend(ExternalForceWrapper::reset()); }

  StepResult step(std::span<const double> action) override {
    StepResult r = inner_->step(action);
    r.obs = extend(std::move(r.obs));
    return r;
  }

 private:
  std::vector<double> extend(std::vector<double> obs) const {
    for (double f : force_) obs.push_back(std::clamp(f, -1.0, 1.0));
    return obs;
  }
};

/// With probability p_act per decision, adds zero-mean Gaussian noise (std
/// sigma_act) to every executed action; the perturbation is sampled at the
/// decision boundary and stays fixed across the hold.
class ActionNoiseWrapper final : public EnvWrapper {
 public:
  ActionNoiseWrapper(std::unique_ptr<Env> inner, double p_act, double sigma_act,
                     std::uint64_t seed)
      : EnvWrapper(std::move(inner)), p_(p_act), sigma_(sigma_act), rng_(seed, 0xac70) {
    if (p_ < 0.0 || p_ > 1.0) throw std::invalid_argument("act_noise: probability in [0, 1]");
    if (sigma_ < 0.0) throw std::invalid_argument("act_noise: sigma must be non-negative");
    noise_.assign(std::size_t(inner_->action_dim()), 0.0);
    perturbed_.assign(noise_.size(), 0.0);
  }

  void begin_decision() override {
    inner_->begin_decision();
    const bool active = rng_.bernoulli(p_);
    for (double& n : noise_) {
      const double draw = rng_.normal();
      n = active ? sigma_ * draw : 0.0;
    }
  }

  std::vector<double> reset() override {
    std::fill(noise_.begin(), noise_.end(), 0.0);
    return inner_->reset();
  }

  StepResult step(std::span<const double> action) override {
    if (action.size() != perturbed_.size())
      throw std::invalid_argument("act_noise: action dimension mismatch");
    for (std::size_t k = 0; k < perturbed_.size(); ++k) perturbed_[k] = action[k] + noise_[k];
    return inner_->step(perturbed_);
  }

 private:
  double p_, sigma_;
  Rng rng_;
  std::vector<double> noise_, perturbed_;
};

/// Adds r_penalty once per hold, on the first micro-step at which the same
/// action has been held for at least t_thres seconds. The hold counter is
/// internal state the observation never exposes.
class HoldPenaltyWrapper final : public EnvWrapper {
 public:
  HoldPenaltyWrapper(std::unique_ptr<Env> inner, double t_thres, double r_penalty)
      : EnvWrapper(std::move(inner)), penalty_(r_penalty) {
    if (!(t_thres > 0.0)) throw std::invalid_argument("hold_penalty: threshold must be positive");
    const double q = t_thres / inner_->delta();
    threshold_steps_ = std::max(1L, long(std::ceil(q - 1e-9)));
  }

  void begin_decision() override {
    inner_->begin_decision();
    held_ = 0;
    fired_ = false;
  }

  std::vector<double> reset() override {
    held_ = 0;
    fired_ = true;  // nothing is held before the first decision
    return inner_->reset();
  }

  StepResult step(std::span<const double> action) override {
    StepResult r = inner_->step(action);
    ++held_;
    if (!fired_ && held_ >= threshold_steps_) {
      r.reward += penalty_;
      fired_ = true;
    }
    return r;
  }

  long threshold_steps() const { return threshold_steps_; }

 private:
  double penalty_;
  long threshold_steps_ = 1;
  long held_ = 0;
  bool fired_ = true;
};

// ---------------------------------------------------------------------------
// Registry: base environment id plus '+'-separated wrapper suffixes, with
// parameters from a flat JSON object. Wrappers wrap left to right, so the
// last suffix is outermost.
inline std::unique_ptr<Env> make_env(const std::string& id, double delta, std::uint64_t seed,
                                     const nlohmann::json& params = nlohmann::json::object()) {
  auto get = [&params](const char* key, double fallback) {
    return params.contains(key) ? params.at(key).get<double>() : fallback;
  };

  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t pos; (pos = id.find('+', start)) != std::string::npos; start = pos + 1)
    parts.push_back(id.substr(start, pos - start));
  parts.push_back(id.substr(start));

  std::unique_ptr<Env> env;
  const std::string& base = parts.front();
  if (base == "alert_then_off") {
    AlertThenOffEnv::Params p;
    p.x = get("x", 0.01);
    p.nu = get("nu", 1e4);
    const double f_coef = get("f_coef", 0.0);
    if (f_coef != 0.0) p.f = [f_coef](double num) { return f_coef * num; };
    env = std::make_unique<AlertThenOffEnv>(delta, seed, std::move(p));
  } else if (base == "random_walk") {
    env = std::make_unique<RandomWalkEnv>(int(std::llround(2.0 / delta)), seed);
  } else if (base == "pendulum") {
    PendulumParams p;
    p.force_gain = get("force_gain", p.force_gain);
    p.action_bound = get("action_bound", p.action_bound);
    p.fall_angle = get("fall_angle", p.fall_angle);
    p.init_range = get("init_range", p.init_range);
    p.base_steps = long(get("base_steps", double(p.base_steps)));
    p.gamma0 = get("gamma0", p.gamma0);
    p.delta0 = get("delta0", p.delta0);
    env = discretize(make_pendulum(p), delta, seed);
  } else if (base == "point_mass") {
    PointMassParams p;
    p.goal_x = get("goal_x", p.goal_x);
    p.goal_y = get("goal_y", p.goal_y);
    p.init_range = get("init_range", p.init_range);
    p.base_steps = long(get("base_steps", double(p.base_steps)));
    p.gamma0 = get("gamma0", p.gamma0);
    p.delta0 = get("delta0", p.delta0);
    env = discretize(make_point_mass(p), delta, seed);
  } else {
    throw std::invalid_argument("make_env: unknown environment id '" + base + "'");
  }

  for (std::size_t i = 1; i < parts.size(); ++i) {
    const std::string& w = parts[i];
    const std::uint64_t wseed = mix_seed(seed, 0xbead + i);
    if (w == "ext_force") {
      env = std::make_unique<ExternalForceWrapper>(std::move(env), get("p_ext", 0.1),
                                                   get("sigma_ext", 1.0), wseed);
    } else if (w == "percept_force") {
      env = std::make_unique<PerceptibleForceWrapper>(std::move(env), get("p_ext", 0.1),
                                                      get("sigma_ext2", 2.0), wseed);
    } else if (w == "act_noise") {
      env = std::make_unique<ActionNoiseWrapper>(std::move(env), get("p_act", 0.1),
                                                 get("sigma_act", 0.3), wseed);
    } else if (w == "hold_penalty") {
      env = std::make_unique<HoldPenaltyWrapper>(std::move(env), get("t_thres", 0.04),
                                                 get("r_penalty", -1.0));
    } else {
      throw std::invalid_argument("make_env: unknown wrapper '" + w + "'");
    }
  }
  return env;
}

}  // namespace sarlab
