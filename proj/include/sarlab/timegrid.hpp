#pragma once
// Continuous-time control problems and their fixed-step time discretization.
// A ContinuousMDP describes physics in physical units (seconds); discretize()
// turns it into a stepped environment with period delta, reward r(s,a)*delta,
// and a per-step discount that keeps the physical-time discount rate fixed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "sarlab/rng.hpp"

namespace sarlab {

struct StepResult {
  std::vector<double> obs;
  double reward = 0.0;
  bool done = false;       // episode over, whatever the cause
  bool truncated = false;  // done came from the step budget, not a terminal state
};

/// Runtime interface shared by every environment, wrapped or bare.
class Env {
 public:
  virtual ~Env() = default;

  virtual std::vector<double> reset() = 0;
  virtual StepResult step(std::span<const double> action) = 0;

  virtual int obs_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual double delta() const = 0;
  virtual double gamma_delta() const = 0;
  virtual long max_steps() const = 0;
  virtual long steps_taken() const = 0;

  /// True once the episode is over; also true straight after reset() when the
  /// initial state already satisfies the terminal predicate (length-0 episode).
  virtual bool done() const = 0;

  double physical_time() const { return double(steps_taken()) * delta(); }

  /// Called once at each decision boundary, before the first micro-step of a
  /// hold. Stochasticity wrappers sample their perturbations here.
  virtual void begin_decision() {}

  // External disturbance channel, filled in by wrappers, read by dynamics.
  virtual int disturbance_dim() const { return 0; }
  virtual void set_disturbance(std::span<const double>) {}
  virtual std::span<const double> applied_disturbance() const { return {}; }

  /// Number of steps whose action needed clipping into the admissible box.
  virtual long action_clip_count() const { return 0; }
};

/// Per-step discount factor for period `delta` when `gamma0` is the discount
/// per `delta0` of physical time: gamma0^(delta/delta0).
inline double effective_discount(double gamma0, double delta, double delta0) {
  if (!(gamma0 > 0.0) || gamma0 > 1.0)
    throw std::domain_error("effective_discount: gamma0 must lie in (0, 1]");
  if (!(delta > 0.0) || !(delta0 > 0.0))
    throw std::domain_error("effective_discount: periods must be positive");
  return std::pow(gamma0, delta / delta0);
}

/// Step budget that keeps the physical horizon base_steps*delta0 fixed when
/// the control period changes to `delta`.
inline long horizon_steps(long base_steps, double delta, double delta0) {
  if (base_steps < 1)
    throw std::domain_error("horizon_steps: base_steps must be at least 1");
  if (!(delta > 0.0) || !(delta0 > 0.0))
    throw std::domain_error("horizon_steps: periods must be positive");
  return std::llround(double(base_steps) * delta0 / delta);
}

enum class Integrator { Euler, ExactClosedForm };

/// Physics in physical units. `dynamics` writes ds/dt; `exact_step`, when
/// present, writes s(t+dt) in closed form for integrator ExactClosedForm.
struct ContinuousMDP {
  int state_dim = 0;
  int action_dim = 0;
  std::vector<double> action_low;   // per-dimension clip bounds
  std::vector<double> action_high;
  int disturbance_dim = 0;

  std::function<void(std::span<const double> s, std::span<const double> a,
                     std::span<const double> disturbance, std::span<double> ds_dt)>
      dynamics;
  std::function<double(std::span<const double> s, std::span<const double> a)> reward_rate;
  std::function<void(Rng&, std::span<double> s0)> initial_state;
  std::function<bool(std::span<const double> s)> terminal;  // empty: never terminal
  std::function<void(std::span<const double> s, std::span<const double> a,
                     std::span<const double> disturbance, double dt, std::span<double> s_next)>
      exact_step;

  double horizon = 0.0;  // physical episode length T, seconds
  double gamma0 = 0.99;  // discount per delta0 of physical time
  double delta0 = 0.05;  // base control period, seconds
  Integrator integrator = Integrator::Euler;
};

/// A ContinuousMDP stepped on a fixed grid of period delta. Rewards are
/// rates integrated over one step at the pre-step state, r(s_i, a_i)*delta.
class DiscretizedEnv final : public Env {
 public:
  DiscretizedEnv(ContinuousMDP mdp, double delta, std::uint64_t seed,
                 std::optional<Integrator> integrator = {})
      : mdp_(std::move(mdp)), delta_(delta), rng_(seed, /*stream=*/0x7ea1) {
    if (!(delta > 0.0)) throw std::domain_error("discretize: delta must be positive");
    if (mdp_.state_dim < 1 || mdp_.action_dim < 1)
      throw std::invalid_argument("discretize: state and action must have dimension >= 1");
    if (!mdp_.dynamics || !mdp_.reward_rate || !mdp_.initial_state)
      throw std::invalid_argument("discretize: dynamics, reward_rate and initial_state are required");
    if (!(mdp_.horizon > 0.0)) throw std::domain_error("discretize: horizon must be positive");
    if (mdp_.action_low.size() != std::size_t(mdp_.action_dim) ||
        mdp_.action_high.size() != std::size_t(mdp_.action_dim))
      throw std::invalid_argument("discretize: action bounds must match action_dim");

    integrator_ = integrator.value_or(mdp_.integrator);
    if (integrator_ == Integrator::ExactClosedForm && !mdp_.exact_step)
      throw std::invalid_argument("discretize: ExactClosedForm requested but no exact_step given");

    gamma_delta_ = effective_discount(mdp_.gamma0, delta_, mdp_.delta0);
    max_steps_ = std::llround(mdp_.horizon / delta_);
    if (max_steps_ < 1) throw std::domain_error("discretize: horizon shorter than one step");

    state_.resize(mdp_.state_dim);
    next_.resize(mdp_.state_dim);
    deriv_.resize(mdp_.state_dim);
    clipped_.resize(mdp_.action_dim);
    disturbance_.assign(std::size_t(mdp_.disturbance_dim), 0.0);
  }

  std::vector<double> reset() override {
    mdp_.initial_state(rng_, state_);
    std::fill(disturbance_.begin(), disturbance_.end(), 0.0);
    steps_ = 0;
    done_ = mdp_.terminal && mdp_.terminal(state_);
    return state_;
  }

  StepResult step(std::span<const double> action) override {
    if (done_) throw std::logic_error("step called on a finished episode");
    if (action.size() != std::size_t(mdp_.action_dim))
      throw std::invalid_argument("step: action has wrong dimension");

    bool clipped_any = false;
    for (int k = 0; k < mdp_.action_dim; ++k) {
      const double a = action[std::size_t(k)];
      const double c = std::clamp(a, mdp_.action_low[std::size_t(k)], mdp_.action_high[std::size_t(k)]);
      clipped_any |= (c != a);
      clipped_[std::size_t(k)] = c;
    }
    clip_count_ += clipped_any;

    const double reward = mdp_.reward_rate(state_, clipped_) * delta_;

    if (integrator_ == Integrator::ExactClosedForm) {
      mdp_.exact_step(state_, clipped_, disturbance_, delta_, next_);
      state_.swap(next_);
    } else {
      mdp_.dynamics(state_, clipped_, disturbance_, deriv_);
      for (int k = 0; k < mdp_.state_dim; ++k)
        state_[std::size_t(k)] += delta_ * deriv_[std::size_t(k)];
    }
    ++steps_;

    const bool terminal = mdp_.terminal && mdp_.terminal(state_);
    const bool truncated = !terminal && steps_ >= max_steps_;
    done_ = terminal || truncated;
    return {state_, reward, done_, truncated};
  }

  int obs_dim() const override { return mdp_.state_dim; }
  int action_dim() const override { return mdp_.action_dim; }
  double delta() const override { return delta_; }
  double gamma_delta() const override { return gamma_delta_; }
  long max_steps() const override { return max_steps_; }
  long steps_taken() const override { return steps_; }
  bool done() const override { return done_; }

  int disturbance_dim() const override { return mdp_.disturbance_dim; }
  void set_disturbance(std::span<const double> d) override {
    if (d.size() != disturbance_.size())
      throw std::invalid_argument("set_disturbance: wrong dimension");
    std::copy(d.begin(), d.end(), disturbance_.begin());
  }
  std::span<const double> applied_disturbance() const override { return disturbance_; }

  long action_clip_count() const override { return clip_count_; }

  double gamma0() const { return mdp_.gamma0; }
  double delta0() const { return mdp_.delta0; }
  double horizon() const { return mdp_.horizon; }
  Rng& rng() { return rng_; }

 private:
  ContinuousMDP mdp_;
  double delta_;
  double gamma_delta_ = 1.0;
  long max_steps_ = 0;
  Integrator integrator_ = Integrator::Euler;
  Rng rng_;

  std::vector<double> state_, next_, deriv_, clipped_, disturbance_;
  long steps_ = 0;
  long clip_count_ = 0;
  bool done_ = false;
};

inline std::unique_ptr<DiscretizedEnv> discretize(ContinuousMDP mdp, double delta,
                                                  std::uint64_t seed,
                                                  std::optional<Integrator> integrator = {}) {
  return std::make_unique<DiscretizedEnv>(std::move(mdp), delta, seed, integrator);
}

}  // namespace sarlab
