#pragma once

// Monte Carlo probe for the total variation (trace of the covariance) of the
// score-function policy-gradient estimator, with analytic fixtures on the
// alert environment and a delta-scaling sweep with log-log slope fitting.

#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "sarlab/envs.hpp"
#include "sarlab/macroact.hpp"
#include "sarlab/pg.hpp"
#include "sarlab/rng.hpp"
#include "sarlab/tinynn.hpp"

namespace sarlab {

/// Streaming per-coordinate variance (Welford), summed into a covariance
/// trace with the unbiased n-1 normalization. The full covariance matrix is
/// never materialized: the trace only needs diagonals.
class TraceAccumulator {
 public:
  explicit TraceAccumulator(std::size_t dim) : mean_(dim, 0.0), m2_(dim, 0.0) {
    if (dim == 0) throw std::invalid_argument("TraceAccumulator: dimension must be positive");
  }

  void add(std::span<const double> g) {
    if (g.size() != mean_.size()) throw std::invalid_argument("TraceAccumulator: bad sample size");
    ++n_;
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double delta = g[k] - mean_[k];
      mean_[k] += delta / double(n_);
      m2_[k] += delta * (g[k] - mean_[k]);
    }
  }

  long long count() const { return n_; }
  std::size_t dim() const { return mean_.size(); }

  double coordinate_variance(std::size_t k) const {
    require_two();
    return m2_.at(k) / double(n_ - 1);
  }

  double trace() const {
    require_two();
    double t = 0.0;
    for (double m2 : m2_) t += m2;
    return t / double(n_ - 1);
  }

 private:
  void require_two() const {
    if (n_ < 2) throw std::logic_error("TraceAccumulator: need at least two samples");
  }

  long long n_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

/// Order-sensitive digest of a parameter vector, used to assert that pure
/// evaluation passes leave the policy untouched.
inline std::uint64_t param_checksum(std::span<const double> theta) {
  std::uint64_t h = 0x9e3779b97f4a7c15ull;
  for (double x : theta) {
    h ^= std::bit_cast<std::uint64_t>(x);
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
  }
  return h;
}

/// Lower-bound reference line T*c / (delta * sigma_min^2).
inline double theorem1_bound(double T, double c, double delta, double sigma_min) {
  if (!(T > 0.0) || !(c > 0.0) || !(delta > 0.0) || !(sigma_min > 0.0))
    throw std::invalid_argument("theorem1_bound: all arguments must be positive");
  return T * c / (delta * sigma_min * sigma_min);
}

/// Least-squares slope of y against x. NaN when fewer than two distinct x.
inline double least_squares_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    return std::numeric_limits<double>::quiet_NaN();
  const double n = double(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / sxx;
}

struct ProbeEstimate {
  TraceAccumulator acc;
  double mean_return = 0.0;
  long long n_traj = 0;
  double trace() const { return acc.trace(); }
};

/// Samples n_traj complete episodes after a burn-in that only feeds the
/// observation normalizer, accumulates per-trajectory score-function
/// gradients, and returns the trace of their unbiased sample covariance.
/// Pure evaluation: parameters are checksummed before and after.
inline ProbeEstimate estimate_pg_variance(const GaussianPolicyNet& net,
                                          std::span<const double> theta, Env& env,
                                          const RepetitionController& ctrl, int n_traj,
                                          int burn_in, Rng& rng) {
  if (n_traj < 2) throw std::invalid_argument("estimate_pg_variance: need at least 2 trajectories");
  if (burn_in < 0) throw std::invalid_argument("estimate_pg_variance: negative burn-in");
  const std::uint64_t before = param_checksum(theta);

  RolloutCollector col(env, net, ctrl);
  for (int b = 0; b < burn_in; ++b) col.collect_episode(theta, rng);
  col.obs_normalizer().freeze();

  ProbeEstimate est{TraceAccumulator(net.param_count())};
  for (int t = 0; t < n_traj; ++t) {
    const std::vector<DecisionStep> traj = col.collect_episode(theta, rng);
    est.acc.add(vpg_trajectory_gradient(net, theta, traj));
    est.mean_return += duration_discounted_return(traj);
  }
  est.mean_return /= double(n_traj);
  est.n_traj = n_traj;

  if (param_checksum(theta) != before)
    throw std::logic_error("estimate_pg_variance: parameters changed during evaluation");
  return est;
}

// ---------------------------------------------------------------------------
// Scripted optimal-policy fixtures on the alert environment. Both play the
// known optimal off component deterministically from the current observation
// (press exactly while alerted, so the press lasts one micro-step and clears
// before any deadline can pass) and keep the num head a unit Gaussian around
// the single learnable mu. They differ only in when num is re-drawn: the
// region-based script re-decides once, at the alert transition; the
// duration-based script re-decides every reaction window. With f == 0 the
// return is the terminal noise, so the per-trajectory gradient in mu is
// (sum of num noises) * return, whose variance is the decision count: 2 for
// the region-based script, 1/x for the duration-based one.

/// One region-based trajectory: hold the first num draw until the alert
/// appears, re-draw once, ride that draw to the horizon. Returns the
/// mu-coordinate gradient sample.
inline double sar_fixture_trajectory(AlertThenOffEnv& env, double mu, Rng& rng) {
  std::vector<double> obs = env.reset();
  double ret = 0.0, eps_sum = 0.0;
  double eps = rng.normal();
  eps_sum += eps;
  bool redrawn = false;
  for (;;) {
    if (!redrawn && obs[0] > 0.5) {  // alert transition: the one re-decision
      eps = rng.normal();
      eps_sum += eps;
      redrawn = true;
    }
    const double act[2] = {obs[0] > 0.5 ? 1.0 : 0.0, mu + eps};
    StepResult r = env.step(act);
    ret += r.reward;
    if (r.done) return eps_sum * ret;
    obs = std::move(r.obs);
  }
}

/// One duration-based trajectory: a fresh num draw every reaction window,
/// regardless of state. Decision count is exactly the horizon over the
/// window.
inline double figarc_fixture_trajectory(AlertThenOffEnv& env, double mu, Rng& rng) {
  std::vector<double> obs = env.reset();
  const long window_steps = figar_repeats(env.reaction_window(), env.delta());
  double ret = 0.0, eps_sum = 0.0;
  for (;;) {
    const double eps = rng.normal();
    eps_sum += eps;
    for (long k = 0; k < window_steps; ++k) {
      const double act[2] = {obs[0] > 0.5 ? 1.0 : 0.0, mu + eps};
      StepResult r = env.step(act);
      ret += r.reward;
      if (r.done) return eps_sum * ret;
      obs = std::move(r.obs);
    }
  }
}

/// Monte Carlo trace of the scripted fixture's gradient. `kind` selects the
/// region-based (SAR) or duration-based (FiGARC) script.
inline double prop2_fixture_trace(ControllerKind kind, double delta, double x, int n_traj,
                                  std::uint64_t seed, double mu = 0.0) {
  if (n_traj < 2) throw std::invalid_argument("prop2_fixture_trace: need at least 2 trajectories");
  if (kind != ControllerKind::SAR && kind != ControllerKind::FiGARC)
    throw std::invalid_argument("prop2_fixture_trace: fixture exists for SAR and FiGARC only");
  AlertParams params;
  params.x = x;
  AlertThenOffEnv env(delta, seed, params);
  Rng rng(seed, 0xf1c5);
  TraceAccumulator acc(1);
  for (int t = 0; t < n_traj; ++t) {
    const double g = kind == ControllerKind::SAR ? sar_fixture_trajectory(env, mu, rng)
                                                 : figarc_fixture_trajectory(env, mu, rng);
    acc.add(std::span<const double>(&g, 1));
  }
  return acc.trace();
}

// ---------------------------------------------------------------------------
// Delta-scaling sweep.

struct ProbeConfig {
  std::vector<double> delta_grid;
  std::vector<std::uint64_t> seeds;
  int n_traj = 100;
  int burn_in = 10;
};

struct ProbePoint {
  double delta = 0.0;
  std::uint64_t seed = 0;
  double trace = 0.0;
  long long n_traj = 0;
};

struct VarianceProbeReport {
  ControllerKind controller = ControllerKind::None;
  int burn_in = 0;
  std::vector<ProbePoint> points;          // grid-major, seed-minor
  std::vector<double> delta_grid;
  std::vector<double> mean_trace;          // per delta, across seeds
  std::vector<double> ci95_half;           // 1.96 * sd / sqrt(#seeds)
  double slope = std::numeric_limits<double>::quiet_NaN();  // log trace vs log delta
};

using ProbeEnvFactory = std::function<std::unique_ptr<Env>(double delta, std::uint64_t seed)>;

/// Estimates the gradient-variance trace over a delta grid with a fresh
/// randomly initialized policy per seed, and fits the log-log slope across
/// all positive estimates.
inline VarianceProbeReport delta_scaling_sweep(const GaussianPolicyNet& net,
                                               const RepetitionController& ctrl,
                                               const ProbeEnvFactory& env_factory,
                                               const ProbeConfig& cfg) {
  if (cfg.delta_grid.size() < 3)
    throw std::invalid_argument("delta_scaling_sweep: grid needs at least 3 points");
  double lo = cfg.delta_grid.front(), hi = cfg.delta_grid.front();
  for (double d : cfg.delta_grid) {
    if (!(d > 0.0)) throw std::invalid_argument("delta_scaling_sweep: deltas must be positive");
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  if (hi / lo < 10.0 * (1.0 - 1e-12))
    throw std::invalid_argument("delta_scaling_sweep: grid must span at least one decade");
  if (cfg.seeds.size() < 2)
    throw std::invalid_argument("delta_scaling_sweep: need at least 2 seeds");

  VarianceProbeReport rep;
  rep.controller = ctrl.kind;
  rep.burn_in = cfg.burn_in;
  rep.delta_grid = cfg.delta_grid;

  std::vector<double> log_d, log_t;
  std::vector<double> theta(net.param_count());
  for (double delta : cfg.delta_grid) {
    double sum = 0.0, sumsq = 0.0;
    for (std::uint64_t seed : cfg.seeds) {
      Rng init(mix_seed(seed, 0x9010), 1);
      net.init_params(theta, init);
      std::unique_ptr<Env> env = env_factory(delta, seed);
      Rng rng(mix_seed(seed, std::bit_cast<std::uint64_t>(delta)), 2);
      ProbeEstimate est = estimate_pg_variance(net, theta, *env, ctrl, cfg.n_traj,
                                               cfg.burn_in, rng);
      const double tr = est.trace();
      rep.points.push_back({delta, seed, tr, est.n_traj});
      sum += tr;
      sumsq += tr * tr;
      if (tr > 0.0) {
        log_d.push_back(std::log(delta));
        log_t.push_back(std::log(tr));
      }
    }
    const double n = double(cfg.seeds.size());
    const double mean = sum / n;
    const double var = std::max(0.0, (sumsq - n * mean * mean) / (n - 1.0));
    rep.mean_trace.push_back(mean);
    rep.ci95_half.push_back(1.96 * std::sqrt(var) / std::sqrt(n));
  }
  rep.slope = least_squares_slope(log_d, log_t);
  return rep;
}

}  // namespace sarlab
