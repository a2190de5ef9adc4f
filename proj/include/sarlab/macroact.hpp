#pragma once
// Action-repetition controllers and the macro-action executor. A controller
// decides, after every micro-step of a hold, whether the current action keeps
// repeating; the executor aggregates the held micro-steps into one decision
// step with discount-correct reward accumulation.

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "sarlab/timegrid.hpp"
#include "sarlab/tinynn.hpp"

namespace sarlab {

enum class ControllerKind { None, Fixed, SAR, LambdaSAR, FiGARC, ArNoise };
enum class DistanceMetric { L1Normalized, L2Normalized };
enum class StopReason { RegionExit, TimeCap, EpisodeEnd, Forced };

struct RepetitionController {
  ControllerKind kind = ControllerKind::None;
  int fixed_n = 1;       // Fixed(n)
  double lambda = 1.0;   // LambdaSAR blend weight
  double alpha = 0.0;    // ArNoise AR(1) coefficient
  double d_max = 0.5;
  double t_max = 0.05;   // seconds
  DistanceMetric metric = DistanceMetric::L1Normalized;
  std::optional<std::vector<int>> mask;  // restrict the distance to these dims

  bool operator==(const RepetitionController&) const = default;

  /// Auxiliary policy outputs the controller consumes (the d or t head).
  int aux_dim() const {
    return (kind == ControllerKind::SAR || kind == ControllerKind::LambdaSAR ||
            kind == ControllerKind::FiGARC)
               ? 1
               : 0;
  }

  void validate() const {
    if (lambda < 0.0 || lambda > 1.0)
      throw std::invalid_argument("controller: lambda must lie in [0, 1]");
    if (!(d_max > 0.0)) throw std::invalid_argument("controller: d_max must be positive");
    if (!(t_max > 0.0)) throw std::invalid_argument("controller: t_max must be positive");
    if (kind == ControllerKind::Fixed && fixed_n < 1)
      throw std::invalid_argument("controller: fixed repeat count must be at least 1");
    if (alpha < 0.0 || alpha >= 1.0)
      throw std::invalid_argument("controller: noise correlation must lie in [0, 1)");
    if (mask && mask->empty()) throw std::invalid_argument("controller: mask must not be empty");
  }
};

/// Mean deviation between two normalized states: L1 divided by the dimension
/// count, or L2 divided by sqrt of it. A mask restricts both to its dims.
inline double distance(std::span<const double> s_norm, std::span<const double> anchor_norm,
                       DistanceMetric metric,
                       const std::optional<std::vector<int>>& mask = std::nullopt) {
  if (s_norm.size() != anchor_norm.size())
    throw std::invalid_argument("distance: dimension mismatch");
  if (mask && mask->empty()) throw std::invalid_argument("distance: empty mask");
  double acc = 0.0;
  std::size_t n = 0;
  auto accumulate = [&](std::size_t k) {
    const double d = s_norm[k] - anchor_norm[k];
    acc += metric == DistanceMetric::L1Normalized ? std::abs(d) : d * d;
    ++n;
  };
  if (mask) {
    for (int k : *mask) {
      if (k < 0 || std::size_t(k) >= s_norm.size())
        throw std::invalid_argument("distance: mask index out of range");
      accumulate(std::size_t(k));
    }
  } else {
    for (std::size_t k = 0; k < s_norm.size(); ++k) accumulate(k);
  }
  if (n == 0) throw std::invalid_argument("distance: no dimensions");
  return metric == DistanceMetric::L1Normalized ? acc / double(n)
                                                : std::sqrt(acc) / std::sqrt(double(n));
}

/// Squashes the unbounded aux head sample into its target range:
/// d = d_max * sigmoid(raw) for region controllers, t = t_max * sigmoid(raw)
/// for duration controllers, 0 for controllers without an aux head.
inline double map_aux_head(double raw, const RepetitionController& ctrl) {
  const double sig = 1.0 / (1.0 + std::exp(-raw));
  switch (ctrl.kind) {
    case ControllerKind::SAR:
    case ControllerKind::LambdaSAR:
      return ctrl.d_max * sig;
    case ControllerKind::FiGARC:
      return ctrl.t_max * sig;
    default:
      return 0.0;
  }
}

/// Number of micro-steps covering a duration t at period delta: max(1, ceil(t/delta)),
/// with a nudge so exact multiples stay exact under floating-point division.
inline long figar_repeats(double t, double delta) {
  if (t < 0.0) throw std::domain_error("figar_repeats: negative duration");
  if (!(delta > 0.0)) throw std::domain_error("figar_repeats: period must be positive");
  const long n = long(std::ceil(t / delta - 1e-9));
  return n < 1 ? 1 : n;
}

struct StopDecision {
  bool stop = false;
  StopReason reason = StopReason::Forced;
};

/// Stop rule evaluated after each held micro-step. `aux` is the mapped head
/// value that opened this macro-action (d_i or t_i), `held_steps >= 1` the
/// number of micro-steps already taken, so elapsed time is held_steps*delta.
inline StopDecision should_stop(const RepetitionController& ctrl, std::span<const double> s_norm,
                                std::span<const double> anchor_norm, double aux, long held_steps,
                                double delta) {
  const double elapsed = double(held_steps) * delta;
  switch (ctrl.kind) {
    case ControllerKind::None:
    case ControllerKind::ArNoise:
      return {held_steps >= 1, StopReason::TimeCap};
    case ControllerKind::Fixed:
      return {held_steps >= ctrl.fixed_n, StopReason::TimeCap};
    case ControllerKind::SAR: {
      if (distance(s_norm, anchor_norm, ctrl.metric, ctrl.mask) > aux)
        return {true, StopReason::RegionExit};
      if (held_steps >= figar_repeats(ctrl.t_max, delta)) return {true, StopReason::TimeCap};
      return {};
    }
    case ControllerKind::LambdaSAR: {
      const double blend = ctrl.lambda * distance(s_norm, anchor_norm, ctrl.metric, ctrl.mask) +
                           (1.0 - ctrl.lambda) * std::abs(elapsed);
      if (blend > aux) return {true, StopReason::RegionExit};
      if (held_steps >= figar_repeats(ctrl.t_max, delta)) return {true, StopReason::TimeCap};
      return {};
    }
    case ControllerKind::FiGARC:
      return {held_steps >= figar_repeats(std::min(aux, ctrl.t_max), delta), StopReason::TimeCap};
  }
  return {};
}

/// One decision of the discretized semi-MDP: an action held for n micro-steps.
struct DecisionStep {
  std::vector<double> anchor_state;             // raw observation at the decision
  std::vector<double> anchor_state_normalized;  // under the frozen snapshot
  std::vector<double> action;                   // primary dims, pre-clip
  double aux = 0.0;      // mapped d_i or t_i (0 when the controller has no head)
  double aux_raw = 0.0;  // unsquashed head sample, kept for log-prob recompute
  long held_micro_steps = 0;
  double duration = 0.0;            // seconds, = n * delta
  double aggregated_reward = 0.0;   // sum of gamma_delta^k r_k over the hold
  double raw_reward_sum = 0.0;      // undiscounted sum of r_k, for return logging
  double carry_discount = 1.0;      // gamma_delta^n
  double log_prob = 0.0;            // filled by the collector
  double value = 0.0;               // filled by the collector
  bool done = false;
  bool truncated = false;
  StopReason stop_reason = StopReason::Forced;
  std::vector<double> next_obs;     // raw observation after the hold
};

/// Holds `action` on `env` until the controller stops it, a terminal state
/// closes the episode, or the step budget runs out. Distances are measured
/// against the anchor under the frozen `snapshot` normalizer.
inline DecisionStep execute_macro_action(Env& env, std::span<const double> obs,
                                         std::span<const double> action, double aux,
                                         const RepetitionController& ctrl,
                                         const Normalizer& snapshot) {
  if (env.done()) throw std::logic_error("execute_macro_action: episode already finished");
  env.begin_decision();

  DecisionStep dec;
  dec.anchor_state.assign(obs.begin(), obs.end());
  dec.anchor_state_normalized = snapshot.normalize(obs);
  dec.action.assign(action.begin(), action.end());
  dec.aux = aux;

  const double gd = env.gamma_delta();
  const double delta = env.delta();
  double disc = 1.0;

  thread_local std::vector<double> s_norm;
  s_norm.resize(std::size_t(env.obs_dim()));

  StepResult r;
  for (;;) {
    r = env.step(dec.action);
    dec.aggregated_reward += disc * r.reward;
    dec.raw_reward_sum += r.reward;
    disc *= gd;
    ++dec.held_micro_steps;
    if (r.done) {
      dec.done = true;
      dec.truncated = r.truncated;
      dec.stop_reason = StopReason::EpisodeEnd;
      break;
    }
    snapshot.normalize(r.obs, s_norm);
    const StopDecision sd =
        should_stop(ctrl, s_norm, dec.anchor_state_normalized, aux, dec.held_micro_steps, delta);
    if (sd.stop) {
      dec.stop_reason = sd.reason;
      break;
    }
  }
  dec.duration = double(dec.held_micro_steps) * delta;
  dec.carry_discount = disc;
  dec.next_obs = std::move(r.obs);
  return dec;
}

/// Stationary AR(1) exploration noise: the first draw after reset() is fresh
/// N(0,1), then eps_t = alpha*eps_{t-1} + sqrt(1-alpha^2)*eta_t, so every
/// marginal stays standard normal while consecutive draws correlate by alpha.
class ArNoise {
 public:
  ArNoise(int dim, double alpha) : alpha_(alpha), eps_(std::size_t(dim), 0.0) {
    if (dim < 1) throw std::invalid_argument("ArNoise: dim must be positive");
    if (alpha < 0.0 || alpha >= 1.0) throw std::invalid_argument("ArNoise: alpha must lie in [0, 1)");
  }

  void reset() { fresh_ = true; }

  void next(Rng& rng, std::span<double> out) {
    if (out.size() != eps_.size()) throw std::invalid_argument("ArNoise: bad output size");
    const double carry = std::sqrt(1.0 - alpha_ * alpha_);
    for (std::size_t k = 0; k < eps_.size(); ++k)
      eps_[k] = fresh_ ? rng.normal() : alpha_ * eps_[k] + carry * rng.normal();
    fresh_ = false;
    std::copy(eps_.begin(), eps_.end(), out.begin());
  }

 private:
  double alpha_;
  std::vector<double> eps_;
  bool fresh_ = true;
};

}  // namespace sarlab
