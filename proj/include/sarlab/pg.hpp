#pragma once

// Decision-step policy gradients: rollout collection over macro-actions,
// duration-aware GAE, and PPO / A2C / VPG updates on one flat parameter
// vector. Collection keeps normalizer state and mid-episode progress across
// calls so training sees one continuous stream of decisions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sarlab/macroact.hpp"
#include "sarlab/rng.hpp"
#include "sarlab/timegrid.hpp"
#include "sarlab/tinynn.hpp"

namespace sarlab {

/// Raised when a loss or parameter goes non-finite mid-update; the CLI maps
/// this to its own exit code so sweeps can tell divergence from bad config.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline double scaled_lr(double base_lr, double delta, double delta0) {
  if (!(delta > 0.0) || !(delta0 > 0.0))
    throw std::invalid_argument("scaled_lr: time scales must be positive");
  return base_lr * (delta / delta0);
}

inline void check_finite_params(std::span<const double> theta, const char* who) {
  for (double p : theta)
    if (!std::isfinite(p)) throw NumericalError(std::string(who) + ": parameter became non-finite");
}

/// A fixed number of decision steps, possibly spanning several episodes.
/// `next_value[i]` is the bootstrap V(s_{i+1}): zero after a terminal, the
/// critic's prediction after a truncation or at the rollout tail.
struct Rollout {
  std::vector<DecisionStep> steps;
  std::vector<double> train_reward;       // per decision; scale-normalized when enabled
  std::vector<double> next_value;
  std::vector<std::size_t> episode_ends;  // indices whose step finished an episode
  long long total_micro_steps = 0;
  double total_physical_time = 0.0;
  std::vector<double> episode_returns;    // undiscounted raw returns of episodes completed here
  std::vector<double> episode_lengths;    // physical seconds of those episodes

  double mean_hold_duration() const {
    if (steps.empty()) return 0.0;
    double s = 0.0;
    for (const auto& d : steps) s += d.duration;
    return s / double(steps.size());
  }
};

/// Rebuilds the vector the policy sampled for a decision: the primary action
/// dims followed by the raw auxiliary head sample when the policy has one.
inline void sampled_vector(const GaussianPolicyNet& net, const DecisionStep& d,
                           std::vector<double>& z) {
  if (net.aux_dim() > 1) throw std::invalid_argument("sampled_vector: unsupported aux dimension");
  z.assign(d.action.begin(), d.action.end());
  if (net.aux_dim() == 1) z.push_back(d.aux_raw);
  if (z.size() != std::size_t(net.sample_dim()))
    throw std::invalid_argument("sampled_vector: dimension mismatch");
}

/// Drives one environment with one policy. The observation normalizer updates
/// once per decision with the anchor state; each macro-action runs under the
/// snapshot frozen at its start. Reward statistics are tracked per decision so
/// training rewards can be scale-normalized without touching logged returns.
class RolloutCollector {
 public:
  RolloutCollector(Env& env, const GaussianPolicyNet& net, RepetitionController ctrl,
                   bool normalize_rewards = false)
      : env_(&env),
        net_(&net),
        ctrl_(ctrl),
        obs_norm_(env.obs_dim()),
        rew_norm_(1),
        ar_(net.act_dim(), ctrl.kind == ControllerKind::ArNoise ? ctrl.alpha : 0.0),
        normalize_rewards_(normalize_rewards) {
    ctrl_.validate();
    if (net.aux_dim() != ctrl_.aux_dim())
      throw std::invalid_argument("RolloutCollector: policy aux head does not match controller");
    if (net.obs_dim() != env.obs_dim() || net.act_dim() != env.action_dim())
      throw std::invalid_argument("RolloutCollector: policy does not fit environment");
  }

  Normalizer& obs_normalizer() { return obs_norm_; }
  const Normalizer& obs_normalizer() const { return obs_norm_; }
  Normalizer& reward_normalizer() { return rew_norm_; }
  const RepetitionController& controller() const { return ctrl_; }

  Rollout collect(std::span<const double> theta, int n_decisions, Rng& rng) {
    if (n_decisions < 1) throw std::invalid_argument("collect: need at least one decision");
    Rollout ro;
    ro.steps.reserve(std::size_t(n_decisions));
    for (int i = 0; i < n_decisions; ++i) finish_step(ro, one_decision(theta, rng));
    resolve_next_values(ro, theta, *net_, snap_, obs_n_);
    return ro;
  }

  /// One complete episode (ends with done, terminal or truncated).
  std::vector<DecisionStep> collect_episode(std::span<const double> theta, Rng& rng) {
    std::vector<DecisionStep> traj;
    for (;;) {
      DecisionStep dec = one_decision(theta, rng);
      const bool done = dec.done;
      if (done)
        need_reset_ = true;
      else
        obs_ = dec.next_obs;
      traj.push_back(std::move(dec));
      if (done) return traj;
    }
  }

  /// Fills the placeholder bootstrap entries: mid-rollout decisions reuse the
  /// critic value stored at the next decision's anchor; a rollout cut
  /// mid-episode is bootstrapped under the last decision's snapshot.
  static void resolve_next_values(Rollout& ro, std::span<const double> theta,
                                  const GaussianPolicyNet& net, const Normalizer& last_snap,
                                  std::vector<double>& scratch) {
    const std::size_t n = ro.steps.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (ro.steps[i].done) continue;
      if (i + 1 < n) {
        ro.next_value[i] = ro.steps[i + 1].value;
      } else {
        last_snap.normalize(ro.steps[i].next_obs, ensure(scratch, ro.steps[i].next_obs.size()));
        ro.next_value[i] = net.value(theta, scratch);
      }
    }
  }

 private:
  DecisionStep one_decision(std::span<const double> theta, Rng& rng) {
    if (need_reset_) {
      obs_ = env_->reset();
      ar_.reset();
      need_reset_ = false;
    }
    obs_norm_.update(obs_);
    snap_ = obs_norm_.snapshot();
    snap_.normalize(obs_, ensure(obs_n_, obs_.size()));

    double lp;
    if (ctrl_.kind == ControllerKind::ArNoise) {
      net_->eval_dist(theta, obs_n_, ev_);
      const std::size_t n = std::size_t(net_->sample_dim());
      ar_.next(rng, ensure(eps_, n));
      z_.resize(n);
      for (std::size_t k = 0; k < n; ++k) z_[k] = ev_.mu[k] + ev_.sigma[k] * eps_[k];
      lp = net_->log_prob_from(ev_, z_);
    } else {
      PolicySample ps = net_->sample(theta, obs_n_, rng);
      z_ = std::move(ps.action);
      lp = ps.log_prob;
    }
    const double v = net_->value(theta, obs_n_);

    const int k = net_->act_dim();
    const double aux = net_->aux_dim() ? map_aux_head(z_[std::size_t(k)], ctrl_) : 0.0;
    DecisionStep dec = execute_macro_action(*env_, obs_, std::span(z_).first(std::size_t(k)),
                                            aux, ctrl_, snap_);
    if (net_->aux_dim()) dec.aux_raw = z_[std::size_t(k)];
    dec.log_prob = lp;
    dec.value = v;
    trunc_bootstrap_ = 0.0;
    if (dec.done && dec.truncated) {
      snap_.normalize(dec.next_obs, ensure(obs_n_, dec.next_obs.size()));
      trunc_bootstrap_ = net_->value(theta, obs_n_);
    }
    return dec;
  }

  void finish_step(Rollout& ro, DecisionStep dec) {
    ro.total_micro_steps += dec.held_micro_steps;
    ro.total_physical_time += dec.duration;
    episode_return_ += dec.raw_reward_sum;

    const double raw = dec.aggregated_reward;
    rew_norm_.update(std::span<const double>(&raw, 1));
    ro.train_reward.push_back(normalize_rewards_ ? rew_norm_.scale(raw) : raw);

    const std::size_t i = ro.steps.size();
    if (dec.done) {
      ro.next_value.push_back(dec.truncated ? trunc_bootstrap_ : 0.0);
      ro.episode_ends.push_back(i);
      ro.episode_returns.push_back(episode_return_);
      ro.episode_lengths.push_back(env_->physical_time());
      episode_return_ = 0.0;
      need_reset_ = true;
    } else {
      ro.next_value.push_back(std::numeric_limits<double>::quiet_NaN());  // resolved after the loop
      obs_ = dec.next_obs;
    }
    ro.steps.push_back(std::move(dec));
  }

  static std::span<double> ensure(std::vector<double>& v, std::size_t n) {
    v.resize(n);
    return v;
  }

  Env* env_;
  const GaussianPolicyNet* net_;
  RepetitionController ctrl_;
  Normalizer obs_norm_;
  Normalizer rew_norm_;
  Normalizer snap_{1};
  ArNoise ar_;
  bool normalize_rewards_;
  bool need_reset_ = true;
  std::vector<double> obs_;
  double episode_return_ = 0.0;
  double trunc_bootstrap_ = 0.0;
  PolicyEval ev_;
  std::vector<double> obs_n_, z_, eps_;
};

/// Reference collector used to cross-check the macro-action path: one policy
/// decision per micro-step, stepping the environment directly with none of
/// the controller machinery. With the None controller both paths must agree
/// bit for bit.
class VanillaCollector {
 public:
  VanillaCollector(Env& env, const GaussianPolicyNet& net, bool normalize_rewards = false)
      : env_(&env), net_(&net), obs_norm_(env.obs_dim()), rew_norm_(1),
        normalize_rewards_(normalize_rewards) {
    if (net.aux_dim() != 0)
      throw std::invalid_argument("VanillaCollector: policy must have no aux head");
    if (net.obs_dim() != env.obs_dim() || net.act_dim() != env.action_dim())
      throw std::invalid_argument("VanillaCollector: policy does not fit environment");
  }

  Normalizer& obs_normalizer() { return obs_norm_; }

  Rollout collect(std::span<const double> theta, int n_decisions, Rng& rng) {
    if (n_decisions < 1) throw std::invalid_argument("collect: need at least one decision");
    Rollout ro;
    ro.steps.reserve(std::size_t(n_decisions));
    for (int i = 0; i < n_decisions; ++i) {
      if (need_reset_) {
        obs_ = env_->reset();
        need_reset_ = false;
      }
      obs_norm_.update(obs_);
      snap_ = obs_norm_.snapshot();
      obs_n_.resize(obs_.size());
      snap_.normalize(obs_, obs_n_);
      PolicySample ps = net_->sample(theta, obs_n_, rng);
      const double v = net_->value(theta, obs_n_);

      env_->begin_decision();
      StepResult r = env_->step(ps.action);

      DecisionStep dec;
      dec.anchor_state = obs_;
      dec.anchor_state_normalized = obs_n_;
      dec.action = std::move(ps.action);
      dec.held_micro_steps = 1;
      dec.duration = env_->delta();
      dec.aggregated_reward = 1.0 * r.reward;
      dec.raw_reward_sum = r.reward;
      dec.carry_discount = 1.0 * env_->gamma_delta();
      dec.log_prob = ps.log_prob;
      dec.value = v;
      dec.done = r.done;
      dec.truncated = r.truncated;
      dec.stop_reason = r.done ? StopReason::EpisodeEnd : StopReason::TimeCap;
      dec.next_obs = std::move(r.obs);

      ro.total_micro_steps += 1;
      ro.total_physical_time += dec.duration;
      episode_return_ += dec.raw_reward_sum;
      const double raw = dec.aggregated_reward;
      rew_norm_.update(std::span<const double>(&raw, 1));
      ro.train_reward.push_back(normalize_rewards_ ? rew_norm_.scale(raw) : raw);

      if (dec.done) {
        double nv = 0.0;
        if (dec.truncated) {
          obs_n_.resize(dec.next_obs.size());
          snap_.normalize(dec.next_obs, obs_n_);
          nv = net_->value(theta, obs_n_);
        }
        ro.next_value.push_back(nv);
        ro.episode_ends.push_back(ro.steps.size());
        ro.episode_returns.push_back(episode_return_);
        ro.episode_lengths.push_back(env_->physical_time());
        episode_return_ = 0.0;
        need_reset_ = true;
      } else {
        ro.next_value.push_back(std::numeric_limits<double>::quiet_NaN());
        obs_ = dec.next_obs;
      }
      ro.steps.push_back(std::move(dec));
    }
    RolloutCollector::resolve_next_values(ro, theta, *net_, snap_, obs_n_);
    return ro;
  }

 private:
  Env* env_;
  const GaussianPolicyNet* net_;
  Normalizer obs_norm_;
  Normalizer rew_norm_;
  Normalizer snap_{1};
  bool normalize_rewards_;
  bool need_reset_ = true;
  std::vector<double> obs_, obs_n_;
  double episode_return_ = 0.0;
};

/// Per-decision advantages and regression targets for one rollout.
struct AdvantageBatch {
  std::vector<double> advantage;
  std::vector<double> return_target;
  std::vector<double> old_log_prob;
  std::vector<double> value_pred;

  void check_finite(const char* who) const {
    for (const auto* v : {&advantage, &return_target, &old_log_prob, &value_pred})
      for (double x : *v)
        if (!std::isfinite(x)) throw NumericalError(std::string(who) + ": non-finite advantage batch");
  }
};

/// Generalized advantage estimation with variable-duration discounting: the
/// per-decision factor is the carry discount gamma_delta^n accumulated over
/// the hold, so TD residuals and the lambda chain respect physical time.
/// Chains break at episode ends; terminals bootstrap zero, truncations the
/// critic value stored in next_value.
inline AdvantageBatch compute_gae(const Rollout& ro, double lambda_gae) {
  const std::size_t n = ro.steps.size();
  if (n == 0) throw std::invalid_argument("compute_gae: empty rollout");
  if (!(lambda_gae >= 0.0 && lambda_gae <= 1.0))
    throw std::invalid_argument("compute_gae: lambda must lie in [0, 1]");
  if (ro.next_value.size() != n || ro.train_reward.size() != n)
    throw std::invalid_argument("compute_gae: missing bootstrap values");

  AdvantageBatch b;
  b.advantage.resize(n);
  b.return_target.resize(n);
  b.old_log_prob.resize(n);
  b.value_pred.resize(n);
  double next_adv = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const DecisionStep& d = ro.steps[i];
    if (d.done) next_adv = 0.0;
    const double g = d.carry_discount;
    const double td = ro.train_reward[i] + g * ro.next_value[i] - d.value;
    next_adv = td + g * lambda_gae * next_adv;
    b.advantage[i] = next_adv;
    b.return_target[i] = next_adv + d.value;
    b.old_log_prob[i] = d.log_prob;
    b.value_pred[i] = d.value;
  }
  b.check_finite("compute_gae");
  return b;
}

/// Shifts and scales advantages to mean 0, standard deviation 1 (population
/// normalization with a small epsilon guard). Return targets are untouched.
inline void standardize_advantages(AdvantageBatch& b) {
  const std::size_t n = b.advantage.size();
  if (n == 0) return;
  double mean = 0.0;
  for (double a : b.advantage) mean += a;
  mean /= double(n);
  double var = 0.0;
  for (double a : b.advantage) var += (a - mean) * (a - mean);
  var /= double(n);
  const double scale = 1.0 / (std::sqrt(var) + 1e-8);
  for (double& a : b.advantage) a = (a - mean) * scale;
}

/// One sample's clipped-surrogate objective term min(r*A, clip(r)*A).
inline double ppo_objective_term(double ratio, double adv, double clip) {
  const double clipped = std::min(std::max(ratio, 1.0 - clip), 1.0 + clip);
  return std::min(ratio * adv, clipped * adv);
}

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  long minibatch_passes = 0;
};

struct PpoConfig {
  double clip = 0.2;
  int epochs = 10;
  int minibatch = 64;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  bool standardize = true;
};

/// Minibatched clipped-surrogate update over the whole batch for several
/// epochs. Indices are reshuffled per epoch only when more than one minibatch
/// exists, so a full-batch pass visits samples in natural order.
inline UpdateStats ppo_update(const GaussianPolicyNet& net, std::span<double> theta, Adam& adam,
                              const Rollout& ro, AdvantageBatch batch, const PpoConfig& cfg,
                              Rng& rng) {
  const std::size_t n = ro.steps.size();
  if (n == 0) throw std::invalid_argument("ppo_update: empty batch");
  if (batch.advantage.size() != n) throw std::invalid_argument("ppo_update: batch size mismatch");
  if (!(cfg.clip > 0.0)) throw std::invalid_argument("ppo_update: clip must be positive");
  if (cfg.epochs < 1 || cfg.minibatch < 1)
    throw std::invalid_argument("ppo_update: epochs and minibatch must be positive");
  batch.check_finite("ppo_update");
  if (cfg.standardize) standardize_advantages(batch);

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t(0));
  const bool reshuffle = n > std::size_t(cfg.minibatch);

  std::vector<double> grad(theta.size());
  PolicyEval ev;
  MlpCache vcache;
  std::vector<double> z;
  UpdateStats st;
  double obj_sum = 0.0, v_sum = 0.0, ent_sum = 0.0, kl_sum = 0.0;
  long clip_count = 0, passes = 0;

  for (int e = 0; e < cfg.epochs; ++e) {
    if (reshuffle) shuffle(idx, rng);
    for (std::size_t start = 0; start < n; start += std::size_t(cfg.minibatch)) {
      const std::size_t end = std::min(n, start + std::size_t(cfg.minibatch));
      const double m = double(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      double mb_obj = 0.0, mb_v = 0.0;
      for (std::size_t j = start; j < end; ++j) {
        const std::size_t i = idx[j];
        const DecisionStep& d = ro.steps[i];
        const double adv = batch.advantage[i];
        sampled_vector(net, d, z);
        net.eval_dist(theta, d.anchor_state_normalized, ev);
        const double lp = net.log_prob_from(ev, z);
        const double ratio = std::exp(lp - batch.old_log_prob[i]);
        const double s1 = ratio * adv;
        const double s2 = std::min(std::max(ratio, 1.0 - cfg.clip), 1.0 + cfg.clip) * adv;
        mb_obj += std::min(s1, s2);
        if (s1 <= s2) net.log_prob_backward(theta, ev, z, -ratio * adv / m, grad);
        if (std::abs(ratio - 1.0) > cfg.clip) ++clip_count;
        kl_sum += batch.old_log_prob[i] - lp;

        const double v = net.value(theta, d.anchor_state_normalized, &vcache);
        const double verr = v - batch.return_target[i];
        mb_v += verr * verr;
        net.value_backward(theta, vcache, cfg.value_coef * 2.0 * verr / m, grad);

        ent_sum += net.entropy(ev);
        if (cfg.entropy_coef != 0.0) net.entropy_backward(theta, ev, -cfg.entropy_coef / m, grad);
      }
      if (!std::isfinite(mb_obj) || !std::isfinite(mb_v))
        throw NumericalError("ppo_update: non-finite loss (epoch " + std::to_string(e) +
                             ", offset " + std::to_string(start) + ")");
      adam.step(theta, grad);
      net.clamp_log_std(theta);
      check_finite_params(theta, "ppo_update");
      obj_sum += mb_obj;
      v_sum += mb_v;
      passes += long(end - start);
      ++st.minibatch_passes;
    }
  }
  st.policy_loss = -obj_sum / double(passes);
  st.value_loss = v_sum / double(passes);
  st.entropy = ent_sum / double(passes);
  st.approx_kl = kl_sum / double(passes);
  st.clip_fraction = double(clip_count) / double(passes);
  return st;
}

struct A2cConfig {
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  bool standardize = true;
};

/// Single full-batch actor-critic pass: mean of -log pi * A plus value MSE.
inline UpdateStats a2c_update(const GaussianPolicyNet& net, std::span<double> theta, Adam& adam,
                              const Rollout& ro, AdvantageBatch batch, const A2cConfig& cfg) {
  const std::size_t n = ro.steps.size();
  if (n == 0) throw std::invalid_argument("a2c_update: empty batch");
  if (batch.advantage.size() != n) throw std::invalid_argument("a2c_update: batch size mismatch");
  batch.check_finite("a2c_update");
  if (cfg.standardize) standardize_advantages(batch);

  const double m = double(n);
  std::vector<double> grad(theta.size(), 0.0);
  PolicyEval ev;
  MlpCache vcache;
  std::vector<double> z;
  UpdateStats st;
  double pg_sum = 0.0, v_sum = 0.0, ent_sum = 0.0;

  for (std::size_t i = 0; i < n; ++i) {
    const DecisionStep& d = ro.steps[i];
    const double adv = batch.advantage[i];
    sampled_vector(net, d, z);
    net.eval_dist(theta, d.anchor_state_normalized, ev);
    const double lp = net.log_prob_from(ev, z);
    pg_sum += -lp * adv;
    net.log_prob_backward(theta, ev, z, -adv / m, grad);

    const double v = net.value(theta, d.anchor_state_normalized, &vcache);
    const double verr = v - batch.return_target[i];
    v_sum += verr * verr;
    net.value_backward(theta, vcache, cfg.value_coef * 2.0 * verr / m, grad);

    ent_sum += net.entropy(ev);
    if (cfg.entropy_coef != 0.0) net.entropy_backward(theta, ev, -cfg.entropy_coef / m, grad);
  }
  if (!std::isfinite(pg_sum) || !std::isfinite(v_sum))
    throw NumericalError("a2c_update: non-finite loss");
  adam.step(theta, grad);
  net.clamp_log_std(theta);
  check_finite_params(theta, "a2c_update");

  st.policy_loss = pg_sum / m;
  st.value_loss = v_sum / m;
  st.entropy = ent_sum / m;
  st.minibatch_passes = 1;
  return st;
}

/// Discounted return of a complete episode with variable-duration decisions:
/// sum of aggregated rewards weighted by the running product of carries.
inline double duration_discounted_return(std::span<const DecisionStep> traj) {
  double ret = 0.0, disc = 1.0;
  for (const DecisionStep& d : traj) {
    ret += disc * d.aggregated_reward;
    disc *= d.carry_discount;
  }
  return ret;
}

/// Plain score-function estimator for one trajectory:
/// G(tau) = (sum_i grad log pi(z_i|s_i)) * R(tau). No baseline, no
/// reward-to-go, no standardization; this is the object whose variance the
/// probe measures.
inline std::vector<double> vpg_trajectory_gradient(const GaussianPolicyNet& net,
                                                   std::span<const double> theta,
                                                   std::span<const DecisionStep> traj) {
  if (traj.empty()) throw std::invalid_argument("vpg_trajectory_gradient: empty trajectory");
  const double ret = duration_discounted_return(traj);
  std::vector<double> g(net.param_count(), 0.0);
  PolicyEval ev;
  std::vector<double> z;
  for (const DecisionStep& d : traj) {
    sampled_vector(net, d, z);
    net.eval_dist(theta, d.anchor_state_normalized, ev);
    net.log_prob_backward(theta, ev, z, ret, g);
  }
  return g;
}

struct VpgGradient {
  std::vector<double> mean_gradient;                 // ascent direction
  std::vector<std::vector<double>> per_trajectory;   // retained for the variance probe
  std::vector<double> trajectory_returns;
};

inline VpgGradient vpg_gradient(const GaussianPolicyNet& net, std::span<const double> theta,
                                const std::vector<std::vector<DecisionStep>>& trajs) {
  if (trajs.empty()) throw std::invalid_argument("vpg_gradient: no trajectories");
  VpgGradient out;
  out.mean_gradient.assign(net.param_count(), 0.0);
  out.per_trajectory.reserve(trajs.size());
  out.trajectory_returns.reserve(trajs.size());
  for (const auto& traj : trajs) {
    out.per_trajectory.push_back(vpg_trajectory_gradient(net, theta, traj));
    out.trajectory_returns.push_back(duration_discounted_return(traj));
    const auto& g = out.per_trajectory.back();
    for (std::size_t k = 0; k < g.size(); ++k) out.mean_gradient[k] += g[k];
  }
  const double inv = 1.0 / double(trajs.size());
  for (double& x : out.mean_gradient) x *= inv;
  return out;
}

inline UpdateStats vpg_update(const GaussianPolicyNet& net, std::span<double> theta, Adam& adam,
                              const std::vector<std::vector<DecisionStep>>& trajs) {
  VpgGradient g = vpg_gradient(net, theta, trajs);
  for (double x : g.mean_gradient)
    if (!std::isfinite(x)) throw NumericalError("vpg_update: non-finite gradient");
  std::vector<double> grad(g.mean_gradient.size());
  for (std::size_t k = 0; k < grad.size(); ++k) grad[k] = -g.mean_gradient[k];
  adam.step(theta, grad);
  net.clamp_log_std(theta);
  check_finite_params(theta, "vpg_update");

  UpdateStats st;
  double ret = 0.0;
  for (double r : g.trajectory_returns) ret += r;
  st.policy_loss = -ret / double(trajs.size());
  st.minibatch_passes = 1;
  return st;
}

}  // namespace sarlab
