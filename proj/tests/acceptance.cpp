// Acceptance gate. Runs the numbered checks (all ten by default) and prints
// exactly one line per check:   criterion N: PASS|FAIL - detail
// Exit code 0 iff every requested check passed. Usage: acceptance [N...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sarlab/config.hpp"
#include "sarlab/csv.hpp"
#include "sarlab/envs.hpp"
#include "sarlab/harness.hpp"
#include "sarlab/macroact.hpp"
#include "sarlab/pg.hpp"
#include "sarlab/rng.hpp"
#include "sarlab/timegrid.hpp"
#include "sarlab/tinynn.hpp"
#include "sarlab/varprobe.hpp"

namespace fs = std::filesystem;
using namespace sarlab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double ci95_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / double(v.size() - 1));
  return 1.96 * sd / std::sqrt(double(v.size()));
}

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("sarlab_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

ExperimentConfig cfg_from_text(const std::string& text) {
  return config_from_flat(parse_flat_text(text));
}

// --------------------------------------------------------------------------
// 1. Exact-variance fixtures: the region-stopped script lands on 2, the
//    duration-committed script on 1/x. Seeds pinned for a deterministic gate.

Outcome criterion1() {
  const double sar = prop2_fixture_trace(ControllerKind::SAR, 1e-3, 0.01, 20000, 905);
  const double fig = prop2_fixture_trace(ControllerKind::FiGARC, 1e-3, 0.01, 20000, 904);
  const bool ok = std::abs(sar - 2.0) <= 0.15 && fig >= 100.0;
  return {ok, fmt("region-stop trace %.4f (want 2.00 +- 0.15), duration trace %.2f (want >= 100)",
                  sar, fig)};
}

// --------------------------------------------------------------------------
// 2. Variance vs step size on the noisy pendulum: per-step control should
//    scale like 1/delta (log-log slope near -1); region-stopped repetition at
//    the finest grid point should cut the trace by at least 10x.

Outcome criterion2() {
  // The pinned grid spans 8x, below the decade delta_scaling_sweep requires,
  // so this check runs the sweep's own per-point protocol (identical seed
  // streams, estimator and slope fit) directly on the requested grid.
  const std::vector<double> grid{4e-2, 2e-2, 1e-2, 5e-3};
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4};
  const int n_traj = 200, burn_in = 10;
  const auto factory = [](double delta, std::uint64_t seed) {
    return make_env("pendulum+ext_force", delta, seed, nlohmann::json::object());
  };

  const auto point_trace = [&](const GaussianPolicyNet& net, const RepetitionController& ctrl,
                               double delta, std::uint64_t seed) {
    std::vector<double> theta(net.param_count());
    Rng init(mix_seed(seed, 0x9010), 1);
    net.init_params(theta, init);
    auto env = factory(delta, seed);
    Rng rng(mix_seed(seed, std::bit_cast<std::uint64_t>(delta)), 2);
    return estimate_pg_variance(net, theta, *env, ctrl, n_traj, burn_in, rng).trace();
  };

  GaussianPolicyNet per_step_net(4, 1, 0, 32);
  RepetitionController none;
  std::vector<double> log_d, log_t;
  double none_finest = 0.0;
  for (double delta : grid) {
    double sum = 0.0;
    for (std::uint64_t seed : seeds) {
      const double tr = point_trace(per_step_net, none, delta, seed);
      sum += tr;
      if (tr > 0.0) {
        log_d.push_back(std::log(delta));
        log_t.push_back(std::log(tr));
      }
    }
    if (delta == grid.back()) none_finest = sum / double(seeds.size());
  }
  const double slope = least_squares_slope(log_d, log_t);

  GaussianPolicyNet sar_net(4, 1, 1, 32);
  RepetitionController sar;
  sar.kind = ControllerKind::SAR;
  sar.d_max = 0.5;
  double sar_sum = 0.0;
  for (std::uint64_t seed : seeds) sar_sum += point_trace(sar_net, sar, grid.back(), seed);
  const double sar_finest = sar_sum / double(seeds.size());

  const bool slope_ok = slope >= -1.3 && slope <= -0.7;
  const bool ratio_ok = sar_finest * 10.0 <= none_finest;
  return {slope_ok && ratio_ok,
          fmt("slope %.3f (want [-1.3,-0.7]); finest-delta trace %.1f per-step vs %.1f "
              "region-stopped (want >= 10x)",
              slope, none_finest, sar_finest)};
}

// --------------------------------------------------------------------------
// 3. Random-walk exploration probability: empirical rate at N = 4, exact
//    oracle against an independent binomial enumeration, and monotonicity
//    across N in {2, 4, 16, 64}.

double binomial_tail_success(int n) {
  // P(X <= n/4) + P(X >= 3n/4), X ~ Binomial(n, 1/2), exact integer Pascal row.
  std::vector<unsigned long long> row{1};
  for (int i = 1; i <= n; ++i) {
    std::vector<unsigned long long> next(std::size_t(i) + 1, 1);
    for (int j = 1; j < i; ++j) next[std::size_t(j)] = row[std::size_t(j) - 1] + row[std::size_t(j)];
    row = std::move(next);
  }
  const double four = double(n) / 4.0, three_four = 3.0 * double(n) / 4.0;
  double hits = 0.0;
  for (int x = 0; x <= n; ++x)
    if (double(x) <= four || double(x) >= three_four) hits += double(row[std::size_t(x)]);
  return hits / std::ldexp(1.0, n);
}

Outcome criterion3() {
  const int episodes = 100000;
  RandomWalkEnv env(4, 11);
  Rng coin(2026, 1);
  double successes = 0.0;
  for (int e = 0; e < episodes; ++e) {
    env.reset();
    while (!env.done()) {
      const double a = coin.below(2) ? 1.0 : -1.0;
      successes += env.step(std::vector<double>{a}).reward;
    }
  }
  const double rate = successes / double(episodes);
  const bool rate_ok = std::abs(rate - 0.625) <= 0.02;

  const int ns[] = {2, 4, 16, 64};
  double p[4];
  bool exact_ok = true;
  for (int i = 0; i < 4; ++i) {
    p[i] = random_walk_success_probability(ns[i]);
    const double indep = binomial_tail_success(ns[i]);
    if (std::abs(p[i] - indep) > 1e-15 * std::max(1.0, std::abs(indep))) exact_ok = false;
  }
  bool monotone = true;
  for (int i = 0; i + 1 < 4; ++i)
    if (!(p[i] > p[i + 1])) monotone = false;

  return {rate_ok && exact_ok && monotone,
          fmt("empirical %.4f (want 0.625 +- 0.02); oracle {%.17g, %.17g, %.17g, %.17g} "
              "enumeration-exact=%s monotone=%s",
              rate, p[0], p[1], p[2], p[3], exact_ok ? "yes" : "no", monotone ? "yes" : "no")};
}

// --------------------------------------------------------------------------
// 4. With the pass-through controller the macro collector must reduce to the
//    plain per-step path bit for bit: same trajectories, same losses, same
//    parameters after every update.

Outcome criterion4() {
  auto macro_env = make_env("pendulum", 0.04, 21, nlohmann::json::object());
  auto plain_env = make_env("pendulum", 0.04, 21, nlohmann::json::object());
  GaussianPolicyNet net(4, 1, 0, 32);
  std::vector<double> theta_a(net.param_count()), theta_b(net.param_count());
  {
    Rng ia(77, 3), ib(77, 3);
    net.init_params(theta_a, ia);
    net.init_params(theta_b, ib);
  }
  RepetitionController none;
  RolloutCollector macro(*macro_env, net, none);
  VanillaCollector plain(*plain_env, net);
  Adam adam_a(net.param_count(), 3e-4), adam_b(net.param_count(), 3e-4);
  Rng ra(501, 4), rb(501, 4), ua(502, 5), ub(502, 5);
  PpoConfig pc;

  const int updates = 10, batch = 256;
  for (int u = 0; u < updates; ++u) {
    const Rollout ro_a = macro.collect(theta_a, batch, ra);
    const Rollout ro_b = plain.collect(theta_b, batch, rb);
    if (ro_a.steps.size() != ro_b.steps.size())
      return {false, fmt("update %d: decision counts diverge", u + 1)};
    for (std::size_t i = 0; i < ro_a.steps.size(); ++i) {
      const DecisionStep &a = ro_a.steps[i], &b = ro_b.steps[i];
      if (a.action != b.action || a.log_prob != b.log_prob || a.value != b.value ||
          a.aggregated_reward != b.aggregated_reward ||
          ro_a.train_reward[i] != ro_b.train_reward[i] || ro_a.next_value[i] != ro_b.next_value[i])
        return {false, fmt("update %d: trajectories diverge at decision %zu", u + 1, i)};
    }
    const UpdateStats sa = ppo_update(net, theta_a, adam_a, ro_a, compute_gae(ro_a, 0.95), pc, ua);
    const UpdateStats sb = ppo_update(net, theta_b, adam_b, ro_b, compute_gae(ro_b, 0.95), pc, ub);
    if (sa.policy_loss != sb.policy_loss || sa.value_loss != sb.value_loss ||
        sa.entropy != sb.entropy || sa.approx_kl != sb.approx_kl ||
        sa.clip_fraction != sb.clip_fraction)
      return {false, fmt("update %d: losses diverge", u + 1)};
    if (std::memcmp(theta_a.data(), theta_b.data(), theta_a.size() * sizeof(double)) != 0)
      return {false, fmt("update %d: parameters diverge", u + 1)};
  }
  return {true, fmt("%d updates, %d decisions each: trajectories, losses and parameters "
                    "bit-identical",
                    updates, batch)};
}

// --------------------------------------------------------------------------
// 5. Discount algebra: macro-action reward aggregation against brute-force
//    per-step discounting, and duration-aware GAE against a brute-force
//    discounted-return oracle.

ContinuousMDP scripted_mdp(std::vector<double> rates, double gamma, double delta) {
  ContinuousMDP m;
  m.state_dim = 1;
  m.action_dim = 1;
  m.action_low = {-1.0};
  m.action_high = {1.0};
  m.horizon = double(rates.size()) * delta;
  m.dynamics = [](std::span<const double>, std::span<const double>, std::span<const double>,
                  std::span<double> ds) { ds[0] = 1.0; };
  m.reward_rate = [rates = std::move(rates), delta](std::span<const double> s,
                                                    std::span<const double>) {
    const auto k = std::size_t(std::llround(s[0] / delta));
    return rates[std::min(k, rates.size() - 1)];
  };
  m.initial_state = [](Rng&, std::span<double> s0) { s0[0] = 0.0; };
  m.gamma0 = gamma;
  m.delta0 = delta;
  return m;
}

Outcome criterion5() {
  const double delta = 0.01;
  const double gammas[] = {1.0, 0.99, 0.9};
  const Normalizer unit = Normalizer(1).snapshot();
  Rng rng(888, 2);
  double max_err = 0.0;
  long macros = 0;
  for (int t = 0; t < 1000; ++t) {
    const double gamma = gammas[t % 3];
    const std::size_t len = 60 + rng.below(96);
    std::vector<double> rates(len);
    for (double& r : rates) r = rng.uniform(-2.0, 2.0);
    auto env = discretize(scripted_mdp(rates, gamma, delta), delta, std::uint64_t(t));
    std::vector<double> obs = env->reset();
    std::size_t pos = 0;
    RepetitionController fixed;
    fixed.kind = ControllerKind::Fixed;
    for (bool done = false; !done;) {
      fixed.fixed_n = 1 + long(rng.below(50));
      const DecisionStep dec =
          execute_macro_action(*env, obs, std::vector<double>{0.3}, 0.0, fixed, unit);
      double agg = 0.0, raw = 0.0, disc = 1.0;
      for (long j = 0; j < dec.held_micro_steps; ++j) {
        agg += disc * rates[pos + std::size_t(j)] * delta;
        raw += rates[pos + std::size_t(j)] * delta;
        disc *= gamma;
      }
      max_err = std::max({max_err, std::abs(dec.aggregated_reward - agg),
                          std::abs(dec.raw_reward_sum - raw), std::abs(dec.carry_discount - disc)});
      pos += std::size_t(dec.held_micro_steps);
      obs = dec.next_obs;
      done = dec.done;
      ++macros;
    }
  }
  const bool agg_ok = max_err <= 1e-12;

  // Hand rollout: two episodes with mixed hold lengths, a terminal end and a
  // truncated end. At lambda = 1 the advantage must equal the brute-force
  // discounted return (carry discounts included) minus the value baseline;
  // at lambda = 0 it must equal the one-step temporal difference.
  Rollout ro;
  const double carries[] = {0.9, 0.729, 0.81, 0.95, 0.857375};
  const double rewards[] = {1.0, -0.5, 2.0, 0.3, -1.2};
  const double values[] = {0.5, -0.2, 0.3, 0.8, 0.1};
  const double nexts[] = {-0.2, 0.3, 0.0, 0.1, 0.6};  // terminal at 2, truncated bootstrap at 4
  for (int i = 0; i < 5; ++i) {
    DecisionStep d;
    d.carry_discount = carries[i];
    d.value = values[i];
    d.done = i == 2 || i == 4;
    d.truncated = i == 4;
    ro.steps.push_back(d);
    ro.train_reward.push_back(rewards[i]);
    ro.next_value.push_back(nexts[i]);
  }
  ro.episode_ends = {2, 4};

  double gae_err = 0.0;
  const AdvantageBatch full = compute_gae(ro, 1.0);
  std::size_t start = 0;
  for (std::size_t end : ro.episode_ends) {
    for (std::size_t i = start; i <= end; ++i) {
      double ret = 0.0, disc = 1.0;
      for (std::size_t j = i; j <= end; ++j) {
        ret += disc * ro.train_reward[j];
        disc *= ro.steps[j].carry_discount;
      }
      ret += disc * ro.next_value[end];
      gae_err = std::max(gae_err, std::abs(full.advantage[i] - (ret - ro.steps[i].value)));
    }
    start = end + 1;
  }
  const AdvantageBatch td = compute_gae(ro, 0.0);
  for (std::size_t i = 0; i < ro.steps.size(); ++i) {
    const double one_step =
        ro.train_reward[i] + ro.steps[i].carry_discount * ro.next_value[i] - ro.steps[i].value;
    gae_err = std::max(gae_err, std::abs(td.advantage[i] - one_step));
  }
  const bool gae_ok = gae_err <= 1e-10;

  return {agg_ok && gae_ok,
          fmt("aggregation max |err| %.2e over %ld holds (want <= 1e-12); advantage oracle "
              "max |err| %.2e (want <= 1e-10)",
              max_err, macros, gae_err)};
}

// --------------------------------------------------------------------------
// 6. Analytic gradients against central finite differences through the policy
//    MLP, the Gaussian log-density and the value head.

Outcome criterion6() {
  Rng rng(4242, 9);
  double max_rel = 0.0;
  for (int inst = 0; inst < 100;) {
    const int obs_dim = 2 + int(rng.below(4));
    const int act_dim = 1 + int(rng.below(3));
    const int aux_dim = int(rng.below(2));
    const int hidden = 4 + int(rng.below(5));
    GaussianPolicyNet net(obs_dim, act_dim, aux_dim, hidden);
    std::vector<double> theta(net.param_count());
    net.init_params(theta, rng);
    for (double& p : theta) p += 0.2 * rng.normal();

    std::vector<double> obs(static_cast<std::size_t>(obs_dim), 0.0);
    for (double& x : obs) x = rng.normal();

    PolicyEval ev;
    net.eval_dist(theta, obs, ev);
    MlpCache vcache;
    const double v0 = net.value(theta, obs, &vcache);
    (void)v0;

    // Skip draws that land a pre-activation on a ReLU kink (or an aux head on
    // its clamp): the finite difference would straddle a subgradient.
    bool near_kink = false;
    const auto scan = [&near_kink](const MlpCache& c) {
      for (std::size_t l = 0; l + 1 < c.z.size(); ++l)
        for (double z : c.z[l])
          if (std::abs(z) < 1e-3) near_kink = true;
    };
    scan(ev.mlp);
    scan(vcache);
    for (int j = 0; j < aux_dim; ++j)
      if (ev.out[std::size_t(net.sample_dim() + j)] < -9.0) near_kink = true;
    if (near_kink) continue;

    std::vector<double> action(std::size_t(net.sample_dim()));
    for (std::size_t k = 0; k < action.size(); ++k)
      action[k] = ev.mu[k] + ev.sigma[k] * rng.normal();

    std::vector<double> grad(theta.size(), 0.0);
    net.log_prob_backward(theta, ev, action, 1.0, grad);
    net.value_backward(theta, vcache, 1.0, grad);

    std::vector<double> probe = theta;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(theta[k]));
      probe[k] = theta[k] + h;
      const double up = net.log_prob(probe, obs, action) + net.value(probe, obs);
      probe[k] = theta[k] - h;
      const double dn = net.log_prob(probe, obs, action) + net.value(probe, obs);
      probe[k] = theta[k];
      const double fd = (up - dn) / (2.0 * h);
      const double rel = std::abs(grad[k] - fd) / std::max(1.0, std::abs(grad[k]) + std::abs(fd));
      max_rel = std::max(max_rel, rel);
    }
    ++inst;
  }
  return {max_rel < 1e-4, fmt("max relative error %.3e over 100 nets (want < 1e-4)", max_rel)};
}

// --------------------------------------------------------------------------
// 7-9. Desk-scale training comparisons. Shared runner: train with a config
//      text, return the per-seed final evaluation means.

std::vector<double> train_finals(const std::string& text, const fs::path& out) {
  ExperimentConfig cfg = cfg_from_text(text);
  cfg.out_dir = out.string();
  return run_experiment(cfg).final_returns;
}

const char* const kEightSeeds = "seeds = 1 2 3 4 5 6 7 8\n";

Outcome criterion7() {
  const fs::path out = scratch_dir("c7");
  const std::string base =
      "env = pendulum\n"
      "algo = ppo\n"
      "lr = 3e-4\n"
      "hidden = 64\n"
      "rollout.decisions = 2048\n"
      "budget.decisions = 40960\n"
      "eval.every = 40960\n"
      "eval.episodes = 10\n" +
      std::string(kEightSeeds);
  const std::string sar =
      "collector = macro\ncontroller = sar\ncontroller.d_max = 0.5\n";
  const std::string plain = "collector = vanilla\n";

  const auto sc = train_finals(base + sar + "run_id = sar_coarse\ndelta = 0.04\n", out);
  const auto sf = train_finals(base + sar + "run_id = sar_fine\ndelta = 0.0025\n", out);
  const auto vc = train_finals(base + plain + "run_id = plain_coarse\ndelta = 0.04\n", out);
  const auto vf = train_finals(base + plain + "run_id = plain_fine\ndelta = 0.0025\n", out);

  std::vector<double> r_sar, r_plain;
  for (std::size_t i = 0; i < sc.size(); ++i) r_sar.push_back(sf[i] / sc[i]);
  for (std::size_t i = 0; i < vc.size(); ++i) r_plain.push_back(vf[i] / vc[i]);
  const double ms = mean_of(r_sar), hs = ci95_of(r_sar);
  const double mp = mean_of(r_plain), hp = ci95_of(r_plain);

  const bool sar_ok = mean_of(sf) >= 0.9 * mean_of(sc);
  const bool plain_ok = mean_of(vf) <= 0.5 * mean_of(vc);
  const bool disjoint = ms - hs > mp + hp;
  return {sar_ok && plain_ok && disjoint,
          fmt("16x finer step: region-stopped keeps %.2f of its return (want >= 0.9), per-step "
              "keeps %.2f (want <= 0.5); ratio CIs %.2f+-%.2f vs %.2f+-%.2f %s",
              mean_of(sf) / mean_of(sc), mean_of(vf) / mean_of(vc), ms, hs, mp, hp,
              disjoint ? "disjoint" : "overlap")};
}

Outcome criterion8() {
  const fs::path out = scratch_dir("c8");
  const std::string base =
      "env = pendulum+ext_force\n"
      "algo = ppo\n"
      "lr = 3e-4\n"
      "hidden = 64\n"
      "rollout.decisions = 2048\n"
      "budget.decisions = 40960\n"
      "eval.every = 40960\n"
      "eval.episodes = 10\n"
      "delta = 0.005\n"
      "collector = macro\n" +
      std::string(kEightSeeds);
  const auto sar = train_finals(
      base + "run_id = sar\ncontroller = sar\ncontroller.d_max = 0.5\n", out);
  const auto fig = train_finals(
      base + "run_id = figar\ncontroller = figar\ncontroller.t_max = 0.05\n", out);
  const double ms = mean_of(sar), hs = ci95_of(sar);
  const double mf = mean_of(fig), hf = ci95_of(fig);
  const bool ok = ms - hs > mf + hf;
  return {ok, fmt("final return %.2f+-%.2f region-stopped vs %.2f+-%.2f duration-committed (%s)",
                  ms, hs, mf, hf, ok ? "disjoint" : "overlap")};
}

Outcome criterion9() {
  const fs::path out = scratch_dir("c9");
  const std::string base =
      "env = pendulum+percept_force+hold_penalty\n"
      "env.t_thres = 0.04\n"
      "env.r_penalty = -1\n"
      "algo = ppo\n"
      "lr = 3e-4\n"
      "hidden = 64\n"
      "rollout.decisions = 2048\n"
      "budget.decisions = 40960\n"
      "eval.every = 40960\n"
      "eval.episodes = 10\n"
      "delta = 0.005\n"
      "collector = macro\n"
      "controller.d_max = 0.5\n" +
      std::string(kEightSeeds);
  const auto blend = train_finals(
      base + "run_id = blend\ncontroller = lambda_sar\ncontroller.lambda = 0.5\n", out);
  const auto sar = train_finals(base + "run_id = sar\ncontroller = sar\n", out);
  const double mb = mean_of(blend), ms = mean_of(sar);
  return {mb >= ms, fmt("mean final return %.2f time-blended vs %.2f distance-only (want >=)",
                        mb, ms)};
}

// --------------------------------------------------------------------------
// 10. Reruns with identical seeds must reproduce the logs byte for byte,
//     wallclock aside: the criterion-4 training command and the criterion-1
//     fixture estimates, each run twice.

std::string strip_last_column(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t comma = line.rfind(',');
    out << (comma == std::string::npos ? line : line.substr(0, comma)) << '\n';
  }
  return out.str();
}

Outcome criterion10() {
  const fs::path out = scratch_dir("c10");
  const std::string train_text =
      "run_id = repro\n"
      "env = pendulum\n"
      "algo = ppo\n"
      "collector = vanilla\n"
      "delta = 0.04\n"
      "lr = 3e-4\n"
      "hidden = 32\n"
      "rollout.decisions = 256\n"
      "budget.decisions = 2560\n"
      "eval.episodes = 4\n"
      "seeds = 1 2\n";
  ExperimentConfig cfg = cfg_from_text(train_text);
  cfg.out_dir = (out / "a").string();
  const RunSummary first = run_experiment(cfg);
  cfg.out_dir = (out / "b").string();
  const RunSummary second = run_experiment(cfg);
  const bool train_ok =
      csv_equal_ignoring(first.csv_path, second.csv_path, {"wallclock_s"}) &&
      strip_last_column(slurp(first.csv_path)) == strip_last_column(slurp(second.csv_path));

  const auto fixture_csv = [&](const fs::path& path) {
    std::ofstream f(path, std::ios::binary);
    f << "kind,trace\n";
    f << "region," << format_double(prop2_fixture_trace(ControllerKind::SAR, 1e-3, 0.01,
                                                        20000, 905))
      << "\n";
    f << "duration," << format_double(prop2_fixture_trace(ControllerKind::FiGARC, 1e-3, 0.01,
                                                          20000, 904))
      << "\n";
  };
  fixture_csv(out / "fix_a.csv");
  fixture_csv(out / "fix_b.csv");
  const bool fixture_ok =
      !slurp(out / "fix_a.csv").empty() && slurp(out / "fix_a.csv") == slurp(out / "fix_b.csv");

  return {train_ok && fixture_ok,
          fmt("training log rerun %s (wallclock excluded); fixture estimates rerun %s",
              train_ok ? "identical" : "differs", fixture_ok ? "byte-identical" : "differs")};
}

Outcome run_criterion(int n) {
  switch (n) {
    case 1: return criterion1();
    case 2: return criterion2();
    case 3: return criterion3();
    case 4: return criterion4();
    case 5: return criterion5();
    case 6: return criterion6();
    case 7: return criterion7();
    case 8: return criterion8();
    case 9: return criterion9();
    case 10: return criterion10();
    default: return {false, "unknown criterion"};
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) {
    char* end = nullptr;
    const long n = std::strtol(argv[i], &end, 10);
    if (end == argv[i] || *end != '\0' || n < 1 || n > 10) {
      std::fprintf(stderr, "usage: %s [criterion numbers 1-10]\n", argv[0]);
      return 2;
    }
    wanted.push_back(int(n));
  }
  if (wanted.empty())
    for (int n = 1; n <= 10; ++n) wanted.push_back(n);

  bool all_pass = true;
  for (int n : wanted) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run_criterion(n);
    } catch (const std::exception& e) {
      o = {false, fmt("exception: %s", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d: %s - %s [%.1fs]\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                secs);
    std::fflush(stdout);
    all_pass = all_pass && o.pass;
  }
  return all_pass ? 0 : 1;
}
