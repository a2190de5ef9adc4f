#pragma once

// Experiment orchestration: seeded training runs with periodic deterministic
// evaluation and append-only CSV logs, delta sweeps with comparison plots,
// safe-region trace export, and chart rendering from logged CSVs.

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sarlab/config.hpp"
#include "sarlab/csv.hpp"
#include "sarlab/envs.hpp"
#include "sarlab/pg.hpp"
#include "sarlab/svg.hpp"
#include "sarlab/varprobe.hpp"

namespace sarlab {

inline const char* stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::RegionExit: return "region_exit";
    case StopReason::TimeCap: return "time_cap";
    case StopReason::EpisodeEnd: return "episode_end";
    case StopReason::Forced: return "forced";
  }
  return "forced";
}

inline double ci95_half_width(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= double(n);
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return 1.96 * std::sqrt(ss / double(n - 1)) / std::sqrt(double(n));
}

inline std::string short_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << content;
}

// ---------------------------------------------------------------------------
// Evaluation: Gaussian mean policy, controller active, own env instance and
// frozen normalizer snapshot so training streams stay untouched.

struct EvalResult {
  double mean = 0.0;
  double ci95_half = 0.0;
  double mean_hold_s = 0.0;
  std::vector<double> episode_returns;
};

inline EvalResult evaluate_policy(const GaussianPolicyNet& net, std::span<const double> theta,
                                  Env& env, const RepetitionController& ctrl,
                                  const Normalizer& frozen, int episodes) {
  if (episodes < 1) throw std::invalid_argument("evaluate_policy: episodes must be positive");
  EvalResult out;
  std::vector<double> obs_n(std::size_t(env.obs_dim()));
  std::vector<double> mu(std::size_t(net.sample_dim()));
  double hold_sum = 0.0;
  long holds = 0;
  for (int e = 0; e < episodes; ++e) {
    std::vector<double> obs = env.reset();
    double ret = 0.0;
    while (!env.done()) {
      frozen.normalize(obs, obs_n);
      net.mean_action(theta, obs_n, mu);
      const double aux =
          net.aux_dim() > 0 ? map_aux_head(mu[std::size_t(net.act_dim())], ctrl) : 0.0;
      DecisionStep dec = execute_macro_action(
          env, obs, std::span<const double>(mu.data(), std::size_t(net.act_dim())), aux, ctrl,
          frozen);
      ret += dec.raw_reward_sum;
      hold_sum += dec.duration;
      ++holds;
      obs = std::move(dec.next_obs);
    }
    out.episode_returns.push_back(ret);
  }
  for (double r : out.episode_returns) out.mean += r;
  out.mean /= double(out.episode_returns.size());
  out.ci95_half = ci95_half_width(out.episode_returns);
  out.mean_hold_s = holds > 0 ? hold_sum / double(holds) : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Training.

struct RunSummary {
  std::string csv_path;
  std::vector<std::string> checkpoint_paths;  // one per seed
  std::vector<double> final_returns;          // per-seed final evaluation means
  double final_mean = 0.0;
  double final_ci95_half = 0.0;
};

namespace harnessdetail {

inline nlohmann::json resolved_env_params(const ExperimentConfig& cfg) {
  nlohmann::json p = cfg.env_params;
  if (cfg.gamma0 > 0.0 && !p.contains("gamma0")) p["gamma0"] = cfg.gamma0;
  if (cfg.delta0 > 0.0 && !p.contains("delta0")) p["delta0"] = cfg.delta0;
  if (cfg.horizon > 0 && !p.contains("base_steps")) p["base_steps"] = cfg.horizon;
  return p;
}

inline CheckpointData make_checkpoint(const GaussianPolicyNet& net, std::span<const double> theta,
                                      const Normalizer& norm) {
  CheckpointData ck;
  ck.shapes = {net.policy_mlp().widths(), net.value_mlp().widths()};
  ck.act_dim = net.act_dim();
  ck.aux_dim = net.aux_dim();
  ck.params.assign(theta.begin(), theta.end());
  ck.norm = norm;
  return ck;
}

}  // namespace harnessdetail

inline GaussianPolicyNet net_from_checkpoint(const CheckpointData& ck) {
  if (ck.shapes.size() != 2 || ck.shapes[0].size() != 4 || ck.shapes[0][1] != ck.shapes[0][2])
    throw std::runtime_error("checkpoint: unexpected network shape");
  GaussianPolicyNet net(ck.shapes[0][0], ck.act_dim, ck.aux_dim, ck.shapes[0][1]);
  if (net.param_count() != ck.params.size())
    throw std::runtime_error("checkpoint: parameter count mismatch");
  return net;
}

/// One training run per seed with periodic evaluation rows appended to
/// out/<run_id>.csv and a final checkpoint per seed. Fails fast on numerical
/// errors; rows written so far stay on disk.
inline RunSummary run_experiment(const ExperimentConfig& cfg) {
  if (!(cfg.delta > 0.0)) throw ConfigError("run_experiment: config has no delta");
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  RunSummary summary;
  summary.csv_path = cfg.out_dir + "/" + cfg.run_id + ".csv";
  const nlohmann::json env_params = harnessdetail::resolved_env_params(cfg);
  try {
    make_env(cfg.env_id, cfg.delta, 0, env_params);  // ids and params must resolve
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const std::domain_error& e) {
    throw ConfigError(e.what());
  }
  RunLogWriter log(summary.csv_path);
  const auto t0 = std::chrono::steady_clock::now();
  auto wallclock = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  for (std::uint64_t seed : cfg.seeds) {
    std::unique_ptr<Env> env = make_env(cfg.env_id, cfg.delta, mix_seed(seed, 0x3a91), env_params);
    const int aux = cfg.ctrl.aux_dim();
    GaussianPolicyNet net(env->obs_dim(), env->action_dim(), aux, cfg.hidden);
    std::vector<double> theta(net.param_count());
    Rng init_rng(mix_seed(seed, 0x0e17), 3);
    net.init_params(theta, init_rng);

    const double lr =
        cfg.lr_scaling == "delta" ? scaled_lr(cfg.lr, cfg.delta, cfg.delta0) : cfg.lr;
    Adam adam(net.param_count(), lr);
    Rng rng(mix_seed(seed, 0x5eed), 4);

    std::unique_ptr<RolloutCollector> mcol;
    std::unique_ptr<VanillaCollector> vcol;
    if (cfg.collector == "vanilla")
      vcol = std::make_unique<VanillaCollector>(*env, net, cfg.reward_norm);
    else
      mcol = std::make_unique<RolloutCollector>(*env, net, cfg.ctrl, cfg.reward_norm);
    const Normalizer& live_norm = mcol ? mcol->obs_normalizer() : vcol->obs_normalizer();

    long long decisions = 0, micro = 0;
    double phys = 0.0;
    EvalResult last_eval;
    auto do_eval = [&] {
      std::unique_ptr<Env> eval_env =
          make_env(cfg.env_id, cfg.delta, mix_seed(seed, 0xe7a1), env_params);
      const Normalizer snap = live_norm.snapshot();
      last_eval = evaluate_policy(net, theta, *eval_env, cfg.ctrl, snap, cfg.eval_episodes);
      RunLogRow row;
      row.run_id = cfg.run_id;
      row.seed = seed;
      row.delta = cfg.delta;
      row.algo = cfg.algo;
      row.controller = controller_name(cfg.ctrl.kind);
      row.decision_steps = decisions;
      row.micro_steps = micro;
      row.physical_time_s = phys;
      row.episode_return_mean = last_eval.mean;
      row.episode_return_ci95_half = last_eval.ci95_half;
      row.mean_hold_duration_s = last_eval.mean_hold_s;
      row.wallclock_s = wallclock();
      log.write(row);
    };

    do_eval();  // decision step 0, always logged
    long long last_eval_at = 0;
    while (decisions < cfg.budget_decisions &&
           (cfg.budget_physical_s < 0.0 || phys < cfg.budget_physical_s)) {
      if (cfg.algo == "vpg") {
        if (cfg.lr_anneal)
          adam.lr = lr * (1.0 - double(decisions) / double(cfg.budget_decisions));
        std::vector<std::vector<DecisionStep>> trajs;
        long long batch = 0;
        while (batch < cfg.rollout_decisions) {
          trajs.push_back(mcol->collect_episode(theta, rng));
          const auto& tr = trajs.back();
          batch += (long long)(tr.size());
          for (const DecisionStep& d : tr) {
            micro += d.held_micro_steps;
            phys += d.duration;
          }
        }
        vpg_update(net, theta, adam, trajs);
        decisions += batch;
      } else {
        if (cfg.lr_anneal)
          adam.lr = lr * (1.0 - double(decisions) / double(cfg.budget_decisions));
        const int n = int(cfg.rollout_decisions);
        Rollout ro = mcol ? mcol->collect(theta, n, rng) : vcol->collect(theta, n, rng);
        AdvantageBatch batch = compute_gae(ro, cfg.gae_lambda);
        if (cfg.algo == "ppo") {
          PpoConfig pc;
          pc.clip = cfg.ppo_clip;
          pc.epochs = cfg.ppo_epochs;
          pc.minibatch = cfg.ppo_minibatch;
          pc.value_coef = cfg.value_coef;
          pc.entropy_coef = cfg.entropy_coef;
          ppo_update(net, theta, adam, ro, std::move(batch), pc, rng);
        } else {
          A2cConfig ac;
          ac.value_coef = cfg.value_coef;
          ac.entropy_coef = cfg.entropy_coef;
          a2c_update(net, theta, adam, ro, std::move(batch), ac);
        }
        decisions += (long long)(ro.steps.size());
        micro += ro.total_micro_steps;
        phys += ro.total_physical_time;
      }
      if (decisions - last_eval_at >= cfg.eval_every) {
        do_eval();
        last_eval_at = decisions;
      }
    }
    if (last_eval_at != decisions) do_eval();

    const std::string ckpt = cfg.out_dir + "/" + cfg.run_id + "_seed" + std::to_string(seed) + ".ckpt";
    save_checkpoint(ckpt, harnessdetail::make_checkpoint(net, theta, live_norm));
    summary.checkpoint_paths.push_back(ckpt);
    summary.final_returns.push_back(last_eval.mean);
  }

  for (double r : summary.final_returns) summary.final_mean += r;
  summary.final_mean /= double(summary.final_returns.size());
  summary.final_ci95_half = ci95_half_width(summary.final_returns);
  return summary;
}

// ---------------------------------------------------------------------------
// Delta sweep: one run_experiment per grid point (horizon and discount
// rescale inside the environment factory), aggregated CSV plus a comparison
// plot of return against decision steps.

struct SweepCellFailure {
  double delta = 0.0;
  std::string message;
  bool numerical = false;
};

struct SweepResult {
  std::vector<RunSummary> cells;
  std::vector<double> cell_deltas;
  std::vector<SweepCellFailure> failures;
  std::string combined_csv;
  std::string plot_path;
};

/// Aggregates run-log rows into one series per (run_id, delta): x is the
/// chosen column averaged across seeds at each eval checkpoint, y the mean
/// return with a 1.96·sd/sqrt(n) band.
inline std::vector<Series> runlog_series(const CsvDoc& doc, const std::string& x_field) {
  const int c_run = doc.col("run_id"), c_delta = doc.col("delta"),
            c_step = doc.col("decision_steps"), c_x = doc.col(x_field),
            c_y = doc.col("episode_return_mean");
  std::map<std::pair<std::string, std::string>, std::map<long long, std::pair<std::vector<double>, std::vector<double>>>>
      groups;  // (run_id, delta) -> decision_steps -> (xs, ys)
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    auto& slot = groups[{doc.str(r, c_run), doc.str(r, c_delta)}]
                       [(long long)(doc.num(r, c_step))];
    slot.first.push_back(doc.num(r, c_x));
    slot.second.push_back(doc.num(r, c_y));
  }
  std::vector<Series> out;
  for (const auto& [key, by_step] : groups) {
    Series s;
    s.label = key.first + "  d=" + short_double(std::stod(key.second));
    for (const auto& [step, xy] : by_step) {
      double xm = 0.0, ym = 0.0;
      for (double v : xy.first) xm += v;
      for (double v : xy.second) ym += v;
      xm /= double(xy.first.size());
      ym /= double(xy.second.size());
      s.x.push_back(xm);
      s.y.push_back(ym);
      s.band_half.push_back(ci95_half_width(xy.second));
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline SweepResult sweep_delta(const ExperimentConfig& cfg) {
  std::vector<double> grid = cfg.delta_grid;
  if (grid.empty()) grid.push_back(cfg.delta);

  SweepResult res;
  std::filesystem::create_directories(cfg.out_dir);
  for (double d : grid) {
    ExperimentConfig cell = cfg;
    cell.delta = d;
    cell.delta_grid.clear();
    if (grid.size() > 1) cell.run_id = cfg.run_id + "_d" + short_double(d);
    try {
      res.cells.push_back(run_experiment(cell));
      res.cell_deltas.push_back(d);
    } catch (const NumericalError& e) {
      res.failures.push_back({d, e.what(), true});
    } catch (const std::exception& e) {
      res.failures.push_back({d, e.what(), false});
    }
  }

  // combined log: header once, then every cell's rows in grid order
  res.combined_csv = cfg.out_dir + "/" + cfg.run_id + "_sweep.csv";
  {
    std::ofstream out(res.combined_csv, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + res.combined_csv);
    out << kRunLogHeader << '\n';
    for (const RunSummary& cell : res.cells) {
      CsvDoc doc = read_csv(cell.csv_path);
      for (const auto& row : doc.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
        out << '\n';
      }
    }
  }

  PlotSpec spec;
  spec.title = cfg.run_id + " across step sizes";
  spec.x_label = "decision steps";
  spec.y_label = "episode return";
  spec.series = runlog_series(read_csv(res.combined_csv), "decision_steps");
  res.plot_path = cfg.out_dir + "/" + cfg.run_id + "_sweep.svg";
  write_text_file(res.plot_path, render_line_chart(spec));
  return res;
}

// ---------------------------------------------------------------------------
// Safe-region trace export.

struct TraceExport {
  std::string csv_path, svg_path;
  long long rows = 0;
  long long forced_rows = 0;        // decisions with a nonzero applied force
  double region_exit_rate_forced = 0.0;
  double region_exit_rate_free = 0.0;
};

inline TraceExport export_trace(const std::string& checkpoint_path, const std::string& env_id,
                                double delta, std::uint64_t seed,
                                const nlohmann::json& env_params,
                                const RepetitionController& ctrl, int n_episodes,
                                std::array<int, 2> plot_dims, const std::string& out_prefix) {
  if (n_episodes < 1) throw std::invalid_argument("export_trace: need at least one episode");
  const CheckpointData ck = load_checkpoint(checkpoint_path);
  GaussianPolicyNet net = net_from_checkpoint(ck);
  std::unique_ptr<Env> env = make_env(env_id, delta, mix_seed(seed, 0x7a3e), env_params);
  if (env->obs_dim() != net.obs_dim() || env->action_dim() != net.act_dim())
    throw std::invalid_argument("export_trace: checkpoint does not match environment dims");
  if (ctrl.aux_dim() != net.aux_dim())
    throw std::invalid_argument("export_trace: checkpoint does not match controller");
  for (int d : plot_dims)
    if (d < 0 || d >= env->obs_dim())
      throw std::invalid_argument("export_trace: plotted dims incompatible with env dims");
  if (ck.norm.dim() != env->obs_dim())
    throw std::invalid_argument("export_trace: checkpoint normalizer does not match env dims");
  if (ctrl.mask)
    for (int d : *ctrl.mask)
      if (d < 0 || d >= env->obs_dim())
        throw std::invalid_argument("export_trace: mask incompatible with env dims");

  const Normalizer frozen = ck.norm.snapshot();
  Rng rng(mix_seed(seed, 0x7a3e5), 6);

  TraceExport out;
  out.csv_path = out_prefix + ".csv";
  out.svg_path = out_prefix + ".svg";

  std::ofstream csv(out.csv_path, std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot open " + out.csv_path);
  csv << "episode,decision,stop_reason,held_micro_steps,duration_s,aux";
  for (int k = 0; k < env->obs_dim(); ++k) csv << ",s" << k;
  for (int k = 0; k < env->disturbance_dim(); ++k) csv << ",f" << k;
  csv << '\n';

  const bool has_regions =
      ctrl.kind == ControllerKind::SAR || ctrl.kind == ControllerKind::LambdaSAR;
  const double mask_dims = double(ctrl.mask ? ctrl.mask->size() : std::size_t(env->obs_dim()));
  const double radius_scale =
      ctrl.metric == DistanceMetric::L1Normalized ? mask_dims : std::sqrt(mask_dims);

  ScatterSpec scatter;
  scatter.title = has_regions ? "safe regions in normalized state space" : "decision anchors";
  scatter.x_label = "normalized state dim " + std::to_string(plot_dims[0]);
  scatter.y_label = "normalized state dim " + std::to_string(plot_dims[1]);

  long long exit_forced = 0, exit_free = 0, free_rows = 0;
  std::vector<double> obs_n(std::size_t(env->obs_dim()));
  for (int e = 0; e < n_episodes; ++e) {
    std::vector<double> obs = env->reset();
    long long dec_idx = 0;
    while (!env->done()) {
      frozen.normalize(obs, obs_n);
      const PolicySample ps = net.sample(ck.params, obs_n, rng);
      const double aux =
          net.aux_dim() > 0 ? map_aux_head(ps.action[std::size_t(net.act_dim())], ctrl) : 0.0;
      DecisionStep dec = execute_macro_action(
          *env, obs, std::span<const double>(ps.action.data(), std::size_t(net.act_dim())), aux,
          ctrl, frozen);

      const std::span<const double> force = env->applied_disturbance();
      bool forced = false;
      for (double f : force) forced |= f != 0.0;

      csv << e << ',' << dec_idx << ',' << stop_reason_name(dec.stop_reason) << ','
          << dec.held_micro_steps << ',' << format_double(dec.duration) << ','
          << format_double(dec.aux);
      for (double s : dec.anchor_state) csv << ',' << format_double(s);
      for (double f : force) csv << ',' << format_double(f);
      csv << '\n';

      const double gx = dec.anchor_state_normalized[std::size_t(plot_dims[0])];
      const double gy = dec.anchor_state_normalized[std::size_t(plot_dims[1])];
      scatter.px.push_back(gx);
      scatter.py.push_back(gy);
      if (has_regions)
        scatter.glyphs.push_back({gx, gy, dec.aux * radius_scale,
                                  ctrl.metric == DistanceMetric::L1Normalized, forced});

      ++out.rows;
      if (forced) {
        ++out.forced_rows;
        exit_forced += dec.stop_reason == StopReason::RegionExit;
      } else {
        ++free_rows;
        exit_free += dec.stop_reason == StopReason::RegionExit;
      }
      ++dec_idx;
      obs = std::move(dec.next_obs);
    }
  }
  if (!csv) throw std::runtime_error("trace: write failed for " + out.csv_path);
  csv.close();

  out.region_exit_rate_forced =
      out.forced_rows > 0 ? double(exit_forced) / double(out.forced_rows) : 0.0;
  out.region_exit_rate_free = free_rows > 0 ? double(exit_free) / double(free_rows) : 0.0;
  write_text_file(out.svg_path, render_region_scatter(scatter));
  return out;
}

// ---------------------------------------------------------------------------
// Chart rendering from CSV files (run logs or variance-probe tables).

inline constexpr const char* kProbeHeader = "delta,seed,trace_estimate,n_traj";

struct PlotOptions {
  std::string x_field = "decision_steps";  // run logs: also physical_time_s / wallclock_s
  bool log_log = false;
  std::string title;
  double bound_T = -1.0;  // theorem1_bound reference line when all three are positive
  double bound_c = 1.0;
  double bound_sigma_min = -1.0;
};

inline std::vector<Series> probe_series(const CsvDoc& doc) {
  const int c_delta = doc.col("delta"), c_trace = doc.col("trace_estimate");
  std::map<double, std::vector<double>> by_delta;
  for (std::size_t r = 0; r < doc.rows.size(); ++r)
    by_delta[doc.num(r, c_delta)].push_back(doc.num(r, c_trace));
  Series s;
  s.label = "estimated trace";
  for (const auto& [d, traces] : by_delta) {
    double m = 0.0;
    for (double t : traces) m += t;
    s.x.push_back(d);
    s.y.push_back(m / double(traces.size()));
    s.band_half.push_back(ci95_half_width(traces));
  }
  return {std::move(s)};
}

inline std::string plot_csvs(const std::vector<std::string>& paths, const PlotOptions& opt,
                             const std::string& out_svg) {
  if (paths.empty()) throw std::invalid_argument("plot: no input files");
  std::vector<CsvDoc> docs;
  for (const std::string& p : paths) docs.push_back(read_csv(p));
  for (std::size_t i = 1; i < docs.size(); ++i)
    if (docs[i].header != docs[0].header)
      throw std::invalid_argument("plot: input CSVs have different schemas");

  const std::string joined_header = [&] {
    std::string h;
    for (std::size_t c = 0; c < docs[0].header.size(); ++c)
      h += (c ? "," : "") + docs[0].header[c];
    return h;
  }();

  PlotSpec spec;
  spec.title = opt.title;
  if (joined_header == kProbeHeader) {
    CsvDoc merged = docs[0];
    for (std::size_t i = 1; i < docs.size(); ++i)
      merged.rows.insert(merged.rows.end(), docs[i].rows.begin(), docs[i].rows.end());
    spec.series = probe_series(merged);
    spec.log_x = spec.log_y = true;
    spec.x_label = "step size (s)";
    spec.y_label = "gradient variance trace";
    if (opt.bound_T > 0.0 && opt.bound_c > 0.0 && opt.bound_sigma_min > 0.0) {
      Series bound;
      bound.label = "lower-bound shape, not fitted";
      bound.dashed = true;
      bound.markers = false;
      for (double d : spec.series[0].x) {
        bound.x.push_back(d);
        bound.y.push_back(theorem1_bound(opt.bound_T, opt.bound_c, d, opt.bound_sigma_min));
      }
      spec.series.push_back(std::move(bound));
    }
  } else if (joined_header == kRunLogHeader) {
    CsvDoc merged = docs[0];
    for (std::size_t i = 1; i < docs.size(); ++i)
      merged.rows.insert(merged.rows.end(), docs[i].rows.begin(), docs[i].rows.end());
    spec.series = runlog_series(merged, opt.x_field);
    spec.log_x = spec.log_y = opt.log_log;
    spec.x_label = opt.x_field;
    spec.y_label = "episode return";
  } else {
    throw std::invalid_argument("plot: unrecognized CSV schema");
  }

  write_text_file(out_svg, render_line_chart(spec));
  return out_svg;
}

}  // namespace sarlab
