// Command-line front end: train / sweep / probe-variance / trace / plot.
// Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.

#include <array>
#include <bit>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sarlab/harness.hpp"

namespace {

using namespace sarlab;

RepetitionController* add_controller_flags(CLI::App& cmd, RepetitionController& ctrl,
                                           std::string& name, std::string& metric,
                                           std::vector<int>& mask) {
  cmd.add_option("--controller", name, "none | fixed | sar | lambda_sar | figar | ar_noise")
      ->capture_default_str();
  cmd.add_option("--fixed-n", ctrl.fixed_n, "repeats for the fixed controller")
      ->capture_default_str();
  cmd.add_option("--lambda", ctrl.lambda, "blend weight for lambda_sar")->capture_default_str();
  cmd.add_option("--alpha", ctrl.alpha, "AR(1) coefficient for ar_noise")->capture_default_str();
  cmd.add_option("--d-max", ctrl.d_max, "region size cap for sar / lambda_sar")
      ->capture_default_str();
  cmd.add_option("--t-max", ctrl.t_max, "hold cap in seconds for figar")->capture_default_str();
  cmd.add_option("--metric", metric, "region distance: l1 | l2")->capture_default_str();
  cmd.add_option("--mask", mask, "observation dims the region distance uses");
  return &ctrl;
}

RepetitionController resolve_controller(RepetitionController ctrl, const std::string& name,
                                        const std::string& metric,
                                        const std::vector<int>& mask) {
  ctrl.kind = controller_from_name(name);
  if (metric == "l1")
    ctrl.metric = DistanceMetric::L1Normalized;
  else if (metric == "l2")
    ctrl.metric = DistanceMetric::L2Normalized;
  else
    throw ConfigError("'--metric' must be l1 or l2");
  if (!mask.empty()) ctrl.mask = mask;
  try {
    ctrl.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return ctrl;
}

nlohmann::json params_from_pairs(const std::vector<std::string>& pairs) {
  nlohmann::json out = nlohmann::json::object();
  for (const std::string& kv : pairs) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == kv.size())
      throw ConfigError("'--param' expects key=value, got '" + kv + "'");
    out[kv.substr(0, eq)] = cfgdetail::scalar_value(kv.substr(eq + 1));
  }
  return out;
}

ExperimentConfig load_run_config(const std::string& path) {
  ExperimentConfig cfg = load_config_file(path);
  apply_seed_env_override(cfg);
  return cfg;
}

int run_train(const std::string& config_path) {
  const ExperimentConfig cfg = load_run_config(config_path);
  const RunSummary sum = run_experiment(cfg);
  std::printf("%s: %zu seeds, final return %.6g +/- %.6g\n", sum.csv_path.c_str(),
              sum.final_returns.size(), sum.final_mean, sum.final_ci95_half);
  for (const std::string& p : sum.checkpoint_paths) std::printf("checkpoint %s\n", p.c_str());
  return 0;
}

int run_sweep(const std::string& config_path) {
  const ExperimentConfig cfg = load_run_config(config_path);
  const SweepResult res = sweep_delta(cfg);
  for (std::size_t i = 0; i < res.cells.size(); ++i)
    std::printf("delta %.6g: %s (final return %.6g +/- %.6g)\n", res.cell_deltas[i],
                res.cells[i].csv_path.c_str(), res.cells[i].final_mean,
                res.cells[i].final_ci95_half);
  for (const SweepCellFailure& f : res.failures)
    std::fprintf(stderr, "delta %.6g failed: %s\n", f.delta, f.message.c_str());
  std::printf("combined %s\nplot %s\n", res.combined_csv.c_str(), res.plot_path.c_str());
  if (res.cells.empty()) throw ConfigError("sweep: every cell failed");
  for (const SweepCellFailure& f : res.failures)
    if (f.numerical) throw NumericalError("sweep cell delta " + std::to_string(f.delta) + ": " + f.message);
  return 0;
}

struct ProbeArgs {
  std::string env_id;
  std::vector<double> deltas;
  std::vector<std::uint64_t> seeds = {1, 2};
  int n_traj = 100;
  int burn_in = 10;
  int hidden = 64;
  std::vector<std::string> params;
  std::string out_prefix = "probe";
  double bound_c = 1.0;
  double bound_sigma_min = 1.0;
};

int run_probe(const ProbeArgs& a, const RepetitionController& ctrl) {
  if (a.deltas.empty()) throw ConfigError("'--deltas' is required");
  for (double d : a.deltas)
    if (!(d > 0.0)) throw ConfigError("'--deltas' entries must be positive");
  if (a.seeds.empty()) throw ConfigError("'--seeds' must not be empty");
  if (a.n_traj < 2) throw ConfigError("'--n-traj' must be at least 2");
  if (a.burn_in < 0) throw ConfigError("'--burn-in' must be non-negative");

  const nlohmann::json env_params = params_from_pairs(a.params);
  const ProbeEnvFactory factory = [&](double delta, std::uint64_t seed) {
    return make_env(a.env_id, delta, seed, env_params);
  };

  std::unique_ptr<Env> probe;
  try {
    probe = factory(a.deltas.front(), a.seeds.front());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const std::domain_error& e) {
    throw ConfigError(e.what());
  }
  const double horizon_s = double(probe->max_steps()) * probe->delta();
  GaussianPolicyNet net(probe->obs_dim(), probe->action_dim(), ctrl.aux_dim(), a.hidden);
  probe.reset();

  // Grids below the sweep contract (3 points over a decade) still probe each
  // cell with the same per-seed initialization and trajectory streams.
  std::vector<ProbePoint> points;
  double slope = std::numeric_limits<double>::quiet_NaN();
  double lo = a.deltas.front(), hi = a.deltas.front();
  for (double d : a.deltas) {
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  if (a.deltas.size() >= 3 && a.seeds.size() >= 2 && hi / lo >= 10.0 * (1.0 - 1e-12)) {
    ProbeConfig pc;
    pc.delta_grid = a.deltas;
    pc.seeds = a.seeds;
    pc.n_traj = a.n_traj;
    pc.burn_in = a.burn_in;
    const VarianceProbeReport rep = delta_scaling_sweep(net, ctrl, factory, pc);
    points = rep.points;
    slope = rep.slope;
  } else {
    std::vector<double> theta(net.param_count());
    for (double delta : a.deltas)
      for (std::uint64_t seed : a.seeds) {
        Rng init(mix_seed(seed, 0x9010), 1);
        net.init_params(theta, init);
        std::unique_ptr<Env> env = factory(delta, seed);
        Rng rng(mix_seed(seed, std::bit_cast<std::uint64_t>(delta)), 2);
        ProbeEstimate est =
            estimate_pg_variance(net, theta, *env, ctrl, a.n_traj, a.burn_in, rng);
        points.push_back({delta, seed, est.trace(), est.n_traj});
      }
  }

  const std::string csv_path = a.out_prefix + ".csv";
  {
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot open " + csv_path);
    csv << kProbeHeader << '\n';
    for (const ProbePoint& p : points)
      csv << format_double(p.delta) << ',' << p.seed << ',' << format_double(p.trace) << ','
          << p.n_traj << '\n';
  }

  PlotOptions opt;
  opt.title = a.env_id + " gradient variance";
  opt.bound_T = horizon_s;
  opt.bound_c = a.bound_c;
  opt.bound_sigma_min = a.bound_sigma_min;
  const std::string svg_path = plot_csvs({csv_path}, opt, a.out_prefix + ".svg");

  for (const ProbePoint& p : points)
    std::printf("delta %.6g seed %llu trace %.6g (%lld trajectories)\n", p.delta,
                (unsigned long long)(p.seed), p.trace, (long long)(p.n_traj));
  if (std::isfinite(slope)) std::printf("log-log slope %.4f\n", slope);
  std::printf("%s\n%s\n", csv_path.c_str(), svg_path.c_str());
  return 0;
}

struct TraceArgs {
  std::string checkpoint;
  std::string env_id;
  double delta = 0.0;
  std::uint64_t seed = 1;
  int episodes = 10;
  std::vector<int> dims = {0, 1};
  std::vector<std::string> params;
  std::string out_prefix = "trace";
};

int run_trace(const TraceArgs& a, const RepetitionController& ctrl) {
  if (!(a.delta > 0.0)) throw ConfigError("'--delta' must be positive");
  if (a.episodes < 1) throw ConfigError("'--episodes' must be at least 1");
  if (a.dims.size() != 2) throw ConfigError("'--dims' expects exactly two observation dims");
  TraceExport tr;
  try {
    tr = export_trace(a.checkpoint, a.env_id, a.delta, a.seed, params_from_pairs(a.params), ctrl,
                      a.episodes, {a.dims[0], a.dims[1]}, a.out_prefix);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const std::domain_error& e) {
    throw ConfigError(e.what());
  }
  std::printf("%lld decisions (%lld with an external force)\n", tr.rows, tr.forced_rows);
  if (tr.forced_rows > 0)
    std::printf("region-exit rate: %.3f forced vs %.3f calm\n", tr.region_exit_rate_forced,
                tr.region_exit_rate_free);
  std::printf("%s\n%s\n", tr.csv_path.c_str(), tr.svg_path.c_str());
  return 0;
}

struct PlotArgs {
  std::vector<std::string> csvs;
  std::string out = "plot.svg";
  std::string x_field = "decision_steps";
  std::string title;
  bool log_log = false;
  double bound_T = -1.0;
  double bound_c = 1.0;
  double bound_sigma_min = -1.0;
};

int run_plot(const PlotArgs& a) {
  PlotOptions opt;
  opt.x_field = a.x_field;
  opt.log_log = a.log_log;
  opt.title = a.title;
  opt.bound_T = a.bound_T;
  opt.bound_c = a.bound_c;
  opt.bound_sigma_min = a.bound_sigma_min;
  try {
    std::printf("%s\n", plot_csvs(a.csvs, opt, a.out).c_str());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"delta-discretized control experiments"};
  app.require_subcommand(1);

  std::string train_cfg, sweep_cfg;
  CLI::App* train = app.add_subcommand("train", "run one training experiment from a config file");
  train->add_option("config", train_cfg, "flat key=value or .json config")->required();
  CLI::App* sweep = app.add_subcommand("sweep", "train across a delta grid and plot the comparison");
  sweep->add_option("config", sweep_cfg, "config with delta.grid (or a single delta)")->required();

  ProbeArgs probe_args;
  RepetitionController probe_ctrl;
  std::string probe_ctrl_name = "none", probe_metric = "l1";
  std::vector<int> probe_mask;
  CLI::App* probe =
      app.add_subcommand("probe-variance", "estimate the policy-gradient variance trace");
  probe->add_option("--env", probe_args.env_id, "environment id, wrappers joined with '+'")
      ->required();
  probe->add_option("--deltas", probe_args.deltas, "step sizes to probe")->required();
  probe->add_option("--seeds", probe_args.seeds, "seeds (fresh policy per seed)")
      ->capture_default_str();
  probe->add_option("--n-traj", probe_args.n_traj, "trajectories per estimate")
      ->capture_default_str();
  probe->add_option("--burn-in", probe_args.burn_in, "normalizer warmup trajectories")
      ->capture_default_str();
  probe->add_option("--hidden", probe_args.hidden, "policy hidden width")->capture_default_str();
  probe->add_option("--param", probe_args.params, "environment parameter key=value (repeatable)");
  probe->add_option("--out", probe_args.out_prefix, "output path prefix")->capture_default_str();
  probe->add_option("--bound-c", probe_args.bound_c,
                    "assumption constant for the reference line (lower-bound shape, not fitted)")
      ->capture_default_str();
  probe->add_option("--bound-sigma-min", probe_args.bound_sigma_min,
                    "smallest policy sigma for the reference line")
      ->capture_default_str();
  add_controller_flags(*probe, probe_ctrl, probe_ctrl_name, probe_metric, probe_mask);

  TraceArgs trace_args;
  RepetitionController trace_ctrl;
  std::string trace_ctrl_name = "none", trace_metric = "l1";
  std::vector<int> trace_mask;
  CLI::App* trace =
      app.add_subcommand("trace", "replay a checkpoint and export per-decision safe regions");
  trace->add_option("checkpoint", trace_args.checkpoint, "policy checkpoint file")->required();
  trace->add_option("--env", trace_args.env_id, "environment id, wrappers joined with '+'")
      ->required();
  trace->add_option("--delta", trace_args.delta, "step size")->required();
  trace->add_option("--seed", trace_args.seed, "environment and sampling seed")
      ->capture_default_str();
  trace->add_option("--episodes", trace_args.episodes, "episodes to replay")
      ->capture_default_str();
  trace->add_option("--dims", trace_args.dims, "two observation dims for the scatter")
      ->capture_default_str();
  trace->add_option("--param", trace_args.params, "environment parameter key=value (repeatable)");
  trace->add_option("--out", trace_args.out_prefix, "output path prefix")->capture_default_str();
  add_controller_flags(*trace, trace_ctrl, trace_ctrl_name, trace_metric, trace_mask);

  PlotArgs plot_args;
  CLI::App* plot = app.add_subcommand("plot", "render run logs or variance tables to SVG");
  plot->add_option("csv", plot_args.csvs, "input CSV files sharing one schema")->required();
  plot->add_option("--out", plot_args.out, "output SVG path")->capture_default_str();
  plot->add_option("--x", plot_args.x_field,
                   "run-log x axis: decision_steps | physical_time_s | wallclock_s")
      ->capture_default_str();
  plot->add_option("--title", plot_args.title, "chart title");
  plot->add_flag("--log-log", plot_args.log_log, "log scale on both axes (run logs)");
  plot->add_option("--bound-T", plot_args.bound_T, "horizon seconds for the reference line");
  plot->add_option("--bound-c", plot_args.bound_c, "assumption constant for the reference line")
      ->capture_default_str();
  plot->add_option("--bound-sigma-min", plot_args.bound_sigma_min,
                   "smallest policy sigma for the reference line");

  try {
    app.parse(argc, argv);
    if (*train) return run_train(train_cfg);
    if (*sweep) return run_sweep(sweep_cfg);
    if (*probe)
      return run_probe(probe_args,
                       resolve_controller(probe_ctrl, probe_ctrl_name, probe_metric, probe_mask));
    if (*trace)
      return run_trace(trace_args,
                       resolve_controller(trace_ctrl, trace_ctrl_name, trace_metric, trace_mask));
    if (*plot) return run_plot(plot_args);
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const sarlab::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const sarlab::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
