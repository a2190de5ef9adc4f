#pragma once

// Experiment configuration: a flat dotted-key text format and a JSON format
// that parse to the same struct. Bad input raises ConfigError, which the CLI
// maps to exit code 2.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "sarlab/macroact.hpp"

namespace sarlab {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using FlatConfig = std::map<std::string, nlohmann::json>;

inline const char* controller_name(ControllerKind k) {
  switch (k) {
    case ControllerKind::None: return "none";
    case ControllerKind::Fixed: return "fixed";
    case ControllerKind::SAR: return "sar";
    case ControllerKind::LambdaSAR: return "lambda_sar";
    case ControllerKind::FiGARC: return "figar";
    case ControllerKind::ArNoise: return "ar_noise";
  }
  return "none";
}

inline ControllerKind controller_from_name(const std::string& name) {
  if (name == "none") return ControllerKind::None;
  if (name == "fixed") return ControllerKind::Fixed;
  if (name == "sar") return ControllerKind::SAR;
  if (name == "lambda_sar") return ControllerKind::LambdaSAR;
  if (name == "figar") return ControllerKind::FiGARC;
  if (name == "ar_noise") return ControllerKind::ArNoise;
  throw ConfigError("unknown controller '" + name + "'");
}

struct ExperimentConfig {
  std::string run_id;  // defaults to env_algo_controller
  std::string env_id;
  nlohmann::json env_params = nlohmann::json::object();

  std::string algo = "ppo";  // ppo | a2c | vpg
  double lr = 1e-4;
  std::string lr_scaling = "none";  // none | delta
  bool lr_anneal = false;           // linear decay to 0 over the budget
  double gae_lambda = -1.0;         // resolved per algo when unset
  double ppo_clip = 0.2;
  int ppo_epochs = 10;
  int ppo_minibatch = 64;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  long long rollout_decisions = -1;  // resolved per algo when unset
  int hidden = 64;
  bool reward_norm = false;
  std::string collector = "macro";  // macro | vanilla

  RepetitionController ctrl;

  double delta = -1.0;
  std::vector<double> delta_grid;  // sweeps only
  double delta0 = -1.0;            // reference period for lr scaling / env override
  double gamma0 = -1.0;            // env override
  long horizon = -1;               // env base_steps override

  long long budget_decisions = -1;
  double budget_physical_s = -1.0;  // optional cap, seconds

  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8};
  std::string out_dir = "runs";
  long long eval_every = -1;  // resolved to rollout_decisions when unset
  int eval_episodes = 10;

  bool operator==(const ExperimentConfig&) const = default;
};

namespace cfgdetail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> tokens(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == ',') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline nlohmann::json scalar_value(const std::string& tok) {
  if (tok == "true") return true;
  if (tok == "false") return false;
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end && *end == '\0' && end != tok.c_str()) {
    if (v == (long long)(v) && tok.find_first_of(".eE") == std::string::npos)
      return (long long)(v);
    return v;
  }
  return tok;
}

inline void flatten_into(const nlohmann::json& j, const std::string& prefix, FlatConfig& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      flatten_into(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
  } else {
    if (prefix.empty()) throw ConfigError("config JSON must be an object");
    out[prefix] = j;
  }
}

}  // namespace cfgdetail

/// key = value lines; '#' starts a comment; multi-token values become arrays.
inline FlatConfig parse_flat_text(const std::string& content) {
  FlatConfig out;
  std::istringstream in(content);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = cfgdetail::trim(line);
    if (t.empty()) continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = cfgdetail::trim(t.substr(0, eq));
    const std::string val = cfgdetail::trim(t.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
    const auto toks = cfgdetail::tokens(val);
    if (toks.size() == 1) {
      out[key] = cfgdetail::scalar_value(toks[0]);
    } else {
      nlohmann::json arr = nlohmann::json::array();
      for (const std::string& tok : toks) arr.push_back(cfgdetail::scalar_value(tok));
      out[key] = std::move(arr);
    }
  }
  return out;
}

/// Nested JSON objects flatten to dotted keys, so {"ppo":{"clip":0.1}} and
/// {"ppo.clip":0.1} are the same config.
inline FlatConfig flatten_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config JSON must be an object");
  FlatConfig out;
  cfgdetail::flatten_into(j, "", out);
  return out;
}

inline ExperimentConfig config_from_flat(const FlatConfig& flat) {
  ExperimentConfig cfg;
  auto fail = [](const std::string& msg) -> double { throw ConfigError(msg); };

  auto as_double = [&](const nlohmann::json& v, const std::string& key) {
    return v.is_number() ? v.get<double>() : fail("'" + key + "' must be a number");
  };
  auto as_int = [&](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number_integer()) fail("'" + key + "' must be an integer");
    return v.get<long long>();
  };
  auto as_string = [&](const nlohmann::json& v, const std::string& key) -> std::string {
    if (!v.is_string()) fail("'" + key + "' must be a string");
    return v.get<std::string>();
  };
  auto as_bool = [&](const nlohmann::json& v, const std::string& key) {
    if (!v.is_boolean()) fail("'" + key + "' must be true or false");
    return v.get<bool>();
  };
  auto number_list = [&](const nlohmann::json& v, const std::string& key) {
    std::vector<double> out;
    if (v.is_number()) {
      out.push_back(v.get<double>());
      return out;
    }
    if (!v.is_array()) fail("'" + key + "' must be a list of numbers");
    for (const auto& e : v) out.push_back(as_double(e, key));
    return out;
  };

  for (const auto& [key, val] : flat) {
    if (key.rfind("env.", 0) == 0) {
      cfg.env_params[key.substr(4)] = val;
    } else if (key == "run_id") {
      cfg.run_id = as_string(val, key);
    } else if (key == "env") {
      cfg.env_id = as_string(val, key);
    } else if (key == "algo") {
      cfg.algo = as_string(val, key);
    } else if (key == "lr") {
      cfg.lr = as_double(val, key);
    } else if (key == "lr_scaling") {
      cfg.lr_scaling = as_string(val, key);
    } else if (key == "lr_anneal") {
      cfg.lr_anneal = as_bool(val, key);
    } else if (key == "gae.lambda") {
      cfg.gae_lambda = as_double(val, key);
    } else if (key == "ppo.clip") {
      cfg.ppo_clip = as_double(val, key);
    } else if (key == "ppo.epochs") {
      cfg.ppo_epochs = int(as_int(val, key));
    } else if (key == "ppo.minibatch") {
      cfg.ppo_minibatch = int(as_int(val, key));
    } else if (key == "value_coef") {
      cfg.value_coef = as_double(val, key);
    } else if (key == "entropy_coef") {
      cfg.entropy_coef = as_double(val, key);
    } else if (key == "rollout.decisions") {
      cfg.rollout_decisions = as_int(val, key);
    } else if (key == "hidden") {
      cfg.hidden = int(as_int(val, key));
    } else if (key == "reward_norm") {
      cfg.reward_norm = as_bool(val, key);
    } else if (key == "collector") {
      cfg.collector = as_string(val, key);
    } else if (key == "controller") {
      cfg.ctrl.kind = controller_from_name(as_string(val, key));
    } else if (key == "controller.n") {
      cfg.ctrl.fixed_n = int(as_int(val, key));
    } else if (key == "controller.lambda") {
      cfg.ctrl.lambda = as_double(val, key);
    } else if (key == "controller.alpha") {
      cfg.ctrl.alpha = as_double(val, key);
    } else if (key == "controller.d_max") {
      cfg.ctrl.d_max = as_double(val, key);
    } else if (key == "controller.t_max") {
      cfg.ctrl.t_max = as_double(val, key);
    } else if (key == "controller.metric") {
      const std::string m = as_string(val, key);
      if (m == "l1")
        cfg.ctrl.metric = DistanceMetric::L1Normalized;
      else if (m == "l2")
        cfg.ctrl.metric = DistanceMetric::L2Normalized;
      else
        fail("'controller.metric' must be l1 or l2");
    } else if (key == "controller.mask") {
      std::vector<int> mask;
      for (double d : number_list(val, key)) mask.push_back(int(d));
      cfg.ctrl.mask = std::move(mask);
    } else if (key == "delta") {
      cfg.delta = as_double(val, key);
    } else if (key == "delta.grid") {
      cfg.delta_grid = number_list(val, key);
    } else if (key == "delta0") {
      cfg.delta0 = as_double(val, key);
    } else if (key == "gamma0") {
      cfg.gamma0 = as_double(val, key);
    } else if (key == "horizon") {
      cfg.horizon = long(as_int(val, key));
    } else if (key == "budget.decisions") {
      cfg.budget_decisions = as_int(val, key);
    } else if (key == "budget.physical_time_s") {
      cfg.budget_physical_s = as_double(val, key);
    } else if (key == "seeds") {
      cfg.seeds.clear();
      for (double d : number_list(val, key)) {
        if (d < 0.0) fail("'seeds' must be non-negative");
        cfg.seeds.push_back(std::uint64_t(d));
      }
    } else if (key == "out") {
      cfg.out_dir = as_string(val, key);
    } else if (key == "eval.every") {
      cfg.eval_every = as_int(val, key);
    } else if (key == "eval.episodes") {
      cfg.eval_episodes = int(as_int(val, key));
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }

  // resolve algo-dependent defaults
  if (cfg.algo != "ppo" && cfg.algo != "a2c" && cfg.algo != "vpg")
    throw ConfigError("'algo' must be ppo, a2c or vpg");
  if (cfg.gae_lambda < 0.0) cfg.gae_lambda = cfg.algo == "ppo" ? 0.95 : 1.0;
  if (cfg.rollout_decisions < 0) cfg.rollout_decisions = cfg.algo == "ppo" ? 2048 : 256;
  if (cfg.eval_every < 0) cfg.eval_every = cfg.rollout_decisions;
  if (cfg.run_id.empty())
    cfg.run_id = cfg.env_id + "_" + cfg.algo + "_" + controller_name(cfg.ctrl.kind);

  // validation
  if (cfg.env_id.empty()) throw ConfigError("'env' is required");
  if (!(cfg.lr > 0.0)) throw ConfigError("'lr' must be positive");
  if (cfg.lr_scaling != "none" && cfg.lr_scaling != "delta")
    throw ConfigError("'lr_scaling' must be none or delta");
  if (cfg.lr_scaling == "delta" && !(cfg.delta0 > 0.0))
    throw ConfigError("'lr_scaling = delta' requires a positive 'delta0'");
  if (cfg.gae_lambda < 0.0 || cfg.gae_lambda > 1.0)
    throw ConfigError("'gae.lambda' must lie in [0, 1]");
  if (!(cfg.ppo_clip > 0.0)) throw ConfigError("'ppo.clip' must be positive");
  if (cfg.ppo_epochs < 1) throw ConfigError("'ppo.epochs' must be at least 1");
  if (cfg.ppo_minibatch < 1) throw ConfigError("'ppo.minibatch' must be at least 1");
  if (cfg.rollout_decisions < 1) throw ConfigError("'rollout.decisions' must be at least 1");
  if (cfg.hidden < 1) throw ConfigError("'hidden' must be at least 1");
  if (cfg.collector != "macro" && cfg.collector != "vanilla")
    throw ConfigError("'collector' must be macro or vanilla");
  if (cfg.collector == "vanilla" && cfg.ctrl.kind != ControllerKind::None)
    throw ConfigError("'collector = vanilla' requires controller none");
  if (cfg.collector == "vanilla" && cfg.algo == "vpg")
    throw ConfigError("'collector = vanilla' does not support vpg");
  try {
    cfg.ctrl.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.delta_grid.empty() && !(cfg.delta > 0.0))
    throw ConfigError("'delta' must be positive (or provide 'delta.grid')");
  for (double d : cfg.delta_grid)
    if (!(d > 0.0)) throw ConfigError("'delta.grid' entries must be positive");
  if (cfg.budget_decisions < 0) throw ConfigError("'budget.decisions' is required (>= 0)");
  if (cfg.seeds.empty()) throw ConfigError("'seeds' must not be empty");
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
    for (std::size_t j = i + 1; j < cfg.seeds.size(); ++j)
      if (cfg.seeds[i] == cfg.seeds[j]) throw ConfigError("'seeds' must be distinct");
  if (cfg.eval_every < 1) throw ConfigError("'eval.every' must be at least 1");
  if (cfg.eval_episodes < 1) throw ConfigError("'eval.episodes' must be at least 1");
  return cfg;
}

/// Files ending in .json parse as JSON; anything else as flat text. Both
/// reach the same struct through config_from_flat.
inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config JSON parse error: ") + e.what());
    }
    return config_from_flat(flatten_json(j));
  }
  return config_from_flat(parse_flat_text(ss.str()));
}

/// SARLAB_SEED replaces the config's seed list with a single seed.
inline void apply_seed_env_override(ExperimentConfig& cfg) {
  const char* v = std::getenv("SARLAB_SEED");
  if (!v || !*v) return;
  char* end = nullptr;
  const unsigned long long s = std::strtoull(v, &end, 10);
  if (!end || *end != '\0') throw ConfigError("SARLAB_SEED must be a non-negative integer");
  cfg.seeds = {std::uint64_t(s)};
}

}  // namespace sarlab
