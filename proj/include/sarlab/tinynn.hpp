#pragma once
// Minimal neural-network stack: ReLU MLPs with manual backprop over a flat
// parameter vector, a diagonal-Gaussian policy head with state-independent
// log-std for primary action dims and state-dependent log-std for auxiliary
// dims, a value head, Adam, and EMA normalizers with frozen snapshots.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "sarlab/rng.hpp"

namespace sarlab {

inline constexpr double kHalfLn2Pi = 0.918938533204672741780329736406;
inline constexpr double kMinLogStd = -9.210340371976182;  // ln(1e-4)

struct MlpCache {
  std::vector<double> x;                // input copy
  std::vector<std::vector<double>> z;   // pre-activations per layer
  std::vector<std::vector<double>> h;   // post-activations per layer
};

/// Fully-connected ReLU net over an externally owned flat parameter span.
/// Layout per layer: weights row-major (out x in), then biases.
class Mlp {
 public:
  explicit Mlp(std::vector<int> widths) : widths_(std::move(widths)) {
    if (widths_.size() < 2) throw std::invalid_argument("Mlp: need at least two widths");
    for (int w : widths_)
      if (w < 1) throw std::invalid_argument("Mlp: widths must be positive");
    count_ = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l)
      count_ += std::size_t(widths_[l]) * std::size_t(widths_[l + 1]) + std::size_t(widths_[l + 1]);
  }

  int in_dim() const { return widths_.front(); }
  int out_dim() const { return widths_.back(); }
  std::size_t param_count() const { return count_; }
  const std::vector<int>& widths() const { return widths_; }

  /// y = net(x). ReLU on hidden layers, identity on the last. When `cache`
  /// is given it records everything backward() needs.
  void forward(std::span<const double> p, std::span<const double> x, std::span<double> y,
               MlpCache* cache = nullptr) const {
    check_spans(p, x.size(), std::size_t(in_dim()));
    if (y.size() != std::size_t(out_dim())) throw std::invalid_argument("Mlp: bad output size");
    thread_local std::vector<double> a, b;
    a.assign(x.begin(), x.end());
    if (cache) {
      cache->x.assign(x.begin(), x.end());
      cache->z.assign(widths_.size() - 1, {});
      cache->h.assign(widths_.size() - 1, {});
    }
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      const int nin = widths_[l], nout = widths_[l + 1];
      b.assign(std::size_t(nout), 0.0);
      for (int o = 0; o < nout; ++o) {
        double acc = p[off + std::size_t(nin) * std::size_t(nout) + std::size_t(o)];
        const double* w = &p[off + std::size_t(o) * std::size_t(nin)];
        for (int i = 0; i < nin; ++i) acc += w[i] * a[std::size_t(i)];
        b[std::size_t(o)] = acc;
      }
      off += std::size_t(nin) * std::size_t(nout) + std::size_t(nout);
      if (cache) cache->z[l] = b;
      if (l + 2 < widths_.size())
        for (double& v : b) v = v > 0.0 ? v : 0.0;  // ReLU; subgradient at 0 is 0
      if (cache) cache->h[l] = b;
      a.swap(b);
    }
    std::copy(a.begin(), a.end(), y.begin());
  }

  /// Accumulates d(y . dy)/dp into dp for the forward recorded in `cache`.
  void backward(std::span<const double> p, const MlpCache& cache, std::span<const double> dy,
                std::span<double> dp) const {
    check_spans(p, dy.size(), std::size_t(out_dim()));
    if (dp.size() != count_) throw std::invalid_argument("Mlp: bad gradient size");
    if (cache.z.size() != widths_.size() - 1 || cache.x.size() != std::size_t(in_dim()))
      throw std::invalid_argument("Mlp: stale or mismatched cache");

    thread_local std::vector<double> delta, delta_prev;
    delta.assign(dy.begin(), dy.end());
    for (std::size_t l = widths_.size() - 2;; --l) {
      const int nin = widths_[l], nout = widths_[l + 1];
      const std::size_t off = layer_offset(l);
      const std::vector<double>& hin_vec = (l == 0) ? cache.x : cache.h[l - 1];
      const double* hin = hin_vec.data();
      for (int o = 0; o < nout; ++o) {
        const double d = delta[std::size_t(o)];
        double* dw = &dp[off + std::size_t(o) * std::size_t(nin)];
        for (int i = 0; i < nin; ++i) dw[i] += d * hin[i];
        dp[off + std::size_t(nin) * std::size_t(nout) + std::size_t(o)] += d;
      }
      if (l == 0) break;
      delta_prev.assign(std::size_t(nin), 0.0);
      for (int o = 0; o < nout; ++o) {
        const double d = delta[std::size_t(o)];
        const double* w = &p[off + std::size_t(o) * std::size_t(nin)];
        for (int i = 0; i < nin; ++i) delta_prev[std::size_t(i)] += d * w[i];
      }
      for (int i = 0; i < nin; ++i)
        if (!(cache.z[l - 1][std::size_t(i)] > 0.0)) delta_prev[std::size_t(i)] = 0.0;
      delta.swap(delta_prev);
    }
  }

  /// Fan-in scaled uniform init, biases zero. The last layer is multiplied by
  /// `last_layer_scale` (0.01 for policy heads keeps initial outputs small).
  void init(std::span<double> p, Rng& rng, double last_layer_scale = 1.0) const {
    if (p.size() != count_) throw std::invalid_argument("Mlp: bad parameter size");
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      const int nin = widths_[l], nout = widths_[l + 1];
      const bool last = (l + 2 == widths_.size());
      const double bound = std::sqrt(3.0 / double(nin)) * (last ? last_layer_scale : 1.0);
      const std::size_t off = layer_offset(l);
      for (std::size_t j = 0; j < std::size_t(nin) * std::size_t(nout); ++j)
        p[off + j] = rng.uniform(-bound, bound);
      for (int o = 0; o < nout; ++o)
        p[off + std::size_t(nin) * std::size_t(nout) + std::size_t(o)] = 0.0;
    }
  }

 private:
  std::size_t layer_offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l)
      off += std::size_t(widths_[l]) * std::size_t(widths_[l + 1]) + std::size_t(widths_[l + 1]);
    return off;
  }

  void check_spans(std::span<const double> p, std::size_t got, std::size_t want) const {
    if (p.size() != count_) throw std::invalid_argument("Mlp: bad parameter size");
    if (got != want) throw std::invalid_argument("Mlp: dimension mismatch");
  }

  std::vector<int> widths_;
  std::size_t count_ = 0;
};

/// Adam with bias correction over a flat parameter vector.
struct Adam {
  double lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  std::vector<double> m, v;

  Adam(std::size_t n, double learning_rate) : lr(learning_rate), m(n, 0.0), v(n, 0.0) {}

  void step(std::span<double> theta, std::span<const double> g) {
    if (theta.size() != m.size() || g.size() != m.size())
      throw std::invalid_argument("Adam: shape mismatch");
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, double(t));
    const double bc2 = 1.0 - std::pow(beta2, double(t));
    for (std::size_t i = 0; i < m.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      theta[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
  }
};

/// Per-dimension exponential moving average of mean and variance.
/// normalize(x) = (x - mean)/sqrt(var + floor); snapshots never update.
class Normalizer {
 public:
  explicit Normalizer(int dim, double rate = 1e-3, double floor = 1e-8)
      : rate_(rate), floor_(floor), mean_(std::size_t(dim), 0.0), var_(std::size_t(dim), 1.0) {
    if (dim < 1) throw std::invalid_argument("Normalizer: dim must be positive");
    if (!(rate > 0.0) || rate >= 1.0) throw std::invalid_argument("Normalizer: rate in (0,1)");
    if (!(floor > 0.0)) throw std::invalid_argument("Normalizer: floor must be positive");
  }

  int dim() const { return int(mean_.size()); }
  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

  void update(std::span<const double> x) {
    if (frozen_) return;
    if (x.size() != mean_.size()) throw std::invalid_argument("Normalizer: dimension mismatch");
    for (std::size_t k = 0; k < mean_.size(); ++k) {
      const double diff = x[k] - mean_[k];
      mean_[k] += rate_ * diff;
      var_[k] = (1.0 - rate_) * (var_[k] + rate_ * diff * diff);
      if (var_[k] < floor_) var_[k] = floor_;
    }
  }

  void normalize(std::span<const double> x, std::span<double> out) const {
    if (x.size() != mean_.size() || out.size() != mean_.size())
      throw std::invalid_argument("Normalizer: dimension mismatch");
    for (std::size_t k = 0; k < mean_.size(); ++k)
      out[k] = (x[k] - mean_[k]) / std::sqrt(var_[k] + floor_);
  }

  std::vector<double> normalize(std::span<const double> x) const {
    std::vector<double> out(mean_.size());
    normalize(x, out);
    return out;
  }

  /// Scale-only transform for reward normalization (mean is not subtracted,
  /// so reward signs survive).
  double scale(double x) const { return x / std::sqrt(var_[0] + floor_); }

  Normalizer snapshot() const {
    Normalizer copy = *this;
    copy.frozen_ = true;
    return copy;
  }

  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& variance() const { return var_; }
  double rate() const { return rate_; }
  double floor() const { return floor_; }

  void restore(std::vector<double> mean, std::vector<double> var, bool frozen) {
    if (mean.size() != mean_.size() || var.size() != var_.size())
      throw std::invalid_argument("Normalizer: dimension mismatch");
    mean_ = std::move(mean);
    var_ = std::move(var);
    frozen_ = frozen;
  }

 private:
  double rate_, floor_;
  std::vector<double> mean_, var_;
  bool frozen_ = false;
};

struct PolicyEval {
  MlpCache mlp;
  std::vector<double> out;    // raw MLP output: [mu (K+aux) | aux log-std (aux)]
  std::vector<double> mu;     // K+aux
  std::vector<double> sigma;  // K+aux
};

struct PolicySample {
  std::vector<double> action;  // K primary dims then aux dims, pre-squash
  std::vector<double> noise;   // the standard-normal draws used
  double log_prob = 0.0;
};

/// Diagonal-Gaussian policy plus value function over one flat parameter
/// vector laid out as [policy MLP | log_std (K) | value MLP]. Primary action
/// dims use the state-independent learnable log_std; auxiliary dims get their
/// mean and log-std from the policy MLP output, log-std clamped at ln(1e-4).
class GaussianPolicyNet {
 public:
  GaussianPolicyNet(int obs_dim, int act_dim, int aux_dim, int hidden)
      : obs_dim_(obs_dim),
        act_dim_(act_dim),
        aux_dim_(aux_dim),
        policy_({obs_dim, hidden, hidden, act_dim + 2 * aux_dim}),
        value_({obs_dim, hidden, hidden, 1}) {
    if (act_dim < 1 || aux_dim < 0) throw std::invalid_argument("GaussianPolicyNet: bad dims");
  }

  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  int aux_dim() const { return aux_dim_; }
  int sample_dim() const { return act_dim_ + aux_dim_; }
  const Mlp& policy_mlp() const { return policy_; }
  const Mlp& value_mlp() const { return value_; }

  std::size_t param_count() const { return policy_.param_count() + std::size_t(act_dim_) + value_.param_count(); }
  /// Parameters the action distribution depends on: the leading
  /// [policy MLP | log_std] prefix of the flat vector.
  std::size_t policy_param_count() const { return policy_.param_count() + std::size_t(act_dim_); }
  std::size_t log_std_offset() const { return policy_.param_count(); }
  std::size_t value_offset() const { return policy_.param_count() + std::size_t(act_dim_); }

  void init_params(std::span<double> theta, Rng& rng) const {
    check_theta(theta);
    policy_.init(theta.subspan(0, policy_.param_count()), rng, 0.01);
    for (int k = 0; k < act_dim_; ++k) theta[log_std_offset() + std::size_t(k)] = 0.0;
    value_.init(theta.subspan(value_offset(), value_.param_count()), rng, 1.0);
  }

  void eval_dist(std::span<const double> theta, std::span<const double> obs, PolicyEval& ev) const {
    check_theta(theta);
    ev.out.resize(std::size_t(act_dim_ + 2 * aux_dim_));
    policy_.forward(theta.subspan(0, policy_.param_count()), obs, ev.out, &ev.mlp);
    const int n = sample_dim();
    ev.mu.resize(std::size_t(n));
    ev.sigma.resize(std::size_t(n));
    for (int k = 0; k < n; ++k) ev.mu[std::size_t(k)] = ev.out[std::size_t(k)];
    for (int k = 0; k < act_dim_; ++k)
      ev.sigma[std::size_t(k)] = std::exp(theta[log_std_offset() + std::size_t(k)]);
    for (int j = 0; j < aux_dim_; ++j) {
      const double raw = ev.out[std::size_t(n + j)];
      ev.sigma[std::size_t(act_dim_ + j)] = std::exp(raw > kMinLogStd ? raw : kMinLogStd);
    }
  }

  PolicySample sample(std::span<const double> theta, std::span<const double> obs, Rng& rng) const {
    PolicyEval ev;
    eval_dist(theta, obs, ev);
    const int n = sample_dim();
    PolicySample s;
    s.action.resize(std::size_t(n));
    s.noise.resize(std::size_t(n));
    for (int k = 0; k < n; ++k) {
      const double eps = rng.normal();
      s.noise[std::size_t(k)] = eps;
      s.action[std::size_t(k)] = ev.mu[std::size_t(k)] + ev.sigma[std::size_t(k)] * eps;
    }
    s.log_prob = log_prob_from(ev, s.action);
    return s;
  }

  void mean_action(std::span<const double> theta, std::span<const double> obs,
                   std::span<double> out) const {
    PolicyEval ev;
    eval_dist(theta, obs, ev);
    if (out.size() != ev.mu.size()) throw std::invalid_argument("mean_action: bad output size");
    std::copy(ev.mu.begin(), ev.mu.end(), out.begin());
  }

  double log_prob(std::span<const double> theta, std::span<const double> obs,
                  std::span<const double> action, PolicyEval* ev_out = nullptr) const {
    PolicyEval local;
    PolicyEval& ev = ev_out ? *ev_out : local;
    eval_dist(theta, obs, ev);
    return log_prob_from(ev, action);
  }

  double log_prob_from(const PolicyEval& ev, std::span<const double> action) const {
    if (action.size() != std::size_t(sample_dim()))
      throw std::invalid_argument("log_prob: action dimension mismatch");
    double lp = 0.0;
    for (std::size_t k = 0; k < action.size(); ++k) {
      const double z = (action[k] - ev.mu[k]) / ev.sigma[k];
      lp += -0.5 * z * z - std::log(ev.sigma[k]) - kHalfLn2Pi;
    }
    return lp;
  }

  /// Accumulates coeff * d log_prob / d theta into dtheta, reusing the
  /// forward recorded in `ev` (which must come from the same theta/obs).
  void log_prob_backward(std::span<const double> theta, const PolicyEval& ev,
                         std::span<const double> action, double coeff,
                         std::span<double> dtheta) const {
    check_theta_grad(dtheta);
    const int n = sample_dim();
    thread_local std::vector<double> g;
    g.assign(std::size_t(act_dim_ + 2 * aux_dim_), 0.0);
    for (int k = 0; k < n; ++k) {
      const double z = (action[std::size_t(k)] - ev.mu[std::size_t(k)]) / ev.sigma[std::size_t(k)];
      g[std::size_t(k)] = coeff * z / ev.sigma[std::size_t(k)];  // d/d mu
      const double dls = coeff * (z * z - 1.0);                  // d/d log-std
      if (k < act_dim_) {
        dtheta[log_std_offset() + std::size_t(k)] += dls;
      } else {
        const double raw = ev.out[std::size_t(n + (k - act_dim_))];
        if (raw > kMinLogStd) g[std::size_t(n + (k - act_dim_))] = dls;  // clamp subgradient 0
      }
    }
    policy_.backward(theta.subspan(0, policy_.param_count()), ev.mlp, g,
                     dtheta.subspan(0, policy_.param_count()));
  }

  double entropy(const PolicyEval& ev) const {
    double h = 0.0;
    for (double s : ev.sigma) h += std::log(s) + 0.5 + kHalfLn2Pi;
    return h;
  }

  void entropy_backward(std::span<const double> theta, const PolicyEval& ev, double coeff,
                        std::span<double> dtheta) const {
    check_theta_grad(dtheta);
    const int n = sample_dim();
    thread_local std::vector<double> g;
    g.assign(std::size_t(act_dim_ + 2 * aux_dim_), 0.0);
    for (int k = 0; k < act_dim_; ++k) dtheta[log_std_offset() + std::size_t(k)] += coeff;
    for (int j = 0; j < aux_dim_; ++j) {
      const double raw = ev.out[std::size_t(n + j)];
      if (raw > kMinLogStd) g[std::size_t(n + j)] = coeff;
    }
    if (aux_dim_ > 0)
      policy_.backward(theta.subspan(0, policy_.param_count()), ev.mlp, g,
                       dtheta.subspan(0, policy_.param_count()));
  }

  double value(std::span<const double> theta, std::span<const double> obs,
               MlpCache* cache = nullptr) const {
    check_theta(theta);
    double y = 0.0;
    value_.forward(theta.subspan(value_offset(), value_.param_count()), obs, std::span<double>(&y, 1),
                   cache);
    return y;
  }

  void value_backward(std::span<const double> theta, const MlpCache& cache, double dv,
                      std::span<double> dtheta) const {
    check_theta_grad(dtheta);
    value_.backward(theta.subspan(value_offset(), value_.param_count()), cache,
                    std::span<const double>(&dv, 1),
                    dtheta.subspan(value_offset(), value_.param_count()));
  }

  /// Floors the state-independent log-std at ln(1e-4); call after each
  /// optimizer step so sigma never collapses to zero.
  void clamp_log_std(std::span<double> theta) const {
    check_theta(theta);
    for (int k = 0; k < act_dim_; ++k) {
      double& ls = theta[log_std_offset() + std::size_t(k)];
      if (ls < kMinLogStd) ls = kMinLogStd;
    }
  }

 private:
  void check_theta(std::span<const double> theta) const {
    if (theta.size() != param_count()) throw std::invalid_argument("GaussianPolicyNet: bad theta size");
  }
  void check_theta_grad(std::span<const double> dtheta) const {
    if (dtheta.size() != param_count())
      throw std::invalid_argument("GaussianPolicyNet: bad gradient size");
  }

  int obs_dim_, act_dim_, aux_dim_;
  Mlp policy_, value_;
};

// ---------------------------------------------------------------------------
// Checkpoints: versioned binary blob plus a JSON sidecar.

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

struct CheckpointData {
  std::vector<std::vector<int>> shapes;  // widths of each MLP, policy first
  int act_dim = 0;
  int aux_dim = 0;
  std::vector<double> params;
  Normalizer norm{1};
};

namespace detail {

inline void write_u32(std::ofstream& f, std::uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_doubles(std::ofstream& f, std::span<const double> v) {
  f.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(double)));
}
inline std::uint32_t read_u32(std::ifstream& f) {
  std::uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!f) throw std::runtime_error("checkpoint: truncated file");
  return v;
}
inline void read_doubles(std::ifstream& f, std::span<double> v) {
  f.read(reinterpret_cast<char*>(v.data()), std::streamsize(v.size() * sizeof(double)));
  if (!f) throw std::runtime_error("checkpoint: truncated file");
}

}  // namespace detail

inline constexpr char kCheckpointMagic[8] = {'S', 'A', 'R', 'C', 'K', 'P', 'T', '1'};

inline void save_checkpoint(const std::string& path, const CheckpointData& c) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  f.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::write_u32(f, 1);  // version
  detail::write_u32(f, std::uint32_t(c.shapes.size()));
  for (const auto& s : c.shapes) {
    detail::write_u32(f, std::uint32_t(s.size()));
    for (int w : s) detail::write_u32(f, std::uint32_t(w));
  }
  detail::write_u32(f, std::uint32_t(c.act_dim));
  detail::write_u32(f, std::uint32_t(c.aux_dim));
  detail::write_u32(f, std::uint32_t(c.params.size()));
  detail::write_doubles(f, c.params);
  detail::write_u32(f, std::uint32_t(c.norm.dim()));
  detail::write_doubles(f, c.norm.mean());
  detail::write_doubles(f, c.norm.variance());
  detail::write_u32(f, c.norm.frozen() ? 1u : 0u);
  const double rate_floor[2] = {c.norm.rate(), c.norm.floor()};
  detail::write_doubles(f, rate_floor);
  if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
  f.close();

  nlohmann::json j;
  j["format"] = "SARCKPT1";
  j["shapes"] = c.shapes;
  j["act_dim"] = c.act_dim;
  j["aux_dim"] = c.aux_dim;
  j["param_count"] = c.params.size();
  j["normalizer"] = {{"dim", c.norm.dim()},   {"mean", c.norm.mean()},
                     {"var", c.norm.variance()}, {"frozen", c.norm.frozen()},
                     {"rate", c.norm.rate()},  {"floor", c.norm.floor()}};
  std::ofstream side(path + ".json", std::ios::trunc);
  if (!side) throw std::runtime_error("checkpoint: cannot open " + path + ".json");
  side << j.dump(2) << "\n";
}

inline CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  f.read(magic, sizeof magic);
  if (!f || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  if (detail::read_u32(f) != 1) throw std::runtime_error("checkpoint: unsupported version");

  CheckpointData c;
  const std::uint32_t n_shapes = detail::read_u32(f);
  c.shapes.resize(n_shapes);
  for (auto& s : c.shapes) {
    s.resize(detail::read_u32(f));
    for (int& w : s) w = int(detail::read_u32(f));
  }
  c.act_dim = int(detail::read_u32(f));
  c.aux_dim = int(detail::read_u32(f));
  c.params.resize(detail::read_u32(f));
  detail::read_doubles(f, c.params);

  const int norm_dim = int(detail::read_u32(f));
  std::vector<double> mean(static_cast<std::size_t>(norm_dim));
  std::vector<double> var(static_cast<std::size_t>(norm_dim));
  detail::read_doubles(f, mean);
  detail::read_doubles(f, var);
  const bool frozen = detail::read_u32(f) != 0;
  double rate_floor[2];
  detail::read_doubles(f, rate_floor);
  c.norm = Normalizer(norm_dim, rate_floor[0], rate_floor[1]);
  c.norm.restore(std::move(mean), std::move(var), frozen);
  return c;
}

}  // namespace sarlab
