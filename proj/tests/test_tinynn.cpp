#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <vector>

#include "sarlab/rng.hpp"
#include "sarlab/tinynn.hpp"

using namespace sarlab;

namespace {

double stdnormal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Largest deviation between the empirical CDF of `z` and the standard normal.
double ks_statistic(std::vector<double> z) {
  std::sort(z.begin(), z.end());
  const double n = double(z.size());
  double d = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double c = stdnormal_cdf(z[i]);
    d = std::max(d, std::abs(c - double(i) / n));
    d = std::max(d, std::abs(c - double(i + 1) / n));
  }
  return d;
}

bool has_kink_near_zero(const MlpCache& cache, double tol = 1e-3) {
  for (std::size_t l = 0; l + 1 < cache.z.size(); ++l)  // hidden layers only
    for (double z : cache.z[l])
      if (std::abs(z) < tol) return true;
  return false;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(a) + std::abs(b)); }

}  // namespace

TEST_CASE("mlp parameter count and zero net") {
  Mlp net({3, 8, 8, 2});
  CHECK(net.param_count() == std::size_t(3 * 8 + 8 + 8 * 8 + 8 + 8 * 2 + 2));
  std::vector<double> p(net.param_count(), 0.0), y(2, 7.0);
  net.forward(p, std::vector<double>{1.0, -2.0, 3.0}, y);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 0.0);
}

TEST_CASE("mlp passes positive values through a unit chain") {
  Mlp net({1, 1, 1, 1});
  std::vector<double> p(net.param_count(), 0.0);
  p[0] = 1.0;  // W1
  p[2] = 1.0;  // W2
  p[4] = 1.0;  // W3
  std::vector<double> y(1);
  net.forward(p, std::vector<double>{2.5}, y);
  CHECK(y[0] == 2.5);
  net.forward(p, std::vector<double>{-2.5}, y);
  CHECK(y[0] == 0.0);  // ReLU kills the negative path
}

TEST_CASE("mlp forward is bit-deterministic") {
  Mlp net({4, 16, 16, 3});
  std::vector<double> p(net.param_count());
  Rng rng(1);
  for (double& v : p) v = rng.normal() * 0.5;
  std::vector<double> x{0.3, -1.2, 0.8, 2.0}, y1(3), y2(3);
  net.forward(p, x, y1);
  net.forward(p, x, y2);
  CHECK(std::memcmp(y1.data(), y2.data(), 3 * sizeof(double)) == 0);
}

TEST_CASE("mlp backward matches central finite differences") {
  Mlp net({3, 8, 8, 2});
  Rng rng(77);
  const double h = 1e-5;
  int done = 0;
  while (done < 100) {
    std::vector<double> p(net.param_count());
    for (double& v : p) v = rng.normal() * 0.5;
    std::vector<double> x{rng.normal(), rng.normal(), rng.normal()};
    std::vector<double> dy{rng.normal(), rng.normal()};

    MlpCache cache;
    std::vector<double> y(2);
    net.forward(p, x, y, &cache);
    if (has_kink_near_zero(cache)) continue;  // resample away from ReLU kinks

    std::vector<double> grad(net.param_count(), 0.0);
    net.backward(p, cache, dy, grad);

    double worst = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double keep = p[j];
      p[j] = keep + h;
      net.forward(p, x, y);
      const double fp = y[0] * dy[0] + y[1] * dy[1];
      p[j] = keep - h;
      net.forward(p, x, y);
      const double fm = y[0] * dy[0] + y[1] * dy[1];
      p[j] = keep;
      worst = std::max(worst, rel_err(grad[j], (fp - fm) / (2.0 * h)));
    }
    REQUIRE(worst < 1e-4);
    ++done;
  }
}

TEST_CASE("mlp gradient contracts") {
  Mlp net({2, 4, 1});
  std::vector<double> p(net.param_count());
  Rng rng(3);
  for (double& v : p) v = rng.normal();
  MlpCache cache;
  std::vector<double> y(1);
  net.forward(p, std::vector<double>{0.4, -0.2}, y, &cache);

  std::vector<double> grad(net.param_count(), 0.0);
  net.backward(p, cache, std::vector<double>{0.0}, grad);
  for (double g : grad) CHECK(g == 0.0);  // zero upstream grad, zero gradient

  MlpCache stale;
  CHECK_THROWS_AS(net.backward(p, stale, std::vector<double>{1.0}, grad), std::invalid_argument);
}

TEST_CASE("relu uses subgradient zero at exactly zero") {
  Mlp net({1, 1, 1});
  // z1 = W1*x + b1 = 0 for x = 0; everything upstream of the kink must not flow.
  std::vector<double> p{1.0, 0.0, 1.0, 0.5};  // W1, b1, W2, b2
  MlpCache cache;
  std::vector<double> y(1);
  net.forward(p, std::vector<double>{0.0}, y, &cache);
  CHECK(y[0] == 0.5);
  std::vector<double> grad(p.size(), 0.0);
  net.backward(p, cache, std::vector<double>{1.0}, grad);
  CHECK(grad[0] == 0.0);  // dW1
  CHECK(grad[1] == 0.0);  // db1
  CHECK(grad[2] == 0.0);  // dW2 (h1 = 0)
  CHECK(grad[3] == 1.0);  // db2
}

TEST_CASE("gaussian log density matches the closed form") {
  GaussianPolicyNet net(2, 1, 0, 4);
  std::vector<double> theta(net.param_count(), 0.0);  // mu = 0, log_std = 0
  std::vector<double> obs{0.3, -0.8};

  // mu = 0, sigma = 1, a = 0: density is -0.5*ln(2*pi).
  CHECK(net.log_prob(theta, obs, std::vector<double>{0.0}) ==
        Catch::Approx(-0.918938533204672741780329736406).epsilon(1e-15));

  // a = mu, sigma = 0.5: only the normalization term -0.5*ln(2*pi*sigma^2).
  theta[net.log_std_offset()] = std::log(0.5);
  CHECK(net.log_prob(theta, obs, std::vector<double>{0.0}) ==
        Catch::Approx(-0.5 * std::log(2.0 * M_PI * 0.25)).epsilon(1e-14));
}

TEST_CASE("final-layer bias gradient of log prob is noise over sigma") {
  GaussianPolicyNet net(3, 2, 0, 16);
  std::vector<double> theta(net.param_count());
  Rng rng(11);
  net.init_params(theta, rng);
  theta[net.log_std_offset() + 0] = std::log(0.7);
  theta[net.log_std_offset() + 1] = std::log(1.3);

  std::vector<double> obs{0.5, -0.2, 1.1};
  const PolicySample s = net.sample(theta, obs, rng);

  PolicyEval ev;
  net.log_prob(theta, obs, s.action, &ev);
  std::vector<double> grad(net.param_count(), 0.0);
  net.log_prob_backward(theta, ev, s.action, 1.0, grad);

  // First bias of the policy MLP's output layer shifts mu_1 directly.
  const std::size_t b1 = net.policy_mlp().param_count() - std::size_t(net.policy_mlp().out_dim());
  CHECK(grad[b1] == Catch::Approx(s.noise[0] / 0.7).epsilon(1e-12));
  CHECK(grad[b1 + 1] == Catch::Approx(s.noise[1] / 1.3).epsilon(1e-12));
}

TEST_CASE("composed policy loss matches finite differences") {
  GaussianPolicyNet net(3, 2, 2, 6);
  Rng rng(1234);
  const double h = 1e-5;
  const double cl = 2.3, cv = 0.7, ce = 0.11;
  int done = 0;
  while (done < 100) {
    std::vector<double> theta(net.param_count());
    for (double& v : theta) v = rng.normal() * 0.4;
    std::vector<double> obs{rng.normal(), rng.normal(), rng.normal()};

    PolicyEval ev;
    MlpCache vcache;
    net.log_prob(theta, obs, std::vector<double>(4, 0.0), &ev);
    net.value(theta, obs, &vcache);
    if (has_kink_near_zero(ev.mlp) || has_kink_near_zero(vcache)) continue;

    std::vector<double> action(4);
    for (int k = 0; k < 4; ++k) action[std::size_t(k)] = ev.mu[std::size_t(k)] + ev.sigma[std::size_t(k)] * rng.normal();

    auto loss = [&](std::span<const double> th) {
      PolicyEval e;
      const double lp = net.log_prob(th, obs, action, &e);
      return cl * lp + cv * net.value(th, obs) + ce * net.entropy(e);
    };

    net.log_prob(theta, obs, action, &ev);
    net.value(theta, obs, &vcache);
    std::vector<double> grad(net.param_count(), 0.0);
    net.log_prob_backward(theta, ev, action, cl, grad);
    net.value_backward(theta, vcache, cv, grad);
    net.entropy_backward(theta, ev, ce, grad);

    double worst = 0.0;
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double keep = theta[j];
      theta[j] = keep + h;
      const double fp = loss(theta);
      theta[j] = keep - h;
      const double fm = loss(theta);
      theta[j] = keep;
      worst = std::max(worst, rel_err(grad[j], (fp - fm) / (2.0 * h)));
    }
    REQUIRE(worst < 1e-4);
    ++done;
  }
}

TEST_CASE("sampling reparameterization matches the density it reports") {
  GaussianPolicyNet net(2, 1, 1, 8);
  std::vector<double> theta(net.param_count());
  Rng init(5);
  net.init_params(theta, init);
  theta[net.log_std_offset()] = std::log(0.8);

  std::vector<double> obs{0.4, -1.0};
  PolicyEval ev;
  net.eval_dist(theta, obs, ev);

  Rng rng(99);
  const int n = 100000;
  std::vector<double> z0, z1;
  z0.reserve(n);
  z1.reserve(n);
  double lp_worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const PolicySample s = net.sample(theta, obs, rng);
    z0.push_back((s.action[0] - ev.mu[0]) / ev.sigma[0]);
    z1.push_back((s.action[1] - ev.mu[1]) / ev.sigma[1]);
    lp_worst = std::max(lp_worst, std::abs(s.log_prob - net.log_prob_from(ev, s.action)));
  }
  CHECK(lp_worst < 1e-12);
  CHECK(ks_statistic(std::move(z0)) < 0.006);
  CHECK(ks_statistic(std::move(z1)) < 0.006);
}

TEST_CASE("adam leaves parameters alone on zero gradient") {
  Adam opt(4, 0.01);
  std::vector<double> theta{1.0, -2.0, 0.5, 3.0};
  const std::vector<double> before = theta;
  std::vector<double> g(4, 0.0);
  for (int i = 0; i < 10; ++i) opt.step(theta, g);
  CHECK(theta == before);
}

TEST_CASE("adam approaches a constant step of lr against a constant gradient") {
  Adam opt(1, 0.01);
  std::vector<double> theta{0.0};
  std::vector<double> g{2.5};
  const int n = 2000;
  for (int i = 0; i < n; ++i) opt.step(theta, g);
  CHECK(std::abs(theta[0] + double(n) * 0.01) < 1e-4);
}

TEST_CASE("adam is deterministic") {
  Adam a(3, 1e-3), b(3, 1e-3);
  std::vector<double> ta{0.1, 0.2, 0.3}, tb{0.1, 0.2, 0.3};
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> g{rng.normal(), rng.normal(), rng.normal()};
    a.step(ta, g);
    b.step(tb, g);
  }
  CHECK(std::memcmp(ta.data(), tb.data(), 3 * sizeof(double)) == 0);
}

TEST_CASE("normalizer converges on a constant stream") {
  Normalizer n(1);
  std::vector<double> x{3.0};
  for (int i = 0; i < 10000; ++i) n.update(x);
  CHECK(std::abs(n.mean()[0] - 3.0) < 1e-3);
  CHECK(n.variance()[0] < 1e-2);
  CHECK(std::abs(n.normalize(x)[0]) < 0.05);
}

TEST_CASE("normalizer is finite from the first sample") {
  Normalizer n(2);
  n.update(std::vector<double>{1e6, -1e6});
  const auto out = n.normalize(std::vector<double>{1e6, -1e6});
  CHECK(std::isfinite(out[0]));
  CHECK(std::isfinite(out[1]));
  CHECK(n.variance()[0] >= n.floor());
}

TEST_CASE("snapshots are frozen while the parent keeps learning") {
  Normalizer parent(1);
  std::vector<double> x{2.0};
  for (int i = 0; i < 100; ++i) parent.update(x);
  const Normalizer snap = parent.snapshot();
  const double before = snap.normalize(std::vector<double>{5.0})[0];
  std::vector<double> y{-4.0};
  for (int i = 0; i < 1000; ++i) parent.update(y);
  const double after = snap.normalize(std::vector<double>{5.0})[0];
  CHECK(before == after);
  CHECK(parent.normalize(std::vector<double>{5.0})[0] != before);
  Normalizer frozen_too = snap;
  frozen_too.update(std::vector<double>{100.0});  // no-op
  CHECK(frozen_too.mean()[0] == snap.mean()[0]);
}

TEST_CASE("reward scaling divides by the running standard deviation") {
  Normalizer n(1, 0.01);
  Rng rng(2);
  for (int i = 0; i < 20000; ++i) n.update(std::vector<double>{rng.normal() * 4.0});
  CHECK(n.scale(4.0) == Catch::Approx(1.0).margin(0.1));
  CHECK(n.scale(-4.0) < 0.0);  // sign preserved
}

TEST_CASE("log std never drops below its floor") {
  GaussianPolicyNet net(2, 3, 0, 4);
  std::vector<double> theta(net.param_count(), 0.0);
  theta[net.log_std_offset() + 1] = -20.0;
  net.clamp_log_std(theta);
  CHECK(theta[net.log_std_offset() + 0] == 0.0);
  CHECK(theta[net.log_std_offset() + 1] == kMinLogStd);
  PolicyEval ev;
  net.eval_dist(theta, std::vector<double>{0.0, 0.0}, ev);
  for (double s : ev.sigma) CHECK(s >= 1e-4 * (1.0 - 1e-12));
}

TEST_CASE("checkpoints survive a binary round trip") {
  GaussianPolicyNet net(3, 2, 1, 8);
  CheckpointData c;
  c.shapes = {net.policy_mlp().widths(), net.value_mlp().widths()};
  c.act_dim = 2;
  c.aux_dim = 1;
  c.params.resize(net.param_count());
  Rng rng(4);
  net.init_params(c.params, rng);
  c.norm = Normalizer(3);
  for (int i = 0; i < 57; ++i)
    c.norm.update(std::vector<double>{rng.normal(), rng.normal() * 2.0, 5.0});
  c.norm.freeze();

  const auto dir = std::filesystem::temp_directory_path();
  const std::string path = (dir / "sarlab_ckpt_test.bin").string();
  save_checkpoint(path, c);
  const CheckpointData r = load_checkpoint(path);

  CHECK(r.shapes == c.shapes);
  CHECK(r.act_dim == 2);
  CHECK(r.aux_dim == 1);
  REQUIRE(r.params.size() == c.params.size());
  CHECK(std::memcmp(r.params.data(), c.params.data(), c.params.size() * sizeof(double)) == 0);
  CHECK(r.norm.mean() == c.norm.mean());
  CHECK(r.norm.variance() == c.norm.variance());
  CHECK(r.norm.frozen());

  // Sidecar is valid JSON and agrees on the parameter count.
  std::ifstream side(path + ".json");
  REQUIRE(side.good());
  nlohmann::json j;
  side >> j;
  CHECK(j["param_count"] == c.params.size());
  CHECK(j["normalizer"]["frozen"] == true);

  // Corruption is detected.
  std::filesystem::resize_file(path, 20);
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  {
    std::ofstream bad(path, std::ios::binary | std::ios::trunc);
    bad << "not a checkpoint at all";
  }
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".json");
}
