#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "gsched/errors.hpp"
#include "gsched/nn.hpp"
#include "gsched/rng.hpp"

using namespace gsched;

namespace {

// quadratic probe loss: L = sum out_k^2, so dL/dout_k = 2 out_k
double probe_loss(const Mlp& net, const std::vector<double>& in) {
  std::vector<double> out = forward(net, in);
  double l = 0;
  for (double v : out) l += v * v;
  return l;
}

double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max(1e-8, std::fabs(a) + std::fabs(b));
}

}  // namespace

TEST_CASE("init shapes, zero biases, and fan-in bounds") {
  Mlp net = init_mlp({8, 32, 16, 1}, Mlp::Act::tanh_act, 7);
  REQUIRE(net.layer_count() == 3);
  CHECK(net.W[0].size() == 32u * 8u);
  CHECK(net.W[1].size() == 16u * 32u);
  CHECK(net.W[2].size() == 1u * 16u);
  CHECK(net.input_size() == 8);
  CHECK(net.output_size() == 1);

  for (const auto& layer : net.b)
    for (double v : layer) CHECK(v == 0.0);

  const double fan_in[] = {8, 32, 16};
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    double bound = std::sqrt(6.0 / fan_in[l]);
    for (double w : net.W[l]) {
      CHECK(w <= bound);
      CHECK(w >= -bound);
    }
  }

  // seeded and reproducible
  Mlp again = init_mlp({8, 32, 16, 1}, Mlp::Act::tanh_act, 7);
  CHECK(flatten_params(net) == flatten_params(again));
  Mlp other = init_mlp({8, 32, 16, 1}, Mlp::Act::tanh_act, 8);
  CHECK(flatten_params(net) != flatten_params(other));

  CHECK_THROWS_AS(init_mlp({5}, Mlp::Act::tanh_act, 1), ConfigError);
  CHECK_THROWS_AS(init_mlp({0, 3}, Mlp::Act::tanh_act, 1), ConfigError);
}

TEST_CASE("forward matches a hand-wired 1-2-1 tanh net") {
  Mlp net;
  net.sizes = {1, 2, 1};
  net.hidden_act = Mlp::Act::tanh_act;
  net.W = {{0.5, -0.25}, {0.3, 0.7}};
  net.b = {{0.1, -0.2}, {0.05}};

  std::vector<double> out = forward(net, {2.0});
  REQUIRE(out.size() == 1);
  double h0 = std::tanh(0.5 * 2.0 + 0.1);
  double h1 = std::tanh(-0.25 * 2.0 - 0.2);
  CHECK(out[0] == doctest::Approx(0.3 * h0 + 0.7 * h1 + 0.05).epsilon(1e-12));

  CHECK_THROWS_AS(forward(net, {1.0, 2.0}), EngineError);
}

TEST_CASE("backward agrees with central differences") {
  struct Arch {
    std::vector<int> sizes;
    Mlp::Act act;
  };
  const Arch archs[] = {{{4, 5, 3}, Mlp::Act::tanh_act},
                        {{3, 4, 2}, Mlp::Act::relu_act}};
  const double h = 1e-6;

  for (const Arch& arch : archs) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      Mlp net = init_mlp(arch.sizes, arch.act, seed);
      Rng rng(seed * 977);
      std::vector<double> in(static_cast<std::size_t>(net.input_size()));
      for (double& v : in) v = rng.normal() * 0.7;

      ForwardCache cache;
      std::vector<double> out = forward(net, in, &cache);
      std::vector<double> dout(out.size());
      for (std::size_t k = 0; k < out.size(); ++k) dout[k] = 2.0 * out[k];

      Grads g = Grads::zeros_like(net);
      std::vector<double> din = backward(net, cache, dout, &g);
      std::vector<double> analytic = flatten_grads(g);

      std::vector<double> flat = flatten_params(net);
      for (std::size_t i = 0; i < flat.size(); ++i) {
        std::vector<double> bumped = flat;
        bumped[i] = flat[i] + h;
        unflatten_params(net, bumped);
        double up = probe_loss(net, in);
        bumped[i] = flat[i] - h;
        unflatten_params(net, bumped);
        double down = probe_loss(net, in);
        unflatten_params(net, flat);
        double numeric = (up - down) / (2 * h);
        CHECK(rel_err(analytic[i], numeric) < 1e-4);
      }

      // input gradient through the same oracle
      for (std::size_t i = 0; i < in.size(); ++i) {
        std::vector<double> bumped = in;
        bumped[i] = in[i] + h;
        double up = probe_loss(net, bumped);
        bumped[i] = in[i] - h;
        double down = probe_loss(net, bumped);
        double numeric = (up - down) / (2 * h);
        CHECK(rel_err(din[i], numeric) < 1e-4);
      }
    }
  }
}

TEST_CASE("softmax frozen values and masking") {
  std::vector<double> p = softmax({0.0, std::log(3.0)});
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-12));

  std::vector<char> mask = {1, 0, 1};
  std::vector<double> q = softmax({0.0, 100.0, 0.0}, &mask);
  CHECK(q[0] == doctest::Approx(0.5));
  CHECK(q[1] == 0.0);  // excluded is exactly zero, not just tiny
  CHECK(q[2] == doctest::Approx(0.5));

  // max subtraction keeps huge logits finite
  std::vector<double> big = softmax({1000.0, 1000.0});
  CHECK(big[0] == doctest::Approx(0.5));
  CHECK(std::isfinite(big[0]));

  std::vector<char> none = {0, 0};
  CHECK_THROWS_AS(softmax({1.0, 2.0}, &none), EngineError);
  std::vector<char> short_mask = {1};
  CHECK_THROWS_AS(softmax({1.0, 2.0}, &short_mask), EngineError);
}

TEST_CASE("adam first step moves a unit gradient by about lr") {
  Mlp net;
  net.sizes = {1, 1};
  net.hidden_act = Mlp::Act::tanh_act;
  net.W = {{0.5}};
  net.b = {{0.0}};
  AdamState opt = init_adam(net, 0.1);

  Grads g = Grads::zeros_like(net);
  g.W[0][0] = 1.0;
  g.b[0][0] = 1.0;
  REQUIRE(adam_step(net, opt, g));

  // bias correction makes m_hat = v_hat = 1 on step one
  CHECK(net.W[0][0] == doctest::Approx(0.4).epsilon(1e-7));
  CHECK(net.b[0][0] == doctest::Approx(-0.1).epsilon(1e-7));
  CHECK(opt.step == 1);

  CHECK_THROWS_AS(init_adam(net, 0.0), ConfigError);
}

TEST_CASE("non-finite gradients refuse the step") {
  Mlp net = init_mlp({2, 3, 1}, Mlp::Act::tanh_act, 3);
  AdamState opt = init_adam(net, 1e-3);
  std::vector<double> before = flatten_params(net);

  Grads g = Grads::zeros_like(net);
  g.W[0][1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(g.finite());
  CHECK_FALSE(adam_step(net, opt, g));
  CHECK(flatten_params(net) == before);
  CHECK(opt.step == 0);

  Grads inf = Grads::zeros_like(net);
  inf.b[1][0] = std::numeric_limits<double>::infinity();
  CHECK_FALSE(adam_step(net, opt, inf));
  CHECK(flatten_params(net) == before);
}

TEST_CASE("flatten and unflatten round trip") {
  Mlp net = init_mlp({3, 4, 2}, Mlp::Act::relu_act, 11);
  std::vector<double> flat = flatten_params(net);
  CHECK(flat.size() == 3u * 4 + 4 + 4 * 2 + 2);

  std::vector<double> scaled = flat;
  for (double& v : scaled) v *= 2.0;
  unflatten_params(net, scaled);
  CHECK(flatten_params(net) == scaled);

  scaled.push_back(0.0);
  CHECK_THROWS_AS(unflatten_params(net, scaled), EngineError);
}

TEST_CASE("json round trips preserve nets and optimizer state") {
  Mlp net = init_mlp({4, 6, 2}, Mlp::Act::tanh_act, 42);
  AdamState opt = init_adam(net, 5e-4);
  Grads g = Grads::zeros_like(net);
  for (auto& layer : g.W)
    for (double& v : layer) v = 0.01;
  REQUIRE(adam_step(net, opt, g));

  Mlp net2 = mlp_from_json(mlp_to_json(net));
  CHECK(net2.sizes == net.sizes);
  CHECK(net2.hidden_act == net.hidden_act);
  CHECK(flatten_params(net2) == flatten_params(net));

  AdamState opt2 = adam_from_json(adam_to_json(opt), net);
  CHECK(opt2.step == opt.step);
  CHECK(opt2.lr == opt.lr);
  CHECK(opt2.mW == opt.mW);
  CHECK(opt2.vW == opt.vW);

  // shape tampering is a data error, not a crash
  nlohmann::json bad = mlp_to_json(net);
  bad["weights"][0].push_back(1.0);
  CHECK_THROWS_AS(mlp_from_json(bad), DataError);
  nlohmann::json junk = {{"sizes", {4, 6, 2}}};
  CHECK_THROWS_AS(mlp_from_json(junk), DataError);

  Mlp smaller = init_mlp({4, 3, 2}, Mlp::Act::tanh_act, 1);
  CHECK_THROWS_AS(adam_from_json(adam_to_json(opt), smaller), DataError);
}
