#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace gsched {

// Dense MLP, float64, linear output layer. Small enough that the whole
// parameter set lives in plain vectors; W[l] is (sizes[l+1] x sizes[l])
// row-major.
struct Mlp {
  enum class Act { tanh_act, relu_act };

  std::vector<int> sizes;
  Act hidden_act = Act::tanh_act;
  std::vector<std::vector<double>> W;
  std::vector<std::vector<double>> b;

  int input_size() const { return sizes.front(); }
  int output_size() const { return sizes.back(); }
  std::size_t layer_count() const { return W.size(); }
};

// scaled-uniform fan-in init: U(-sqrt(6/fan_in), +sqrt(6/fan_in)), zero biases
Mlp init_mlp(const std::vector<int>& sizes, Mlp::Act hidden_act,
             std::uint64_t seed);

struct ForwardCache {
  std::vector<std::vector<double>> inputs;  // inputs.front() is the net input
  std::vector<std::vector<double>> pre;     // pre-activation per layer
};

std::vector<double> forward(const Mlp& net, const std::vector<double>& in,
                            ForwardCache* cache = nullptr);

struct Grads {
  std::vector<std::vector<double>> W;
  std::vector<std::vector<double>> b;

  static Grads zeros_like(const Mlp& net);
  void add(const Grads& other);
  void scale(double f);
  bool finite() const;
};

// Exact reverse-mode pass; returns dL/dinput and accumulates into `out`.
// `dout` is dL/doutput for the cached forward.
std::vector<double> backward(const Mlp& net, const ForwardCache& cache,
                             const std::vector<double>& dout, Grads* out);

// Max-subtracted softmax. With a mask, excluded entries are exactly 0 and
// the kept ones sum to 1; mask[i] != 0 keeps entry i.
std::vector<double> softmax(const std::vector<double>& logits,
                            const std::vector<char>* mask = nullptr);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<double>> mW, vW, mb, vb;
};

AdamState init_adam(const Mlp& net, double lr);

// Bias-corrected update. Non-finite gradients refuse the step and leave both
// params and optimizer state untouched; returns whether the step applied.
bool adam_step(Mlp& net, AdamState& opt, const Grads& g);

// flat views used by the gradient checker and the checkpoint format
std::vector<double> flatten_params(const Mlp& net);
void unflatten_params(Mlp& net, const std::vector<double>& flat);
std::vector<double> flatten_grads(const Grads& g);

nlohmann::json mlp_to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& j);
nlohmann::json adam_to_json(const AdamState& opt);
AdamState adam_from_json(const nlohmann::json& j, const Mlp& net);

}  // namespace gsched
