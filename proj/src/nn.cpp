#include "gsched/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gsched/errors.hpp"
#include "gsched/rng.hpp"

namespace gsched {

Mlp init_mlp(const std::vector<int>& sizes, Mlp::Act hidden_act,
             std::uint64_t seed) {
  if (sizes.size() < 2) throw ConfigError("mlp needs at least two layer sizes");
  for (int s : sizes)
    if (s <= 0) throw ConfigError("mlp layer sizes must be positive");
  Mlp net;
  net.sizes = sizes;
  net.hidden_act = hidden_act;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    int fan_in = sizes[l];
    int fan_out = sizes[l + 1];
    double bound = std::sqrt(6.0 / fan_in);
    std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
    for (double& v : w) v = rng.uniform(-bound, bound);
    net.W.push_back(std::move(w));
    net.b.emplace_back(static_cast<std::size_t>(fan_out), 0.0);
  }
  return net;
}

namespace {

double act(double z, Mlp::Act a) {
  return a == Mlp::Act::tanh_act ? std::tanh(z) : (z > 0 ? z : 0.0);
}

double act_grad(double z, Mlp::Act a) {
  if (a == Mlp::Act::tanh_act) {
    double t = std::tanh(z);
    return 1.0 - t * t;
  }
  return z > 0 ? 1.0 : 0.0;
}

}  // namespace

std::vector<double> forward(const Mlp& net, const std::vector<double>& in,
                            ForwardCache* cache) {
  if (static_cast<int>(in.size()) != net.input_size())
    throw EngineError("mlp input size mismatch");
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  std::vector<double> x = in;
  const std::size_t layers = net.layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    if (cache) cache->inputs.push_back(x);
    const int out_n = net.sizes[l + 1];
    const int in_n = net.sizes[l];
    std::vector<double> z(static_cast<std::size_t>(out_n));
    const double* w = net.W[l].data();
    for (int o = 0; o < out_n; ++o) {
      double acc = net.b[l][static_cast<std::size_t>(o)];
      const double* wrow = w + static_cast<std::size_t>(o) * in_n;
      for (int i = 0; i < in_n; ++i) acc += wrow[i] * x[static_cast<std::size_t>(i)];
      z[static_cast<std::size_t>(o)] = acc;
    }
    if (cache) cache->pre.push_back(z);
    if (l + 1 == layers) {
      x = std::move(z);  // linear output
    } else {
      std::vector<double> a(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) a[i] = act(z[i], net.hidden_act);
      x = std::move(a);
    }
  }
  return x;
}

Grads Grads::zeros_like(const Mlp& net) {
  Grads g;
  g.W.reserve(net.W.size());
  g.b.reserve(net.b.size());
  for (const auto& w : net.W) g.W.emplace_back(w.size(), 0.0);
  for (const auto& b : net.b) g.b.emplace_back(b.size(), 0.0);
  return g;
}

void Grads::add(const Grads& other) {
  for (std::size_t l = 0; l < W.size(); ++l) {
    for (std::size_t i = 0; i < W[l].size(); ++i) W[l][i] += other.W[l][i];
    for (std::size_t i = 0; i < b[l].size(); ++i) b[l][i] += other.b[l][i];
  }
}

void Grads::scale(double f) {
  for (auto& w : W)
    for (double& v : w) v *= f;
  for (auto& b_ : b)
    for (double& v : b_) v *= f;
}

bool Grads::finite() const {
  for (const auto& w : W)
    for (double v : w)
      if (!std::isfinite(v)) return false;
  for (const auto& b_ : b)
    for (double v : b_)
      if (!std::isfinite(v)) return false;
  return true;
}

std::vector<double> backward(const Mlp& net, const ForwardCache& cache,
                             const std::vector<double>& dout, Grads* out) {
  const std::size_t layers = net.layer_count();
  if (cache.inputs.size() != layers || cache.pre.size() != layers)
    throw EngineError("forward cache does not match network");
  if (static_cast<int>(dout.size()) != net.output_size())
    throw EngineError("dout size mismatch");

  std::vector<double> dz = dout;  // output layer is linear
  for (std::size_t l = layers; l-- > 0;) {
    const int out_n = net.sizes[l + 1];
    const int in_n = net.sizes[l];
    if (l + 1 != layers) {
      // dz arrives as d(activation); fold in the activation derivative
      for (int o = 0; o < out_n; ++o)
        dz[static_cast<std::size_t>(o)] *=
            act_grad(cache.pre[l][static_cast<std::size_t>(o)], net.hidden_act);
    }
    const std::vector<double>& x = cache.inputs[l];
    if (out) {
      double* gw = out->W[l].data();
      for (int o = 0; o < out_n; ++o) {
        const double d = dz[static_cast<std::size_t>(o)];
        double* grow = gw + static_cast<std::size_t>(o) * in_n;
        for (int i = 0; i < in_n; ++i) grow[i] += d * x[static_cast<std::size_t>(i)];
        out->b[l][static_cast<std::size_t>(o)] += d;
      }
    }
    std::vector<double> dx(static_cast<std::size_t>(in_n), 0.0);
    const double* w = net.W[l].data();
    for (int o = 0; o < out_n; ++o) {
      const double d = dz[static_cast<std::size_t>(o)];
      const double* wrow = w + static_cast<std::size_t>(o) * in_n;
      for (int i = 0; i < in_n; ++i) dx[static_cast<std::size_t>(i)] += d * wrow[i];
    }
    dz = std::move(dx);
  }
  return dz;
}

std::vector<double> softmax(const std::vector<double>& logits,
                            const std::vector<char>* mask) {
  if (mask && mask->size() != logits.size())
    throw EngineError("softmax mask size mismatch");
  std::vector<double> out(logits.size(), 0.0);
  double max_v = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    max_v = std::max(max_v, logits[i]);
    any = true;
  }
  if (!any) throw EngineError("softmax over empty set");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    out[i] = std::exp(logits[i] - max_v);
    total += out[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= total;
  return out;
}

AdamState init_adam(const Mlp& net, double lr) {
  if (!(lr > 0)) throw ConfigError("adam lr must be positive");
  AdamState s;
  s.lr = lr;
  for (const auto& w : net.W) {
    s.mW.emplace_back(w.size(), 0.0);
    s.vW.emplace_back(w.size(), 0.0);
  }
  for (const auto& b : net.b) {
    s.mb.emplace_back(b.size(), 0.0);
    s.vb.emplace_back(b.size(), 0.0);
  }
  return s;
}

bool adam_step(Mlp& net, AdamState& opt, const Grads& g) {
  if (!g.finite()) return false;
  opt.step += 1;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  auto update = [&](std::vector<double>& p, std::vector<double>& m,
                    std::vector<double>& v, const std::vector<double>& grad) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * grad[i];
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
      double mhat = m[i] / c1;
      double vhat = v[i] / c2;
      p[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
    }
  };
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    update(net.W[l], opt.mW[l], opt.vW[l], g.W[l]);
    update(net.b[l], opt.mb[l], opt.vb[l], g.b[l]);
  }
  return true;
}

std::vector<double> flatten_params(const Mlp& net) {
  std::vector<double> flat;
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    flat.insert(flat.end(), net.W[l].begin(), net.W[l].end());
    flat.insert(flat.end(), net.b[l].begin(), net.b[l].end());
  }
  return flat;
}

void unflatten_params(Mlp& net, const std::vector<double>& flat) {
  std::size_t pos = 0;
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    for (double& v : net.W[l]) v = flat.at(pos++);
    for (double& v : net.b[l]) v = flat.at(pos++);
  }
  if (pos != flat.size()) throw EngineError("flat parameter size mismatch");
}

std::vector<double> flatten_grads(const Grads& g) {
  std::vector<double> flat;
  for (std::size_t l = 0; l < g.W.size(); ++l) {
    flat.insert(flat.end(), g.W[l].begin(), g.W[l].end());
    flat.insert(flat.end(), g.b[l].begin(), g.b[l].end());
  }
  return flat;
}

nlohmann::json mlp_to_json(const Mlp& net) {
  nlohmann::json j;
  j["sizes"] = net.sizes;
  j["activation"] = net.hidden_act == Mlp::Act::tanh_act ? "tanh" : "relu";
  j["weights"] = net.W;
  j["biases"] = net.b;
  return j;
}

Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp net;
  try {
    net.sizes = j.at("sizes").get<std::vector<int>>();
    std::string a = j.at("activation").get<std::string>();
    if (a == "tanh") net.hidden_act = Mlp::Act::tanh_act;
    else if (a == "relu") net.hidden_act = Mlp::Act::relu_act;
    else throw DataError("unknown activation: " + a);
    net.W = j.at("weights").get<std::vector<std::vector<double>>>();
    net.b = j.at("biases").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed network json: ") + e.what());
  }
  if (net.sizes.size() < 2 || net.W.size() != net.sizes.size() - 1 ||
      net.b.size() != net.W.size())
    throw DataError("network json has inconsistent shapes");
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    if (net.W[l].size() != static_cast<std::size_t>(net.sizes[l]) *
                               static_cast<std::size_t>(net.sizes[l + 1]) ||
        net.b[l].size() != static_cast<std::size_t>(net.sizes[l + 1]))
      throw DataError("network json layer shape mismatch");
  }
  return net;
}

nlohmann::json adam_to_json(const AdamState& opt) {
  nlohmann::json j;
  j["lr"] = opt.lr;
  j["beta1"] = opt.beta1;
  j["beta2"] = opt.beta2;
  j["eps"] = opt.eps;
  j["step"] = opt.step;
  j["mW"] = opt.mW;
  j["vW"] = opt.vW;
  j["mb"] = opt.mb;
  j["vb"] = opt.vb;
  return j;
}

AdamState adam_from_json(const nlohmann::json& j, const Mlp& net) {
  AdamState s;
  try {
    s.lr = j.at("lr").get<double>();
    s.beta1 = j.at("beta1").get<double>();
    s.beta2 = j.at("beta2").get<double>();
    s.eps = j.at("eps").get<double>();
    s.step = j.at("step").get<std::int64_t>();
    s.mW = j.at("mW").get<std::vector<std::vector<double>>>();
    s.vW = j.at("vW").get<std::vector<std::vector<double>>>();
    s.mb = j.at("mb").get<std::vector<std::vector<double>>>();
    s.vb = j.at("vb").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed optimizer json: ") + e.what());
  }
  auto shape_ok = [&](const std::vector<std::vector<double>>& a,
                      const std::vector<std::vector<double>>& ref) {
    if (a.size() != ref.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].size() != ref[i].size()) return false;
    return true;
  };
  if (!shape_ok(s.mW, net.W) || !shape_ok(s.vW, net.W) ||
      !shape_ok(s.mb, net.b) || !shape_ok(s.vb, net.b))
    throw DataError("optimizer json does not match network shape");
  return s;
}

}  // namespace gsched
