#include "varprec/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace varprec::nn {

using nd::Tensor;

Act act_from_string(const std::string& s) {
  if (s == "identity") return Act::Identity;
  if (s == "sigmoid") return Act::Sigmoid;
  if (s == "tanh") return Act::Tanh;
  if (s == "elu") return Act::Elu;
  if (s == "softplus") return Act::Softplus;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

std::string act_to_string(Act a) {
  switch (a) {
    case Act::Identity: return "identity";
    case Act::Sigmoid: return "sigmoid";
    case Act::Tanh: return "tanh";
    case Act::Elu: return "elu";
    case Act::Softplus: return "softplus";
  }
  return "identity";
}

Tensor activate(const Tensor& x, Act act) {
  switch (act) {
    case Act::Identity: return x;
    case Act::Sigmoid: return nd::sigmoid(x);
    case Act::Tanh: return nd::tanh(x);
    case Act::Elu: return nd::elu(x);
    case Act::Softplus: return nd::softplus(x);
  }
  return x;
}

Dense::Dense(nd::ParamStore& store, const std::string& name, int in, int out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::vector<double> wdata(static_cast<std::size_t>(in) * static_cast<std::size_t>(out));
  for (auto& v : wdata) v = rng.uniform(-limit, limit);
  w = store.add(name + ".w", Tensor::param({in, out}, std::move(wdata)));
  b = store.add(name + ".b", Tensor::param({out}, std::vector<double>(static_cast<std::size_t>(out), 0.0)));
}

Tensor Dense::operator()(const Tensor& x) const { return nd::matmul(x, w) + b; }

BatchNorm::BatchNorm(nd::ParamStore& store, const std::string& name, int width) {
  gamma = store.add(name + ".gamma", Tensor::param({width}, std::vector<double>(static_cast<std::size_t>(width), 1.0)));
  shift = store.add(name + ".shift", Tensor::param({width}, std::vector<double>(static_cast<std::size_t>(width), 0.0)));
  running_mean = store.add_buffer(name + ".running_mean", std::vector<double>(static_cast<std::size_t>(width), 0.0));
  running_var = store.add_buffer(name + ".running_var", std::vector<double>(static_cast<std::size_t>(width), 1.0));
}

Tensor BatchNorm::operator()(const Tensor& x, bool training) const {
  if (x.rank() != 2) throw std::invalid_argument("BatchNorm: expects (n, d) input");
  const std::int64_t d = x.dim(1);
  if (d != gamma.size()) throw std::invalid_argument("BatchNorm: width mismatch");
  if (training) {
    Tensor m = nd::mean_axis0(x);
    Tensor centered = x - m;
    Tensor var = nd::mean_axis0(nd::square(centered));
    // update running buffers outside the graph
    auto mv = m.values();
    auto vv = var.values();
    for (std::int64_t j = 0; j < d; ++j) {
      (*running_mean)[static_cast<std::size_t>(j)] =
          momentum * (*running_mean)[static_cast<std::size_t>(j)] + (1.0 - momentum) * mv[static_cast<std::size_t>(j)];
      (*running_var)[static_cast<std::size_t>(j)] =
          momentum * (*running_var)[static_cast<std::size_t>(j)] + (1.0 - momentum) * vv[static_cast<std::size_t>(j)];
    }
    Tensor norm = centered / nd::sqrt(var + epsilon);
    return norm * gamma + shift;
  }
  Tensor m = Tensor::from({d}, *running_mean);
  Tensor v = Tensor::from({d}, *running_var);
  Tensor norm = (x - m) / nd::sqrt(v + epsilon);
  return norm * gamma + shift;
}

Mlp::Mlp(nd::ParamStore& store, const std::string& name, int in, const std::vector<int>& hidden,
         Act act, bool use_batch_norm, Rng& rng)
    : hidden_act(act), batch_norm(use_batch_norm) {
  int cur = in;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    layers.emplace_back(store, name + ".h" + std::to_string(i), cur, hidden[i], rng);
    if (use_batch_norm) norms.emplace_back(store, name + ".bn" + std::to_string(i), hidden[i]);
    cur = hidden[i];
  }
  out_dim = cur;
}

Tensor Mlp::operator()(const Tensor& x, bool training) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    if (batch_norm) h = norms[i](h, training);
    h = activate(h, hidden_act);
  }
  return h;
}

}  // namespace varprec::nn
