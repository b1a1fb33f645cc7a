#pragma once

#include <memory>
#include <string>
#include <vector>

#include "varprec/optimizer.hpp"
#include "varprec/rng.hpp"
#include "varprec/tensor.hpp"

namespace varprec::nn {

enum class Act { Identity, Sigmoid, Tanh, Elu, Softplus };

Act act_from_string(const std::string& s);
std::string act_to_string(Act a);

nd::Tensor activate(const nd::Tensor& x, Act act);

// Fully connected layer, Glorot-uniform weight init, zero bias.
struct Dense {
  nd::Tensor w, b;

  Dense() = default;
  Dense(nd::ParamStore& store, const std::string& name, int in, int out, Rng& rng);

  nd::Tensor operator()(const nd::Tensor& x) const;
};

// Standard batch normalization over the batch axis of a (n, d) tensor.
// Training mode uses batch statistics and updates running buffers;
// eval mode reads the running buffers as constants.
struct BatchNorm {
  nd::Tensor gamma, shift;
  std::shared_ptr<std::vector<double>> running_mean, running_var;
  double momentum = 0.99;
  double epsilon = 1e-3;

  BatchNorm() = default;
  BatchNorm(nd::ParamStore& store, const std::string& name, int width);

  nd::Tensor operator()(const nd::Tensor& x, bool training) const;
};

// Hidden stack: Dense -> (BatchNorm) -> activation per layer.
struct Mlp {
  std::vector<Dense> layers;
  std::vector<BatchNorm> norms;
  Act hidden_act = Act::Elu;
  bool batch_norm = false;

  Mlp() = default;
  Mlp(nd::ParamStore& store, const std::string& name, int in, const std::vector<int>& hidden,
      Act act, bool use_batch_norm, Rng& rng);

  int out_dim = 0;
  nd::Tensor operator()(const nd::Tensor& x, bool training) const;
};

}  // namespace varprec::nn
