// Finite-difference gradient checks shared by the unit tests and the
// acceptance suite.
#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "varprec/rng.hpp"
#include "varprec/tensor.hpp"

namespace gradcheck {

// Rebuilds the loss graph via `build_loss`, runs backward once, then compares
// the accumulated gradient of each listed leaf against central finite
// differences at `points` random coordinates per leaf.
inline bool check_gradients(const std::function<varprec::nd::Tensor()>& build_loss,
                            std::vector<varprec::nd::Tensor> leaves, int points, double rel_tol,
                            double h, varprec::Rng& rng, std::string* detail = nullptr) {
  namespace nd = varprec::nd;
  for (auto& leaf : leaves) leaf.zero_grad();
  nd::Tensor loss = build_loss();
  nd::backward(loss);
  auto eval = [&]() { return build_loss().value(); };
  bool ok = true;
  std::ostringstream msg;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto& leaf = leaves[li];
    auto g = leaf.grad();
    if (g.empty()) {
      ok = false;
      msg << "leaf " << li << " received no gradient; ";
      continue;
    }
    const std::int64_t n = leaf.size();
    for (int p = 0; p < points; ++p) {
      const std::int64_t i = (n == 1) ? 0 : rng.uniform_int(n);
      const double fd = oracles::finite_difference(eval, leaf, i, h);
      const double ad = g[static_cast<std::size_t>(i)];
      const double err = std::fabs(ad - fd);
      const double scale = std::fmax(1.0, std::fmax(std::fabs(ad), std::fabs(fd)));
      if (!(err <= rel_tol * scale)) {
        ok = false;
        msg << "leaf " << li << "[" << i << "]: autodiff " << ad << " vs fd " << fd << "; ";
      }
    }
  }
  if (detail) *detail = msg.str();
  return ok;
}

struct OpCase {
  std::string name;
  std::function<varprec::nd::Tensor(const std::vector<varprec::nd::Tensor>&)> apply;
  std::vector<varprec::nd::Shape> input_shapes;
  double lo, hi;     // input value range
  double rel_tol;
};

// the differentiable op vocabulary with domain-appropriate inputs
std::vector<OpCase> op_cases();

// runs the finite-difference suite over every op case; returns failures
inline std::vector<std::string> run_op_gradient_suite(varprec::Rng& rng) {
  namespace nd = varprec::nd;
  std::vector<std::string> failures;
  for (const auto& oc : op_cases()) {
    std::vector<nd::Tensor> leaves;
    for (const auto& shape : oc.input_shapes) {
      std::vector<double> data(static_cast<std::size_t>(nd::numel(shape)));
      for (auto& v : data) v = rng.uniform(oc.lo, oc.hi);
      leaves.push_back(nd::Tensor::param(shape, std::move(data)));
    }
    // fixed random projection makes the scalar loss sensitive to every element
    nd::Tensor probe_holder;
    auto build = [&]() {
      nd::Tensor out = oc.apply(leaves);
      if (!probe_holder.defined()) {
        std::vector<double> w(static_cast<std::size_t>(out.size()));
        for (auto& v : w) v = rng.uniform(-1.0, 1.0);
        probe_holder = nd::Tensor::from(out.shape(), std::move(w));
      }
      return nd::sum(out * probe_holder);
    };
    std::string detail;
    if (!check_gradients(build, leaves, 10, oc.rel_tol, 1e-6, rng, &detail))
      failures.push_back(oc.name + ": " + detail);
  }
  return failures;
}

inline std::vector<OpCase> op_cases_impl() {
  namespace nd = varprec::nd;
  using In = const std::vector<nd::Tensor>&;
  std::vector<OpCase> cases;
  auto add = [&](std::string name, std::function<nd::Tensor(In)> f, std::vector<nd::Shape> shapes,
                 double lo, double hi, double tol) {
    cases.push_back({std::move(name), std::move(f), std::move(shapes), lo, hi, tol});
  };
  add("add", [](In x) { return nd::add(x[0], x[1]); }, {{3, 4}, {3, 4}}, -2, 2, 1e-4);
  add("add_broadcast", [](In x) { return nd::add(x[0], x[1]); }, {{3, 4}, {4}}, -2, 2, 1e-4);
  add("sub", [](In x) { return nd::sub(x[0], x[1]); }, {{3, 4}, {3, 4}}, -2, 2, 1e-4);
  add("mul", [](In x) { return nd::mul(x[0], x[1]); }, {{3, 4}, {3, 4}}, -2, 2, 1e-4);
  add("mul_broadcast", [](In x) { return nd::mul(x[0], x[1]); }, {{3, 4}, {3, 1}}, -2, 2, 1e-4);
  add("div", [](In x) { return nd::div(x[0], x[1]); }, {{3, 4}, {3, 4}}, 0.5, 2.5, 1e-4);
  add("neg", [](In x) { return nd::neg(x[0]); }, {{3, 4}}, -2, 2, 1e-4);
  add("matmul", [](In x) { return nd::matmul(x[0], x[1]); }, {{3, 4}, {4, 5}}, -1.5, 1.5, 1e-4);
  add("transpose", [](In x) { return nd::transpose(x[0]); }, {{3, 4}}, -2, 2, 1e-4);
  add("reshape", [](In x) { return nd::reshape(x[0], {4, 3}); }, {{3, 4}}, -2, 2, 1e-4);
  add("sum", [](In x) { return nd::sum(x[0]); }, {{3, 4}}, -2, 2, 1e-4);
  add("mean", [](In x) { return nd::mean(x[0]); }, {{3, 4}}, -2, 2, 1e-4);
  add("sum_last", [](In x) { return nd::sum_last(x[0]); }, {{3, 4}}, -2, 2, 1e-4);
  add("mean_axis0", [](In x) { return nd::mean_axis0(x[0]); }, {{3, 4}}, -2, 2, 1e-4);
  add("exp", [](In x) { return nd::exp(x[0]); }, {{3, 4}}, -2, 2, 1e-4);
  add("log", [](In x) { return nd::log(x[0]); }, {{3, 4}}, 0.2, 3, 1e-4);
  add("square", [](In x) { return nd::square(x[0]); }, {{3, 4}}, -2, 2, 1e-4);
  add("sqrt", [](In x) { return nd::sqrt(x[0]); }, {{3, 4}}, 0.2, 3, 1e-4);
  add("sigmoid", [](In x) { return nd::sigmoid(x[0]); }, {{3, 4}}, -3, 3, 1e-4);
  add("tanh", [](In x) { return nd::tanh(x[0]); }, {{3, 4}}, -3, 3, 1e-4);
  add("elu", [](In x) { return nd::elu(x[0]); }, {{3, 4}}, -3, 3, 1e-4);
  add("softplus", [](In x) { return nd::softplus(x[0]); }, {{3, 4}}, -3, 3, 1e-4);
  add("softmax", [](In x) { return nd::softmax(x[0]); }, {{3, 4}}, -3, 3, 1e-4);
  add("log_sum_exp", [](In x) { return nd::log_sum_exp(x[0]); }, {{3, 4}}, -3, 3, 1e-4);
  add("lgamma", [](In x) { return nd::lgamma(x[0]); }, {{3, 4}}, 0.1, 4, 1e-3);
  add("digamma", [](In x) { return nd::digamma(x[0]); }, {{3, 4}}, 0.1, 4, 1e-3);
  add("clamp_min", [](In x) { return nd::clamp_min(x[0], 0.5); }, {{3, 4}}, 0.6, 3, 1e-4);
  return cases;
}

inline std::vector<OpCase> op_cases() { return op_cases_impl(); }

}  // namespace gradcheck
