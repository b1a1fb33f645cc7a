#include "varprec/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "varprec/special.hpp"

namespace varprec::nd {

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw std::invalid_argument("negative tensor extent");
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ")";
  return os.str();
}

namespace {

using detail::Node;

std::shared_ptr<Node> new_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
  const auto n = numel(shape);
  if (static_cast<std::int64_t>(data.size()) != n)
    throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(data);
  node->requires_grad = requires_grad;
  return node;
}

Tensor make_result(Shape shape, std::vector<double> values,
                   std::vector<std::shared_ptr<Node>> parents,
                   std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  node->requires_grad = rg;
  if (rg) {
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor::wrap(std::move(node));
}

// ---- broadcasting over trailing axes ------------------------------------

struct BcastPlan {
  Shape out;
  std::vector<std::int64_t> sa, sb;  // per-axis strides into a and b (0 = broadcast)
  std::int64_t n = 1;
  bool same_shape = false;
};

std::vector<std::int64_t> row_major_strides(const Shape& s) {
  std::vector<std::int64_t> st(s.size(), 0);
  std::int64_t acc = 1;
  for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
    st[static_cast<std::size_t>(i)] = acc;
    acc *= s[static_cast<std::size_t>(i)];
  }
  return st;
}

BcastPlan make_plan(const char* op, const Shape& a, const Shape& b) {
  BcastPlan plan;
  if (a == b) {
    plan.out = a;
    plan.n = numel(a);
    plan.same_shape = true;
    return plan;
  }
  const int ra = static_cast<int>(a.size());
  const int rb = static_cast<int>(b.size());
  const int r = std::max(ra, rb);
  plan.out.assign(static_cast<std::size_t>(r), 1);
  const auto stra = row_major_strides(a);
  const auto strb = row_major_strides(b);
  plan.sa.assign(static_cast<std::size_t>(r), 0);
  plan.sb.assign(static_cast<std::size_t>(r), 0);
  for (int k = 0; k < r; ++k) {  // k counts from the trailing axis
    const std::int64_t ad = (k < ra) ? a[static_cast<std::size_t>(ra - 1 - k)] : 1;
    const std::int64_t bd = (k < rb) ? b[static_cast<std::size_t>(rb - 1 - k)] : 1;
    if (ad != bd && ad != 1 && bd != 1)
      throw std::invalid_argument(std::string(op) + ": shapes not broadcastable: " +
                                  shape_str(a) + " vs " + shape_str(b));
    const std::int64_t od = std::max(ad, bd);
    const std::size_t j = static_cast<std::size_t>(r - 1 - k);
    plan.out[j] = od;
    if (k < ra && ad == od) plan.sa[j] = stra[static_cast<std::size_t>(ra - 1 - k)];
    if (k < rb && bd == od) plan.sb[j] = strb[static_cast<std::size_t>(rb - 1 - k)];
  }
  plan.n = numel(plan.out);
  return plan;
}

template <class F>
void for_each_pair(const BcastPlan& p, F&& f) {
  if (p.n == 0) return;
  const int r = static_cast<int>(p.out.size());
  if (r == 0) {
    f(0, 0, 0);
    return;
  }
  std::vector<std::int64_t> coord(static_cast<std::size_t>(r), 0);
  std::int64_t ia = 0, ib = 0;
  for (std::int64_t i = 0;; ++i) {
    f(i, ia, ib);
    int j = r - 1;
    for (; j >= 0; --j) {
      const auto ju = static_cast<std::size_t>(j);
      ++coord[ju];
      ia += p.sa[ju];
      ib += p.sb[ju];
      if (coord[ju] < p.out[ju]) break;
      ia -= p.sa[ju] * p.out[ju];
      ib -= p.sb[ju] * p.out[ju];
      coord[ju] = 0;
    }
    if (j < 0) break;
  }
}

using Fn2 = double (*)(double, double);
using DFn2 = double (*)(double, double, double);  // (a, b, out) -> partial

Tensor binary_op(const char* name, const Tensor& ta, const Tensor& tb, Fn2 f, DFn2 dfa, DFn2 dfb) {
  if (!ta.defined() || !tb.defined()) throw std::invalid_argument(std::string(name) + ": undefined operand");
  auto na = ta.node();
  auto nb = tb.node();
  BcastPlan plan = make_plan(name, na->shape, nb->shape);
  std::vector<double> out(static_cast<std::size_t>(plan.n));
  const double* av = na->values.data();
  const double* bv = nb->values.data();
  if (plan.same_shape) {
    for (std::int64_t i = 0; i < plan.n; ++i)
      out[static_cast<std::size_t>(i)] = f(av[i], bv[i]);
  } else {
    for_each_pair(plan, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
      out[static_cast<std::size_t>(i)] = f(av[ia], bv[ib]);
    });
  }
  auto backward = [na, nb, plan, dfa, dfb](Node& o) {
    const double* g = o.grad.data();
    const double* av2 = na->values.data();
    const double* bv2 = nb->values.data();
    const double* ov = o.values.data();
    double* ga = na->requires_grad ? na->ensure_grad().data() : nullptr;
    double* gb = nb->requires_grad ? nb->ensure_grad().data() : nullptr;
    if (plan.same_shape) {
      for (std::int64_t i = 0; i < plan.n; ++i) {
        if (ga) ga[i] += g[i] * dfa(av2[i], bv2[i], ov[i]);
        if (gb) gb[i] += g[i] * dfb(av2[i], bv2[i], ov[i]);
      }
    } else {
      for_each_pair(plan, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
        if (ga) ga[ia] += g[i] * dfa(av2[ia], bv2[ib], ov[i]);
        if (gb) gb[ib] += g[i] * dfb(av2[ia], bv2[ib], ov[i]);
      });
    }
  };
  return make_result(plan.out, std::move(out), {na, nb}, std::move(backward));
}

using Fn1 = double (*)(double);
using DFn1 = double (*)(double, double);  // (x, y) -> dy/dx

Tensor unary_op(const char* name, const Tensor& ta, Fn1 f, DFn1 df) {
  if (!ta.defined()) throw std::invalid_argument(std::string(name) + ": undefined operand");
  auto na = ta.node();
  const std::int64_t n = na->size();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = f(na->values[static_cast<std::size_t>(i)]);
  auto backward = [na, df, n](Node& o) {
    if (!na->requires_grad) return;
    double* ga = na->ensure_grad().data();
    const double* g = o.grad.data();
    const double* x = na->values.data();
    const double* y = o.values.data();
    for (std::int64_t i = 0; i < n; ++i) ga[i] += g[i] * df(x[i], y[i]);
  };
  return make_result(na->shape, std::move(out), {na}, std::move(backward));
}

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

}  // namespace

// ---- Tensor basics --------------------------------------------------------

Tensor Tensor::wrap(std::shared_ptr<detail::Node> n) {
  Tensor t;
  t.node_ = std::move(n);
  return t;
}

Tensor Tensor::zeros(Shape shape) {
  auto n = numel(shape);
  return wrap(new_leaf(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0), false));
}

Tensor Tensor::full(Shape shape, double value) {
  auto n = numel(shape);
  return wrap(new_leaf(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value), false));
}

Tensor Tensor::from(Shape shape, std::vector<double> data) {
  return wrap(new_leaf(std::move(shape), std::move(data), false));
}

Tensor Tensor::scalar(double value) { return wrap(new_leaf({}, {value}, false)); }

Tensor Tensor::param(Shape shape, std::vector<double> data) {
  return wrap(new_leaf(std::move(shape), std::move(data), true));
}

const Shape& Tensor::shape() const { return node_->shape; }
std::int64_t Tensor::size() const { return node_->size(); }

std::int64_t Tensor::dim(int axis) const {
  const auto& s = shape();
  if (axis < 0) axis += static_cast<int>(s.size());
  return s.at(static_cast<std::size_t>(axis));
}

std::span<const double> Tensor::values() const { return node_->values; }
std::span<double> Tensor::mutable_values() { return node_->values; }

double Tensor::value() const {
  if (size() != 1) throw std::invalid_argument("Tensor::value: tensor of size " + std::to_string(size()) + " is not a scalar");
  return node_->values[0];
}

double Tensor::at(std::int64_t i) const { return node_->values.at(static_cast<std::size_t>(i)); }

bool Tensor::requires_grad() const { return node_->requires_grad; }
std::span<const double> Tensor::grad() const { return node_->grad; }
void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const {
  return wrap(new_leaf(node_->shape, node_->values, false));
}

// ---- elementwise ops -------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double o) { return -o / y; });
}

Tensor neg(const Tensor& a) {
  return unary_op(
      "neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_op(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor square(const Tensor& a) {
  return unary_op(
      "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sqrt(const Tensor& a) {
  return unary_op(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      "sigmoid", a,
      [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor elu(const Tensor& a) {
  return unary_op(
      "elu", a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
      [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; });
}

Tensor softplus(const Tensor& a) {
  return unary_op(
      "softplus", a, [](double x) { return special::softplus(x); },
      [](double x, double) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); });
}

Tensor lgamma(const Tensor& a) {
  return unary_op(
      "lgamma", a, [](double x) { return x > 0.0 ? special::log_gamma(x) : kNan; },
      [](double x, double) { return x > 0.0 ? special::digamma(x) : kNan; });
}

Tensor digamma(const Tensor& a) {
  return unary_op(
      "digamma", a, [](double x) { return x > 0.0 ? special::digamma(x) : kNan; },
      [](double x, double) { return x > 0.0 ? special::trigamma(x) : kNan; });
}

Tensor clamp_min(const Tensor& a, double floor) {
  auto na = a.node();
  const std::int64_t n = na->size();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = std::fmax(na->values[static_cast<std::size_t>(i)], floor);
  auto backward = [na, floor, n](Node& o) {
    if (!na->requires_grad) return;
    double* ga = na->ensure_grad().data();
    const double* g = o.grad.data();
    const double* x = na->values.data();
    for (std::int64_t i = 0; i < n; ++i)
      if (x[i] > floor) ga[i] += g[i];
  };
  return make_result(na->shape, std::move(out), {na}, std::move(backward));
}

// ---- matmul / transpose / reshape -------------------------------------------

namespace {

// C(n,m) = A(n,k) B(k,m)
void mm(const double* A, const double* B, double* C, std::int64_t n, std::int64_t k, std::int64_t m) {
  std::fill(C, C + n * m, 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t kk = 0; kk < k; ++kk) {
      const double a = A[i * k + kk];
      if (a == 0.0) continue;
      const double* brow = B + kk * m;
      double* crow = C + i * m;
      for (std::int64_t j = 0; j < m; ++j) crow[j] += a * brow[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  auto na = a.node();
  auto nb = b.node();
  if (na->shape.size() != 2 || nb->shape.size() != 2)
    throw std::invalid_argument("matmul: expects rank-2 operands, got " + shape_str(na->shape) +
                                " and " + shape_str(nb->shape));
  const std::int64_t n = na->shape[0], k = na->shape[1], k2 = nb->shape[0], m = nb->shape[1];
  if (k != k2)
    throw std::invalid_argument("matmul: inner extents differ: " + shape_str(na->shape) + " vs " +
                                shape_str(nb->shape));
  std::vector<double> out(static_cast<std::size_t>(n * m));
  mm(na->values.data(), nb->values.data(), out.data(), n, k, m);
  auto backward = [na, nb, n, k, m](Node& o) {
    const double* g = o.grad.data();
    if (na->requires_grad) {
      double* ga = na->ensure_grad().data();
      const double* B = nb->values.data();
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t kk = 0; kk < k; ++kk) {
          const double* grow = g + i * m;
          const double* brow = B + kk * m;
          double acc = 0.0;
          for (std::int64_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
          ga[i * k + kk] += acc;
        }
    }
    if (nb->requires_grad) {
      double* gb = nb->ensure_grad().data();
      const double* A = na->values.data();
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t kk = 0; kk < k; ++kk) {
          const double aik = A[i * k + kk];
          if (aik == 0.0) continue;
          const double* grow = g + i * m;
          double* gbrow = gb + kk * m;
          for (std::int64_t j = 0; j < m; ++j) gbrow[j] += aik * grow[j];
        }
    }
  };
  return make_result({n, m}, std::move(out), {na, nb}, std::move(backward));
}

Tensor transpose(const Tensor& a) {
  auto na = a.node();
  if (na->shape.size() != 2)
    throw std::invalid_argument("transpose: expects rank-2 operand, got " + shape_str(na->shape));
  const std::int64_t n = na->shape[0], m = na->shape[1];
  std::vector<double> out(static_cast<std::size_t>(n * m));
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < m; ++j) out[static_cast<std::size_t>(j * n + i)] = na->values[static_cast<std::size_t>(i * m + j)];
  auto backward = [na, n, m](Node& o) {
    if (!na->requires_grad) return;
    double* ga = na->ensure_grad().data();
    const double* g = o.grad.data();
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < m; ++j) ga[i * m + j] += g[j * n + i];
  };
  return make_result({m, n}, std::move(out), {na}, std::move(backward));
}

Tensor reshape(const Tensor& a, Shape shape) {
  auto na = a.node();
  if (numel(shape) != na->size())
    throw std::invalid_argument("reshape: cannot view " + shape_str(na->shape) + " as " + shape_str(shape));
  std::vector<double> out = na->values;
  auto backward = [na](Node& o) {
    if (!na->requires_grad) return;
    double* ga = na->ensure_grad().data();
    const double* g = o.grad.data();
    for (std::int64_t i = 0; i < o.size(); ++i) ga[i] += g[i];
  };
  return make_result(std::move(shape), std::move(out), {na}, std::move(backward));
}

// ---- reductions --------------------------------------------------------------

Tensor sum(const Tensor& a) {
  auto na = a.node();
  double acc = 0.0;
  for (double v : na->values) acc += v;
  auto backward = [na](Node& o) {
    if (!na->requires_grad) return;
    double* ga = na->ensure_grad().data();
    const double g = o.grad[0];
    for (std::int64_t i = 0; i < na->size(); ++i) ga[i] += g;
  };
  return make_result({}, {acc}, {na}, std::move(backward));
}

Tensor mean(const Tensor& a) {
  auto na = a.node();
  if (na->size() == 0) throw std::invalid_argument("mean: empty tensor");
  double acc = 0.0;
  for (double v : na->values) acc += v;
  const double inv = 1.0 / static_cast<double>(na->size());
  auto backward = [na, inv](Node& o) {
    if (!na->requires_grad) return;
    double* ga = na->ensure_grad().data();
    const double g = o.grad[0] * inv;
    for (std::int64_t i = 0; i < na->size(); ++i) ga[i] += g;
  };
  return make_result({}, {acc * inv}, {na}, std::move(backward));
}

namespace {

// rows/cols split for trailing-axis ops
std::pair<std::int64_t, std::int64_t> rows_cols(const Shape& s, const char* op) {
  if (s.empty()) throw std::invalid_argument(std::string(op) + ": requires rank >= 1");
  const std::int64_t d = s.back();
  std::int64_t rows = 1;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) rows *= s[i];
  return {rows, d};
}

Shape drop_last(const Shape& s) { return Shape(s.begin(), s.end() - 1); }

}  // namespace

Tensor sum_last(const Tensor& a) {
  auto na = a.node();
  const auto [rows, d] = rows_cols(na->shape, "sum_last");
  std::vector<double> out(static_cast<std::size_t>(rows), 0.0);
  for (std::int64_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    const double* x = na->values.data() + r * d;
    for (std::int64_t j = 0; j < d; ++j) acc += x[j];
    out[static_cast<std::size_t>(r)] = acc;
  }
  auto backward = [na, rows = rows, d = d](Node& o) {
    if (!na->requires_grad) return;
    double* ga = na->ensure_grad().data();
    const double* g = o.grad.data();
    for (std::int64_t r = 0; r < rows; ++r)
      for (std::int64_t j = 0; j < d; ++j) ga[r * d + j] += g[r];
  };
  return make_result(drop_last(na->shape), std::move(out), {na}, std::move(backward));
}

Tensor mean_axis0(const Tensor& a) {
  auto na = a.node();
  if (na->shape.size() != 2) throw std::invalid_argument("mean_axis0: expects rank-2 operand");
  const std::int64_t n = na->shape[0], d = na->shape[1];
  if (n == 0) throw std::invalid_argument("mean_axis0: empty tensor");
  std::vector<double> out(static_cast<std::size_t>(d), 0.0);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < d; ++j) out[static_cast<std::size_t>(j)] += na->values[static_cast<std::size_t>(i * d + j)];
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& v : out) v *= inv;
  auto backward = [na, n, d, inv](Node& o) {
    if (!na->requires_grad) return;
    double* ga = na->ensure_grad().data();
    const double* g = o.grad.data();
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < d; ++j) ga[i * d + j] += g[j] * inv;
  };
  return make_result({d}, std::move(out), {na}, std::move(backward));
}

Tensor softmax(const Tensor& a) {
  auto na = a.node();
  const auto [rows, d] = rows_cols(na->shape, "softmax");
  std::vector<double> out(na->values.size());
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* x = na->values.data() + r * d;
    double* y = out.data() + r * d;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::int64_t j = 0; j < d; ++j) mx = std::fmax(mx, x[j]);
    double z = 0.0;
    for (std::int64_t j = 0; j < d; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    for (std::int64_t j = 0; j < d; ++j) y[j] /= z;
  }
  auto backward = [na, rows = rows, d = d](Node& o) {
    if (!na->requires_grad) return;
    double* ga = na->ensure_grad().data();
    const double* g = o.grad.data();
    const double* y = o.values.data();
    for (std::int64_t r = 0; r < rows; ++r) {
      const double* gr = g + r * d;
      const double* yr = y + r * d;
      double dot = 0.0;
      for (std::int64_t j = 0; j < d; ++j) dot += gr[j] * yr[j];
      for (std::int64_t j = 0; j < d; ++j) ga[r * d + j] += yr[j] * (gr[j] - dot);
    }
  };
  return make_result(na->shape, std::move(out), {na}, std::move(backward));
}

Tensor log_sum_exp(const Tensor& a) {
  auto na = a.node();
  const auto [rows, d] = rows_cols(na->shape, "log_sum_exp");
  std::vector<double> out(static_cast<std::size_t>(rows));
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* x = na->values.data() + r * d;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::int64_t j = 0; j < d; ++j) mx = std::fmax(mx, x[j]);
    double z = 0.0;
    for (std::int64_t j = 0; j < d; ++j) z += std::exp(x[j] - mx);
    out[static_cast<std::size_t>(r)] = mx + std::log(z);
  }
  auto backward = [na, rows = rows, d = d](Node& o) {
    if (!na->requires_grad) return;
    double* ga = na->ensure_grad().data();
    const double* g = o.grad.data();
    const double* lse = o.values.data();
    const double* x = na->values.data();
    for (std::int64_t r = 0; r < rows; ++r)
      for (std::int64_t j = 0; j < d; ++j)
        ga[r * d + j] += g[r] * std::exp(x[r * d + j] - lse[r]);
  };
  return make_result(drop_last(na->shape), std::move(out), {na}, std::move(backward));
}

// ---- name dispatch -------------------------------------------------------------

Tensor forward_op(std::string_view op_name, std::span<const Tensor> inputs) {
  auto need = [&](std::size_t n) {
    if (inputs.size() != n)
      throw std::invalid_argument(std::string(op_name) + ": expected " + std::to_string(n) +
                                  " operand(s), got " + std::to_string(inputs.size()));
  };
  if (op_name == "add") { need(2); return add(inputs[0], inputs[1]); }
  if (op_name == "sub") { need(2); return sub(inputs[0], inputs[1]); }
  if (op_name == "mul") { need(2); return mul(inputs[0], inputs[1]); }
  if (op_name == "div") { need(2); return div(inputs[0], inputs[1]); }
  if (op_name == "matmul") { need(2); return matmul(inputs[0], inputs[1]); }
  if (op_name == "neg") { need(1); return neg(inputs[0]); }
  if (op_name == "sum") { need(1); return sum(inputs[0]); }
  if (op_name == "mean") { need(1); return mean(inputs[0]); }
  if (op_name == "exp") { need(1); return exp(inputs[0]); }
  if (op_name == "log") { need(1); return log(inputs[0]); }
  if (op_name == "square") { need(1); return square(inputs[0]); }
  if (op_name == "sqrt") { need(1); return sqrt(inputs[0]); }
  if (op_name == "sigmoid") { need(1); return sigmoid(inputs[0]); }
  if (op_name == "tanh") { need(1); return tanh(inputs[0]); }
  if (op_name == "elu") { need(1); return elu(inputs[0]); }
  if (op_name == "softplus") { need(1); return softplus(inputs[0]); }
  if (op_name == "softmax") { need(1); return softmax(inputs[0]); }
  if (op_name == "log_sum_exp") { need(1); return log_sum_exp(inputs[0]); }
  if (op_name == "lgamma") { need(1); return lgamma(inputs[0]); }
  if (op_name == "digamma") { need(1); return digamma(inputs[0]); }
  throw std::invalid_argument("forward_op: unknown op '" + std::string(op_name) + "'");
}

Tensor custom_op(Shape out_shape, std::vector<double> values, std::vector<Tensor> parents,
                 std::function<void(detail::Node&)> backward) {
  if (numel(out_shape) != static_cast<std::int64_t>(values.size()))
    throw std::invalid_argument("custom_op: value count does not match shape " + shape_str(out_shape));
  std::vector<std::shared_ptr<Node>> nodes;
  nodes.reserve(parents.size());
  for (const auto& p : parents) nodes.push_back(p.node());
  return make_result(std::move(out_shape), std::move(values), std::move(nodes), std::move(backward));
}

// ---- backward --------------------------------------------------------------------

void backward(const Tensor& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined loss");
  auto root = loss.node();
  if (root->size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(root->shape));
  if (!std::isfinite(root->values[0]))
    throw std::runtime_error("backward: loss is not finite (diverged optimization)");

  // iterative post-order topological sort
  std::vector<detail::Node*> topo;
  std::unordered_set<detail::Node*> visited;
  struct Frame {
    detail::Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  if (root->requires_grad) {
    stack.push_back({root.get(), 0});
    visited.insert(root.get());
  }
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      detail::Node* p = f.node->parents[f.next_parent].get();
      ++f.next_parent;
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      topo.push_back(f.node);
      stack.pop_back();
    }
  }

  root->ensure_grad()[0] += 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

}  // namespace varprec::nd
