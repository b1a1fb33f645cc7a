#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace varprec::nd {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until a backward pass reaches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;  // null for leaves

  std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }
  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(values.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

// Dense double tensor participating in a define-by-run reverse-mode graph.
// Value-semantics handle: copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> data);
  static Tensor scalar(double value);
  // leaf with requires_grad set: a trainable parameter
  static Tensor param(Shape shape, std::vector<double> data);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::int64_t size() const;
  std::int64_t dim(int axis) const;
  int rank() const { return static_cast<int>(shape().size()); }

  std::span<const double> values() const;
  std::span<double> mutable_values();  // raw access, bypasses the graph
  double value() const;                // scalar convenience
  double at(std::int64_t i) const;

  bool requires_grad() const;
  std::span<const double> grad() const;  // empty if no gradient accumulated
  void zero_grad();
  Tensor detach() const;  // graph-free copy of the values

  std::shared_ptr<detail::Node> node() const { return node_; }
  static Tensor wrap(std::shared_ptr<detail::Node> n);

 private:
  std::shared_ptr<detail::Node> node_;
};

// ---- graph construction -------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);  // 2-D only
Tensor transpose(const Tensor& a);                // 2-D only
Tensor reshape(const Tensor& a, Shape shape);     // same numel

Tensor sum(const Tensor& a);        // all elements -> scalar
Tensor mean(const Tensor& a);       // all elements -> scalar
Tensor sum_last(const Tensor& a);   // reduce trailing axis
Tensor mean_axis0(const Tensor& a); // 2-D (n, d) -> (d)

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor elu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor softmax(const Tensor& a);       // trailing axis
Tensor log_sum_exp(const Tensor& a);   // trailing axis, overflow-safe
Tensor lgamma(const Tensor& a);
Tensor digamma(const Tensor& a);
Tensor clamp_min(const Tensor& a, double floor);

// name-based dispatch over the op vocabulary above (unary/binary/matmul/reductions)
Tensor forward_op(std::string_view op_name, std::span<const Tensor> inputs);

// escape hatch for ops whose forward pass is not a closed-form function of the
// inputs (e.g. sampling with pathwise gradients); `backward` reads the output
// node's grad and accumulates into the parents it captured
Tensor custom_op(Shape out_shape, std::vector<double> values, std::vector<Tensor> parents,
                 std::function<void(detail::Node&)> backward);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator+(const Tensor& a, double c) { return add(a, Tensor::scalar(c)); }
inline Tensor operator+(double c, const Tensor& a) { return add(Tensor::scalar(c), a); }
inline Tensor operator-(const Tensor& a, double c) { return sub(a, Tensor::scalar(c)); }
inline Tensor operator-(double c, const Tensor& a) { return sub(Tensor::scalar(c), a); }
inline Tensor operator*(const Tensor& a, double c) { return mul(a, Tensor::scalar(c)); }
inline Tensor operator*(double c, const Tensor& a) { return mul(Tensor::scalar(c), a); }
inline Tensor operator/(const Tensor& a, double c) { return div(a, Tensor::scalar(c)); }
inline Tensor operator/(double c, const Tensor& a) { return div(Tensor::scalar(c), a); }

// Reverse pass from a finite scalar loss. Gradients accumulate additively into
// every reachable tensor with requires_grad; repeated calls keep accumulating.
void backward(const Tensor& loss);

}  // namespace varprec::nd
