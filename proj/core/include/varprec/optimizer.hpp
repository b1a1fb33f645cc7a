#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "varprec/tensor.hpp"

namespace varprec::nd {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

// Named trainable tensors plus Adam moment buffers and non-trainable state
// buffers (e.g. batch-norm running statistics). One store per model; a single
// optimizer instance drives every registered parameter.
class ParamStore {
 public:
  Tensor add(const std::string& name, Tensor t);
  Tensor get(const std::string& name) const;
  bool has(const std::string& name) const;

  // non-trainable state captured by snapshots and checkpoints
  std::shared_ptr<std::vector<double>> add_buffer(const std::string& name, std::vector<double> init);

  struct Entry {
    std::string name;
    Tensor tensor;
    std::vector<double> m, v;  // Adam first/second moments, zero-initialized
  };
  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  const std::vector<std::pair<std::string, std::shared_ptr<std::vector<double>>>>& buffers() const {
    return buffers_;
  }

  std::int64_t step_count() const { return step_; }
  void zero_grads();
  std::int64_t parameter_count() const;

  struct Snapshot {
    std::vector<std::vector<double>> params;
    std::vector<std::vector<double>> buffers;
  };
  Snapshot snapshot() const;
  void restore(const Snapshot& s);

  friend void adam_step(ParamStore&, double, const AdamOptions&);

 private:
  std::vector<Entry> entries_;
  std::vector<std::pair<std::string, std::shared_ptr<std::vector<double>>>> buffers_;
  std::int64_t step_ = 0;
};

// One Adam update with bias correction; clears gradients afterwards.
// Throws if any registered parameter is missing its gradient.
void adam_step(ParamStore& store, double lr, const AdamOptions& opts = {});

}  // namespace varprec::nd
