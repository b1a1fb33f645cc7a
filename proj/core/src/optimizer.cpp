#include "varprec/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace varprec::nd {

Tensor ParamStore::add(const std::string& name, Tensor t) {
  if (!t.requires_grad())
    throw std::invalid_argument("ParamStore::add: parameter '" + name + "' must require gradients");
  if (has(name)) throw std::invalid_argument("ParamStore::add: duplicate parameter '" + name + "'");
  Entry e;
  e.name = name;
  e.tensor = t;
  e.m.assign(static_cast<std::size_t>(t.size()), 0.0);
  e.v.assign(static_cast<std::size_t>(t.size()), 0.0);
  entries_.push_back(std::move(e));
  return t;
}

Tensor ParamStore::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.tensor;
  throw std::invalid_argument("ParamStore::get: no parameter '" + name + "'");
}

bool ParamStore::has(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

std::shared_ptr<std::vector<double>> ParamStore::add_buffer(const std::string& name,
                                                            std::vector<double> init) {
  auto buf = std::make_shared<std::vector<double>>(std::move(init));
  buffers_.emplace_back(name, buf);
  return buf;
}

void ParamStore::zero_grads() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

std::int64_t ParamStore::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

ParamStore::Snapshot ParamStore::snapshot() const {
  Snapshot s;
  s.params.reserve(entries_.size());
  for (const auto& e : entries_) {
    auto vals = e.tensor.values();
    s.params.emplace_back(vals.begin(), vals.end());
  }
  s.buffers.reserve(buffers_.size());
  for (const auto& [name, buf] : buffers_) s.buffers.push_back(*buf);
  return s;
}

void ParamStore::restore(const Snapshot& s) {
  if (s.params.size() != entries_.size() || s.buffers.size() != buffers_.size())
    throw std::invalid_argument("ParamStore::restore: snapshot does not match store layout");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto dst = entries_[i].tensor.mutable_values();
    std::copy(s.params[i].begin(), s.params[i].end(), dst.begin());
  }
  for (std::size_t i = 0; i < buffers_.size(); ++i) *buffers_[i].second = s.buffers[i];
}

void adam_step(ParamStore& store, double lr, const AdamOptions& opts) {
  if (!(lr > 0.0)) throw std::invalid_argument("adam_step: learning rate must be positive");
  store.step_ += 1;
  const double t = static_cast<double>(store.step_);
  const double bc1 = 1.0 - std::pow(opts.beta1, t);
  const double bc2 = 1.0 - std::pow(opts.beta2, t);
  for (auto& e : store.entries_) {
    auto g = e.tensor.grad();
    if (g.empty())
      throw std::runtime_error("adam_step: parameter '" + e.name + "' has no gradient");
    auto vals = e.tensor.mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      e.m[i] = opts.beta1 * e.m[i] + (1.0 - opts.beta1) * g[i];
      e.v[i] = opts.beta2 * e.v[i] + (1.0 - opts.beta2) * g[i] * g[i];
      const double mhat = e.m[i] / bc1;
      const double vhat = e.v[i] / bc2;
      vals[i] -= lr * mhat / (std::sqrt(vhat) + opts.epsilon);
    }
  }
  store.zero_grads();
}

}  // namespace varprec::nd
