#include "tfr/nn/tensor.hpp"

#include <cmath>
#include <sstream>

#include "tfr/error.hpp"

namespace tfr::nn {

std::string Tensor::shape_str() const {
  std::ostringstream s;
  s << c << "x" << h << "x" << w;
  return s.str();
}

Tensor& Tensor::operator+=(const Tensor& o) {
  require_same_shape(*this, o, "tensor addition");
  for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : data) v *= s;
  return *this;
}

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view what) {
  if (!a.same_shape(b)) {
    throw ConfigError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
}

ParamArray& ParamStore::add(std::string name, std::vector<int> shape) {
  if (find(name)) throw ConfigError("duplicate parameter name " + name);
  auto p = std::make_unique<ParamArray>();
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  p->name = std::move(name);
  p->shape = std::move(shape);
  p->value.assign(n, 0.0);
  p->grad.assign(n, 0.0);
  items_.push_back(std::move(p));
  return *items_.back();
}

ParamArray* ParamStore::find(std::string_view name) {
  for (auto& p : items_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

const ParamArray* ParamStore::find(std::string_view name) const {
  for (const auto& p : items_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p->size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : items_) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

double ParamStore::grad_norm() const {
  double s = 0.0;
  for (const auto& p : items_) {
    for (double g : p->grad) s += g * g;
  }
  return std::sqrt(s);
}

void ParamStore::scale_grad(double s) {
  for (auto& p : items_) {
    for (double& g : p->grad) g *= s;
  }
}

std::vector<Buffer> ParamStore::snapshot() const {
  std::vector<Buffer> out;
  out.reserve(items_.size());
  for (const auto& p : items_) out.push_back(p->value);
  return out;
}

void ParamStore::restore(const std::vector<Buffer>& values) {
  if (values.size() != items_.size()) throw ConfigError("parameter snapshot has the wrong number of arrays");
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (values[i].size() != items_[i]->size()) throw ConfigError("parameter snapshot shape mismatch for " + items_[i]->name);
    items_[i]->value = values[i];
  }
}

void init_uniform(ParamArray& p, Rng& rng, double lo, double hi) {
  for (double& v : p.value) v = rng.uniform(lo, hi);
}

}  // namespace tfr::nn
