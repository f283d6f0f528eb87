#pragma once

#include <cstddef>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tfr/rng.hpp"

namespace tfr::nn {

/// Cache-line aligned storage. Vectorized reductions peel a different number
/// of leading elements depending on the buffer address, so a fixed alignment
/// is what keeps results bit-identical from run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

/// Dense (channels, height, width) array, row-major within each channel.
struct Tensor {
  int c = 0;
  int h = 0;
  int w = 0;
  Buffer data;

  Tensor() = default;
  Tensor(int channels, int height, int width, double fill = 0.0)
      : c(channels), h(height), w(width), data(static_cast<std::size_t>(channels) * height * width, fill) {}

  std::size_t size() const { return data.size(); }
  int plane() const { return h * w; }
  double& operator()(int ch, int y, int x) { return data[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
  double operator()(int ch, int y, int x) const { return data[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
  double* channel(int ch) { return data.data() + static_cast<std::size_t>(ch) * h * w; }
  const double* channel(int ch) const { return data.data() + static_cast<std::size_t>(ch) * h * w; }

  bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
  std::string shape_str() const;
  Tensor& operator+=(const Tensor& o);
  Tensor& operator*=(double s);

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Throws ConfigError naming `what` unless a and b have the same shape.
void require_same_shape(const Tensor& a, const Tensor& b, std::string_view what);

/// Named parameter with its gradient accumulator.
struct ParamArray {
  std::string name;
  std::vector<int> shape;
  Buffer value;
  Buffer grad;

  std::size_t size() const { return value.size(); }
};

/// Ordered parameter collection. Layers keep raw pointers to entries, so the
/// store is neither copyable nor movable once layers are attached.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;

  ParamArray& add(std::string name, std::vector<int> shape);
  ParamArray* find(std::string_view name);
  const ParamArray* find(std::string_view name) const;

  std::size_t count() const { return items_.size(); }
  ParamArray& operator[](std::size_t i) { return *items_[i]; }
  const ParamArray& operator[](std::size_t i) const { return *items_[i]; }

  std::size_t total_size() const;
  void zero_grad();
  double grad_norm() const;
  void scale_grad(double s);

  std::vector<Buffer> snapshot() const;
  void restore(const std::vector<Buffer>& values);

 private:
  std::vector<std::unique_ptr<ParamArray>> items_;
};

/// Fills with U(lo, hi).
void init_uniform(ParamArray& p, Rng& rng, double lo, double hi);

}  // namespace tfr::nn
