#pragma once

#include <string>
#include <vector>

#include "tfr/nn/attention.hpp"
#include "tfr/nn/layers.hpp"

namespace tfr::nn {

/// Retained first-axis frequencies ordered by |k|: 0, 1, h-1, 2, h-2, ...
std::vector<int> retained_rows(int h, int f1);

/// Twiddle tables for a truncated real-input 2D DFT of an h x w plane.
struct SpectralPlan {
  int h = 0;
  int w = 0;
  int f1 = 0;
  int f2 = 0;
  std::vector<int> rows;
  Matrix cos_w, sin_w;  // (w, f2)
  Matrix cos_h, sin_h;  // (f1, h)
  Matrix inv_cos_w, inv_sin_w;  // (f2, w), half-spectrum weights and 1/(hw) folded in

  static SpectralPlan make(int h, int w, int f1, int f2);
};

/// Mode coefficients laid out as (f1, c * f2) with column index c * f2 + k2.
struct SpectralCache {
  Matrix ur, ui;
};

/// Mixing weights are flat with shape (f1, f2, c, c, 2), last axis (re, im).
Tensor spectral_conv(const Tensor& u, const Buffer& weights, const SpectralPlan& plan,
                     SpectralCache* cache = nullptr);
/// Accumulates into grad_weights; returns the input gradient.
Tensor spectral_conv_backward(const SpectralPlan& plan, const Buffer& weights,
                              const SpectralCache& cache, const Tensor& gy, Buffer& grad_weights);

/// Per-mode identity mixing weights.
Buffer identity_spectral_weights(int f1, int f2, int channels);

class SpectralConv {
 public:
  SpectralConv() = default;
  SpectralConv(ParamStore& store, const std::string& name, int channels, int f1, int f2, int h, int w, Rng& rng);

  Tensor forward(const Tensor& u, SpectralCache& cache) const;
  Tensor backward(const SpectralCache& cache, const Tensor& gy) const;
  ParamArray& weights() const { return *r_; }
  const SpectralPlan& plan() const { return plan_; }

 private:
  ParamArray* r_ = nullptr;
  SpectralPlan plan_;
  int channels_ = 0;
};

/// u' = gelu(W u + spectral_conv(u)) with W a biased 1x1 convolution.
class FourierLayer {
 public:
  struct Cache {
    Conv2d::Cache local;
    SpectralCache spectral;
    Tensor pre;
  };

  FourierLayer() = default;
  FourierLayer(ParamStore& store, const std::string& name, int channels, int f1, int f2, int h, int w, Rng& rng);

  Tensor forward(const Tensor& u, Cache& cache) const;
  Tensor backward(const Cache& cache, const Tensor& gy) const;
  const SpectralConv& spectral() const { return spectral_; }
  const Conv2d& local() const { return local_; }

 private:
  SpectralConv spectral_;
  Conv2d local_;
};

}  // namespace tfr::nn
