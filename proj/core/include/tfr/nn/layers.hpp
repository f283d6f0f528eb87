#pragma once

#include <string>
#include <vector>

#include "tfr/nn/tensor.hpp"
#include "tfr/rng.hpp"

namespace tfr::nn {

/// 2D convolution with a 1x1 or 3x3 kernel, zero padding (k-1)/2, stride 1 or 2.
/// A 1x1 convolution is the per-pixel dense layer.
class Conv2d {
 public:
  struct Cache {
    Tensor col;  // im2col matrix stored as (in*k*k) x (out_h*out_w); the input itself for 1x1
    int in_h = 0;
    int in_w = 0;
  };

  Conv2d() = default;
  Conv2d(ParamStore& store, const std::string& name, int in, int out, int kernel, int stride, bool bias,
         Rng& rng);

  Tensor forward(const Tensor& x, Cache& cache) const;
  Tensor forward(const Tensor& x) const;
  /// Accumulates weight and bias gradients; returns the input gradient.
  Tensor backward(const Cache& cache, const Tensor& gy) const;

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  ParamArray& weight() const { return *w_; }
  ParamArray* bias() const { return b_; }

 private:
  ParamArray* w_ = nullptr;  // (out, in, k, k)
  ParamArray* b_ = nullptr;  // (out)
  int in_ = 0;
  int out_ = 0;
  int k_ = 1;
  int stride_ = 1;
};

double gelu(double x);
double gelu_grad(double x);
Tensor gelu(const Tensor& x);
/// x is the forward input.
Tensor gelu_backward(const Tensor& x, const Tensor& gy);

struct PoolCache {
  std::vector<int> argmax;
  int in_h = 0;
  int in_w = 0;
};

/// Non-overlapping k x k max pooling; ConfigError unless h and w are multiples of k.
Tensor maxpool(const Tensor& x, int k, PoolCache& cache);
Tensor maxpool(const Tensor& x, int k);
Tensor maxpool_backward(const PoolCache& cache, const Tensor& gy);
inline Tensor maxpool4(const Tensor& x) { return maxpool(x, 4); }

/// Nearest-neighbour resize: output (i, j) reads input (i*h/oh, j*w/ow).
Tensor resize_nearest(const Tensor& x, int oh, int ow);
Tensor resize_nearest_backward(const Tensor& gy, int ih, int iw);

Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& g, int first, Tensor& ga, Tensor& gb);

/// Group normalization over groups of 8 channels (one group when C is not a
/// multiple of 8), optionally with a per-channel affine transform.
class GroupNorm {
 public:
  struct Cache {
    Tensor xhat;
    std::vector<double> inv_std;
  };

  GroupNorm() = default;
  GroupNorm(ParamStore* store, const std::string& name, int channels, bool affine, double eps = 1e-5);

  Tensor forward(const Tensor& x, Cache& cache) const;
  Tensor backward(const Cache& cache, const Tensor& gy) const;
  int groups() const { return groups_; }

 private:
  ParamArray* gamma_ = nullptr;
  ParamArray* beta_ = nullptr;
  int channels_ = 0;
  int groups_ = 1;
  double eps_ = 1e-5;
};

}  // namespace tfr::nn
