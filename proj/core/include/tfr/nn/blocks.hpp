#pragma once

#include <string>
#include <vector>

#include "tfr/nn/layers.hpp"
#include "tfr/nn/spectral.hpp"

namespace tfr::nn {

/// conv3x3 (stride s) -> group norm -> gelu -> conv3x3 -> [group norm] -> gelu.
class ConvBlock {
 public:
  struct Cache {
    Conv2d::Cache a, b;
    GroupNorm::Cache na, nb;
    Tensor a_norm, b_out;
  };

  ConvBlock() = default;
  ConvBlock(ParamStore& store, const std::string& name, int in, int out, int stride, bool second_norm, Rng& rng);

  Tensor forward(const Tensor& x, Cache& cache) const;
  Tensor backward(const Cache& cache, const Tensor& gy) const;

 private:
  Conv2d conv_a_, conv_b_;
  GroupNorm norm_a_, norm_b_;
  bool second_norm_ = false;
};

/// Two stride-2 blocks: in -> C/2 -> C at a quarter of the input resolution.
class UNetEncoder {
 public:
  struct Cache {
    ConvBlock::Cache b1, b2;
  };

  UNetEncoder() = default;
  UNetEncoder(ParamStore& store, const std::string& name, int in, int channels, Rng& rng);

  Tensor forward(const Tensor& x, Cache& cache) const;
  Tensor backward(const Cache& cache, const Tensor& gy) const;

 private:
  ConvBlock b1_, b2_;
};

/// Pointwise lift, a stack of Fourier layers and a two-layer pointwise
/// projection to one channel, optionally followed by 4x4 max pooling.
class FourierBranch {
 public:
  struct Cache {
    Conv2d::Cache fc0, fc1, fc2;
    std::vector<FourierLayer::Cache> layers;
    Tensor fc1_out;
    PoolCache pool;
  };

  FourierBranch() = default;
  FourierBranch(ParamStore& store, const std::string& name, int in, int lift, int layers, int f1, int f2, int h,
                int w, bool pool, Rng& rng);

  Tensor forward(const Tensor& x, Cache& cache) const;
  Tensor backward(const Cache& cache, const Tensor& gy) const;
  const std::vector<FourierLayer>& layers() const { return layers_; }
  const Conv2d& fc0() const { return fc0_; }
  const Conv2d& fc1() const { return fc1_; }
  const Conv2d& fc2() const { return fc2_; }

 private:
  Conv2d fc0_, fc1_, fc2_;
  std::vector<FourierLayer> layers_;
  bool pool_ = true;
};

/// Encoder-decoder with skip connections, 2x2 max pooling between levels and
/// nearest-neighbour upsampling on the way back; 1x1 output convolution.
class UNet {
 public:
  struct Cache {
    std::vector<ConvBlock::Cache> down, up;
    std::vector<PoolCache> pools;
    ConvBlock::Cache bottom;
    std::vector<int> skip_channels;
    Conv2d::Cache head;
  };

  UNet() = default;
  UNet(ParamStore& store, const std::string& name, int in, int width, int levels, int out, Rng& rng);

  Tensor forward(const Tensor& x, Cache& cache) const;
  Tensor backward(const Cache& cache, const Tensor& gy) const;
  int levels() const { return levels_; }

 private:
  std::vector<ConvBlock> down_, up_;
  ConvBlock bottom_;
  Conv2d head_;
  int levels_ = 0;
};

/// Residual block whose two parameter-free normalizations are modulated per
/// pixel, out = norm(x) * (1 + gamma) + beta, with gamma and beta predicted
/// from the conditioning map resized to the block resolution. One conv trunk
/// on the conditioning map is shared by both modulations.
class SpadeResBlock {
 public:
  struct Cache {
    int cond_h = 0, cond_w = 0;
    Conv2d::Cache trunk, mod0, mod1, conv0, conv1, shortcut;
    Tensor trunk_pre, mod0_out, mod1_out;
    GroupNorm::Cache n0, n1;
    Tensor m0, m1;
  };

  SpadeResBlock() = default;
  SpadeResBlock(ParamStore& store, const std::string& name, int fin, int fout, int hidden, int cond, Rng& rng);

  Tensor forward(const Tensor& x, const Tensor& cond, Cache& cache) const;
  /// Returns the gradient w.r.t. x and accumulates the conditioning gradient.
  Tensor backward(const Cache& cache, const Tensor& gy, Tensor& grad_cond) const;

  /// The two convolutions producing (gamma, beta).
  const Conv2d& modulation(int i) const { return i == 0 ? mod0_ : mod1_; }

 private:
  Conv2d trunk_, mod0_, mod1_, conv0_, conv1_, shortcut_;
  GroupNorm n0_, n1_;
  int fin_ = 0, fout_ = 0;
  bool learned_shortcut_ = false;
};

/// head conv -> (x2 upsample, SPADE block) twice -> gelu -> 1-channel conv3x3.
class SpadeDecoder {
 public:
  struct Cache {
    Conv2d::Cache head, out;
    SpadeResBlock::Cache b1, b2;
    int h0 = 0, w0 = 0, h1 = 0, w1 = 0;
    Tensor pre_out;
  };

  SpadeDecoder() = default;
  SpadeDecoder(ParamStore& store, const std::string& name, int cond, int width0, int width1, int width2,
               int hidden1, int hidden2, Rng& rng);

  Tensor forward(const Tensor& cond, Cache& cache) const;
  Tensor backward(const Cache& cache, const Tensor& gy) const;
  const SpadeResBlock& block(int i) const { return i == 0 ? b1_ : b2_; }

 private:
  Conv2d head_, out_;
  SpadeResBlock b1_, b2_;
};

}  // namespace tfr::nn
