#include "tfr/nn/layers.hpp"

#include <Eigen/Core>
#include <cmath>
#include <numbers>

#include "tfr/error.hpp"

namespace tfr::nn {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

int conv_out(int n, int k, int stride) { return (n + 2 * ((k - 1) / 2) - k) / stride + 1; }

}  // namespace

Conv2d::Conv2d(ParamStore& store, const std::string& name, int in, int out, int kernel, int stride, bool bias,
               Rng& rng)
    : in_(in), out_(out), k_(kernel), stride_(stride) {
  if (in < 1 || out < 1) throw ConfigError("conv " + name + ": channel counts must be positive");
  if (kernel != 1 && kernel != 3) throw ConfigError("conv " + name + ": kernel must be 1 or 3");
  if (stride != 1 && stride != 2) throw ConfigError("conv " + name + ": stride must be 1 or 2");
  w_ = &store.add(name + ".weight", {out, in, kernel, kernel});
  const double bound = 1.0 / std::sqrt(static_cast<double>(in * kernel * kernel));
  init_uniform(*w_, rng, -bound, bound);
  if (bias) b_ = &store.add(name + ".bias", {out});
}

Tensor Conv2d::forward(const Tensor& x) const {
  Cache c;
  return forward(x, c);
}

Tensor Conv2d::forward(const Tensor& x, Cache& cache) const {
  if (x.c != in_) {
    throw ConfigError("conv expects " + std::to_string(in_) + " input channels, got " + std::to_string(x.c));
  }
  const int oh = conv_out(x.h, k_, stride_);
  const int ow = conv_out(x.w, k_, stride_);
  cache.in_h = x.h;
  cache.in_w = x.w;
  if (k_ == 1 && stride_ == 1) {
    cache.col = x;
  } else {
    const int pad = (k_ - 1) / 2;
    cache.col = Tensor(in_ * k_ * k_, oh, ow);
    for (int c = 0; c < in_; ++c) {
      const double* src = x.channel(c);
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          double* dst = cache.col.channel((c * k_ + ky) * k_ + kx);
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride_ + ky - pad;
            double* row = dst + oy * ow;
            if (iy < 0 || iy >= x.h) {
              std::fill(row, row + ow, 0.0);
              continue;
            }
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride_ + kx - pad;
              row[ox] = (ix < 0 || ix >= x.w) ? 0.0 : src[iy * x.w + ix];
            }
          }
        }
      }
    }
  }
  Tensor y(out_, oh, ow);
  const int kk = in_ * k_ * k_;
  CMapR wm(w_->value.data(), out_, kk);
  CMapR col(cache.col.data.data(), kk, oh * ow);
  MapR ym(y.data.data(), out_, oh * ow);
  ym.noalias() = wm * col;
  if (b_) {
    for (int o = 0; o < out_; ++o) ym.row(o).array() += b_->value[o];
  }
  return y;
}

Tensor Conv2d::backward(const Cache& cache, const Tensor& gy) const {
  const int oh = gy.h;
  const int ow = gy.w;
  const int kk = in_ * k_ * k_;
  CMapR g(gy.data.data(), out_, oh * ow);
  CMapR col(cache.col.data.data(), kk, oh * ow);
  MapR gw(w_->grad.data(), out_, kk);
  gw.noalias() += g * col.transpose();
  if (b_) {
    for (int o = 0; o < out_; ++o) b_->grad[o] += g.row(o).sum();
  }
  CMapR wm(w_->value.data(), out_, kk);
  if (k_ == 1 && stride_ == 1) {
    Tensor gx(in_, cache.in_h, cache.in_w);
    MapR(gx.data.data(), in_, oh * ow).noalias() = wm.transpose() * g;
    return gx;
  }
  MatR gcol = wm.transpose() * g;
  Tensor gx(in_, cache.in_h, cache.in_w);
  const int pad = (k_ - 1) / 2;
  for (int c = 0; c < in_; ++c) {
    double* dst = gx.channel(c);
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx) {
        const double* src = gcol.data() + static_cast<std::size_t>((c * k_ + ky) * k_ + kx) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride_ + ky - pad;
          if (iy < 0 || iy >= gx.h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride_ + kx - pad;
            if (ix >= 0 && ix < gx.w) dst[iy * gx.w + ix] += src[oy * ow + ox];
          }
        }
      }
    }
  }
  return gx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
  return cdf + x * pdf;
}

Tensor gelu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = gelu(v);
  return y;
}

Tensor gelu_backward(const Tensor& x, const Tensor& gy) {
  require_same_shape(x, gy, "gelu backward");
  Tensor g = gy;
  for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] *= gelu_grad(x.data[i]);
  return g;
}

Tensor maxpool(const Tensor& x, int k, PoolCache& cache) {
  if (k < 1 || x.h % k != 0 || x.w % k != 0) {
    throw ConfigError("maxpool" + std::to_string(k) + ": spatial size " + std::to_string(x.h) + "x" +
                      std::to_string(x.w) + " is not divisible by " + std::to_string(k));
  }
  const int oh = x.h / k;
  const int ow = x.w / k;
  Tensor y(x.c, oh, ow);
  cache.in_h = x.h;
  cache.in_w = x.w;
  cache.argmax.assign(y.size(), 0);
  for (int c = 0; c < x.c; ++c) {
    const double* src = x.channel(c);
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        int best = oy * k * x.w + ox * k;
        for (int dy = 0; dy < k; ++dy) {
          for (int dx = 0; dx < k; ++dx) {
            const int idx = (oy * k + dy) * x.w + ox * k + dx;
            if (src[idx] > src[best]) best = idx;
          }
        }
        const std::size_t o = (static_cast<std::size_t>(c) * oh + oy) * ow + ox;
        y.data[o] = src[best];
        cache.argmax[o] = best;
      }
    }
  }
  return y;
}

Tensor maxpool(const Tensor& x, int k) {
  PoolCache c;
  return maxpool(x, k, c);
}

Tensor maxpool_backward(const PoolCache& cache, const Tensor& gy) {
  Tensor gx(gy.c, cache.in_h, cache.in_w);
  for (int c = 0; c < gy.c; ++c) {
    double* dst = gx.channel(c);
    const double* src = gy.channel(c);
    for (int i = 0; i < gy.plane(); ++i) dst[cache.argmax[static_cast<std::size_t>(c) * gy.plane() + i]] += src[i];
  }
  return gx;
}

Tensor resize_nearest(const Tensor& x, int oh, int ow) {
  if (oh == x.h && ow == x.w) return x;
  Tensor y(x.c, oh, ow);
  for (int c = 0; c < x.c; ++c) {
    const double* src = x.channel(c);
    double* dst = y.channel(c);
    for (int i = 0; i < oh; ++i) {
      const int si = static_cast<int>(static_cast<long>(i) * x.h / oh);
      for (int j = 0; j < ow; ++j) {
        dst[i * ow + j] = src[si * x.w + static_cast<int>(static_cast<long>(j) * x.w / ow)];
      }
    }
  }
  return y;
}

Tensor resize_nearest_backward(const Tensor& gy, int ih, int iw) {
  if (ih == gy.h && iw == gy.w) return gy;
  Tensor gx(gy.c, ih, iw);
  for (int c = 0; c < gy.c; ++c) {
    const double* src = gy.channel(c);
    double* dst = gx.channel(c);
    for (int i = 0; i < gy.h; ++i) {
      const int si = static_cast<int>(static_cast<long>(i) * ih / gy.h);
      for (int j = 0; j < gy.w; ++j) {
        dst[si * iw + static_cast<int>(static_cast<long>(j) * iw / gy.w)] += src[i * gy.w + j];
      }
    }
  }
  return gx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.h != b.h || a.w != b.w) {
    throw ConfigError("channel concat: spatial mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
  Tensor y(a.c + b.c, a.h, a.w);
  std::copy(a.data.begin(), a.data.end(), y.data.begin());
  std::copy(b.data.begin(), b.data.end(), y.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
  return y;
}

void split_channels(const Tensor& g, int first, Tensor& ga, Tensor& gb) {
  ga = Tensor(first, g.h, g.w);
  gb = Tensor(g.c - first, g.h, g.w);
  std::copy(g.data.begin(), g.data.begin() + static_cast<std::ptrdiff_t>(ga.size()), ga.data.begin());
  std::copy(g.data.begin() + static_cast<std::ptrdiff_t>(ga.size()), g.data.end(), gb.data.begin());
}

GroupNorm::GroupNorm(ParamStore* store, const std::string& name, int channels, bool affine, double eps)
    : channels_(channels), groups_(channels % 8 == 0 ? channels / 8 : 1), eps_(eps) {
  if (affine) {
    if (!store) throw ConfigError("affine group norm needs a parameter store");
    gamma_ = &store->add(name + ".weight", {channels});
    beta_ = &store->add(name + ".bias", {channels});
    std::fill(gamma_->value.begin(), gamma_->value.end(), 1.0);
  }
}

Tensor GroupNorm::forward(const Tensor& x, Cache& cache) const {
  if (x.c != channels_) throw ConfigError("group norm channel mismatch");
  const int per = channels_ / groups_;
  const std::size_t n = static_cast<std::size_t>(per) * x.plane();
  cache.xhat = Tensor(x.c, x.h, x.w);
  cache.inv_std.assign(groups_, 0.0);
  for (int g = 0; g < groups_; ++g) {
    const double* src = x.channel(g * per);
    double* dst = cache.xhat.channel(g * per);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += src[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (src[i] - mean) * (src[i] - mean);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps_);
    cache.inv_std[g] = inv;
    for (std::size_t i = 0; i < n; ++i) dst[i] = (src[i] - mean) * inv;
  }
  if (!gamma_) return cache.xhat;
  Tensor y = cache.xhat;
  for (int c = 0; c < x.c; ++c) {
    double* p = y.channel(c);
    for (int i = 0; i < x.plane(); ++i) p[i] = p[i] * gamma_->value[c] + beta_->value[c];
  }
  return y;
}

Tensor GroupNorm::backward(const Cache& cache, const Tensor& gy) const {
  const Tensor& xhat = cache.xhat;
  Tensor gxhat = gy;
  if (gamma_) {
    for (int c = 0; c < gy.c; ++c) {
      const double* g = gy.channel(c);
      const double* xh = xhat.channel(c);
      double* d = gxhat.channel(c);
      double sg = 0.0;
      double sgx = 0.0;
      for (int i = 0; i < gy.plane(); ++i) {
        sg += g[i];
        sgx += g[i] * xh[i];
        d[i] = g[i] * gamma_->value[c];
      }
      beta_->grad[c] += sg;
      gamma_->grad[c] += sgx;
    }
  }
  const int per = channels_ / groups_;
  const std::size_t n = static_cast<std::size_t>(per) * gy.plane();
  Tensor gx(gy.c, gy.h, gy.w);
  for (int g = 0; g < groups_; ++g) {
    const double* d = gxhat.channel(g * per);
    const double* xh = xhat.channel(g * per);
    double* out = gx.channel(g * per);
    double s1 = 0.0;
    double s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s1 += d[i];
      s2 += d[i] * xh[i];
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = cache.inv_std[g] * (d[i] - inv_n * s1 - xh[i] * inv_n * s2);
    }
  }
  return gx;
}

}  // namespace tfr::nn
