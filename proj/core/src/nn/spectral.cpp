#include "tfr/nn/spectral.hpp"

#include <cmath>
#include <numbers>

#include "tfr/error.hpp"

namespace tfr::nn {

namespace {

// (c*h, f) block rows -> (h, c*f) block columns, and the inverse.
Matrix to_blocks_by_column(const Matrix& m, int c, int h, int f) {
  Matrix out(h, static_cast<Eigen::Index>(c) * f);
  for (int ch = 0; ch < c; ++ch) out.middleCols(static_cast<Eigen::Index>(ch) * f, f) = m.middleRows(static_cast<Eigen::Index>(ch) * h, h);
  return out;
}

Matrix to_blocks_by_row(const Matrix& m, int c, int h, int f) {
  Matrix out(static_cast<Eigen::Index>(c) * h, f);
  for (int ch = 0; ch < c; ++ch) out.middleRows(static_cast<Eigen::Index>(ch) * h, h) = m.middleCols(static_cast<Eigen::Index>(ch) * f, f);
  return out;
}

std::size_t widx(int f2, int c, int r, int k2, int i, int j) {
  return ((((static_cast<std::size_t>(r) * f2 + k2) * c + i) * c + j) * 2);
}

// Forward truncated DFT of a (c, h, w) tensor; col_scale multiplies mode k2.
void forward_dft(const SpectralPlan& p, const Tensor& u, const std::vector<double>* col_scale, Matrix& re,
                 Matrix& im) {
  Eigen::Map<const Matrix> um(u.data.data(), static_cast<Eigen::Index>(u.c) * p.h, p.w);
  Matrix pr = um * p.cos_w;
  Matrix pi = -(um * p.sin_w);
  if (col_scale) {
    for (int k = 0; k < p.f2; ++k) {
      pr.col(k) *= (*col_scale)[k];
      pi.col(k) *= (*col_scale)[k];
    }
  }
  const Matrix br = to_blocks_by_column(pr, u.c, p.h, p.f2);
  const Matrix bi = to_blocks_by_column(pi, u.c, p.h, p.f2);
  re = p.cos_h * br + p.sin_h * bi;
  im = p.cos_h * bi - p.sin_h * br;
}

// Sum over retained modes of Re(z e^{i theta}); with inverse tables when `scaled`.
Tensor inverse_dft(const SpectralPlan& p, int c, const Matrix& re, const Matrix& im, bool scaled) {
  const Matrix zr = p.cos_h.transpose() * re - p.sin_h.transpose() * im;
  const Matrix zi = p.cos_h.transpose() * im + p.sin_h.transpose() * re;
  const Matrix rr = to_blocks_by_row(zr, c, p.h, p.f2);
  const Matrix ri = to_blocks_by_row(zi, c, p.h, p.f2);
  Tensor y(c, p.h, p.w);
  Eigen::Map<Matrix> ym(y.data.data(), static_cast<Eigen::Index>(c) * p.h, p.w);
  if (scaled) {
    ym.noalias() = rr * p.inv_cos_w - ri * p.inv_sin_w;
  } else {
    ym.noalias() = rr * p.cos_w.transpose() - ri * p.sin_w.transpose();
  }
  return y;
}

std::vector<double> half_spectrum_weights(const SpectralPlan& p) {
  std::vector<double> s(p.f2);
  for (int k = 0; k < p.f2; ++k) {
    const bool single = (k == 0) || (p.w % 2 == 0 && k == p.w / 2);
    s[k] = (single ? 1.0 : 2.0) / (static_cast<double>(p.h) * p.w);
  }
  return s;
}

}  // namespace

std::vector<int> retained_rows(int h, int f1) {
  std::vector<int> rows;
  rows.push_back(0);
  for (int k = 1; static_cast<int>(rows.size()) < f1 && k <= h / 2; ++k) {
    rows.push_back(k);
    if (static_cast<int>(rows.size()) < f1 && h - k != k) rows.push_back(h - k);
  }
  return rows;
}

SpectralPlan SpectralPlan::make(int h, int w, int f1, int f2) {
  if (h < 1 || w < 1) throw ConfigError("spectral plan: empty plane");
  if (f1 < 1 || f1 > h) throw ConfigError("spectral conv: F1=" + std::to_string(f1) + " exceeds H=" + std::to_string(h));
  if (f2 < 1 || f2 > w / 2 + 1) {
    throw ConfigError("spectral conv: F2=" + std::to_string(f2) + " exceeds floor(W/2)+1=" + std::to_string(w / 2 + 1));
  }
  SpectralPlan p;
  p.h = h;
  p.w = w;
  p.f1 = f1;
  p.f2 = f2;
  p.rows = retained_rows(h, f1);
  const double two_pi = 2.0 * std::numbers::pi;
  p.cos_w.resize(w, f2);
  p.sin_w.resize(w, f2);
  for (int x = 0; x < w; ++x) {
    for (int k = 0; k < f2; ++k) {
      // Reduce the phase index first so large grids keep full accuracy.
      const double a = two_pi * static_cast<double>((static_cast<long>(x) * k) % w) / w;
      p.cos_w(x, k) = std::cos(a);
      p.sin_w(x, k) = std::sin(a);
    }
  }
  p.cos_h.resize(f1, h);
  p.sin_h.resize(f1, h);
  for (int r = 0; r < f1; ++r) {
    for (int x = 0; x < h; ++x) {
      const double a = two_pi * static_cast<double>((static_cast<long>(x) * p.rows[r]) % h) / h;
      p.cos_h(r, x) = std::cos(a);
      p.sin_h(r, x) = std::sin(a);
    }
  }
  const auto s = half_spectrum_weights(p);
  p.inv_cos_w = p.cos_w.transpose();
  p.inv_sin_w = p.sin_w.transpose();
  for (int k = 0; k < f2; ++k) {
    p.inv_cos_w.row(k) *= s[k];
    p.inv_sin_w.row(k) *= s[k];
  }
  return p;
}

Tensor spectral_conv(const Tensor& u, const Buffer& weights, const SpectralPlan& plan,
                     SpectralCache* cache) {
  if (u.h != plan.h || u.w != plan.w) {
    throw ConfigError("spectral conv: input " + u.shape_str() + " does not match plan " + std::to_string(plan.h) +
                      "x" + std::to_string(plan.w));
  }
  const int c = u.c;
  if (weights.size() != static_cast<std::size_t>(plan.f1) * plan.f2 * c * c * 2) {
    throw ConfigError("spectral conv: weight size does not match channels and modes");
  }
  Matrix ur, ui;
  forward_dft(plan, u, nullptr, ur, ui);
  Matrix yr = Matrix::Zero(plan.f1, static_cast<Eigen::Index>(c) * plan.f2);
  Matrix yi = yr;
  for (int r = 0; r < plan.f1; ++r) {
    for (int k = 0; k < plan.f2; ++k) {
      for (int i = 0; i < c; ++i) {
        double sr = 0.0;
        double si = 0.0;
        for (int j = 0; j < c; ++j) {
          const std::size_t o = widx(plan.f2, c, r, k, i, j);
          const double wr = weights[o];
          const double wi = weights[o + 1];
          const double xr = ur(r, j * plan.f2 + k);
          const double xi = ui(r, j * plan.f2 + k);
          sr += wr * xr - wi * xi;
          si += wr * xi + wi * xr;
        }
        yr(r, i * plan.f2 + k) = sr;
        yi(r, i * plan.f2 + k) = si;
      }
    }
  }
  if (cache) {
    cache->ur = std::move(ur);
    cache->ui = std::move(ui);
  }
  return inverse_dft(plan, c, yr, yi, true);
}

Tensor spectral_conv_backward(const SpectralPlan& plan, const Buffer& weights,
                              const SpectralCache& cache, const Tensor& gy, Buffer& grad_weights) {
  const int c = gy.c;
  const auto scale = half_spectrum_weights(plan);
  Matrix gr, gi;
  forward_dft(plan, gy, &scale, gr, gi);
  Matrix xr = Matrix::Zero(plan.f1, static_cast<Eigen::Index>(c) * plan.f2);
  Matrix xi = xr;
  for (int r = 0; r < plan.f1; ++r) {
    for (int k = 0; k < plan.f2; ++k) {
      for (int i = 0; i < c; ++i) {
        const double g_r = gr(r, i * plan.f2 + k);
        const double g_i = gi(r, i * plan.f2 + k);
        for (int j = 0; j < c; ++j) {
          const std::size_t o = widx(plan.f2, c, r, k, i, j);
          const double u_r = cache.ur(r, j * plan.f2 + k);
          const double u_i = cache.ui(r, j * plan.f2 + k);
          grad_weights[o] += g_r * u_r + g_i * u_i;
          grad_weights[o + 1] += g_i * u_r - g_r * u_i;
          const double wr = weights[o];
          const double wi = weights[o + 1];
          xr(r, j * plan.f2 + k) += wr * g_r + wi * g_i;
          xi(r, j * plan.f2 + k) += wr * g_i - wi * g_r;
        }
      }
    }
  }
  return inverse_dft(plan, c, xr, xi, false);
}

Buffer identity_spectral_weights(int f1, int f2, int channels) {
  Buffer w(static_cast<std::size_t>(f1) * f2 * channels * channels * 2, 0.0);
  for (int r = 0; r < f1; ++r) {
    for (int k = 0; k < f2; ++k) {
      for (int i = 0; i < channels; ++i) w[widx(f2, channels, r, k, i, i)] = 1.0;
    }
  }
  return w;
}

SpectralConv::SpectralConv(ParamStore& store, const std::string& name, int channels, int f1, int f2, int h, int w,
                           Rng& rng)
    : plan_(SpectralPlan::make(h, w, f1, f2)), channels_(channels) {
  r_ = &store.add(name + ".weight", {f1, f2, channels, channels, 2});
  init_uniform(*r_, rng, 0.0, 1.0 / (static_cast<double>(channels) * channels));
}

Tensor SpectralConv::forward(const Tensor& u, SpectralCache& cache) const {
  if (u.c != channels_) throw ConfigError("spectral conv channel mismatch");
  return spectral_conv(u, r_->value, plan_, &cache);
}

Tensor SpectralConv::backward(const SpectralCache& cache, const Tensor& gy) const {
  return spectral_conv_backward(plan_, r_->value, cache, gy, r_->grad);
}

FourierLayer::FourierLayer(ParamStore& store, const std::string& name, int channels, int f1, int f2, int h, int w,
                           Rng& rng)
    : spectral_(store, name + ".spectral", channels, f1, f2, h, w, rng),
      local_(store, name + ".local", channels, channels, 1, 1, true, rng) {}

Tensor FourierLayer::forward(const Tensor& u, Cache& cache) const {
  cache.pre = local_.forward(u, cache.local);
  cache.pre += spectral_.forward(u, cache.spectral);
  return gelu(cache.pre);
}

Tensor FourierLayer::backward(const Cache& cache, const Tensor& gy) const {
  const Tensor gpre = gelu_backward(cache.pre, gy);
  Tensor gu = local_.backward(cache.local, gpre);
  gu += spectral_.backward(cache.spectral, gpre);
  return gu;
}

}  // namespace tfr::nn
