#include "tfr/nn/attention.hpp"

#include <cmath>

#include "tfr/error.hpp"

namespace tfr::nn {

Tensor positional_embedding(int c, int h, int w) {
  if (c < 2 || c % 2 != 0) throw ConfigError("positional embedding needs an even channel count, got " + std::to_string(c));
  const int half = c / 2;
  Tensor e(c, h, w);
  for (int k = 0; k < half; ++k) {
    const double omega = std::pow(10000.0, -2.0 * (k / 2) / half);
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const double ar = i * omega;
        const double ac = j * omega;
        e(k, i, j) = (k % 2 == 0) ? std::sin(ar) : std::cos(ar);
        e(half + k, i, j) = (k % 2 == 0) ? std::sin(ac) : std::cos(ac);
      }
    }
  }
  return e;
}

Matrix to_tokens(const Tensor& x) {
  return Eigen::Map<const Matrix>(x.data.data(), x.c, x.plane()).transpose();
}

Tensor from_tokens(const Matrix& m, int h, int w) {
  if (m.rows() != static_cast<Eigen::Index>(h) * w) throw ConfigError("token count does not match spatial size");
  Tensor x(static_cast<int>(m.cols()), h, w);
  Eigen::Map<Matrix>(x.data.data(), x.c, x.plane()) = m.transpose();
  return x;
}

Matrix cross_attention(const Matrix& q, const Matrix& k, const Matrix& v, AttentionCache* cache) {
  if (q.rows() != k.rows() || k.rows() != v.rows() || q.cols() != k.cols() || k.cols() != v.cols()) {
    throw ConfigError("cross attention: Q, K and V must share the same (L, C) shape");
  }
  if (!q.allFinite() || !k.allFinite() || !v.allFinite()) throw NumericError("cross attention: non-finite input");
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Matrix s = (q * k.transpose()) * scale;
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
  Matrix out = s * v;
  if (cache) {
    cache->q = q;
    cache->k = k;
    cache->v = v;
    cache->weights = std::move(s);
  }
  return out;
}

AttentionGrads cross_attention_backward(const AttentionCache& cache, const Matrix& gout) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(cache.q.cols()));
  const Matrix& a = cache.weights;
  AttentionGrads g;
  g.v = a.transpose() * gout;
  Matrix ga = gout * cache.v.transpose();
  Matrix gs = a.cwiseProduct(ga);
  const Eigen::VectorXd rows = gs.rowwise().sum();
  gs -= a.cwiseProduct(rows.replicate(1, a.cols()));
  g.q = (gs * cache.k) * scale;
  g.k = (gs.transpose() * cache.q) * scale;
  return g;
}

}  // namespace tfr::nn
