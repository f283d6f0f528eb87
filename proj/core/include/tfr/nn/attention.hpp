#pragma once

#include <Eigen/Core>

#include "tfr/nn/tensor.hpp"

namespace tfr::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Fixed 2D sinusoidal code, shape (c, h, w). Channels [0, c/2) encode the
/// row index and [c/2, c) the column index; inside each half, channel k uses
/// frequency 10000^(-2*floor(k/2)/half), sine on even k and cosine on odd k.
Tensor positional_embedding(int c, int h, int w);

/// (c, h, w) -> (h*w, c) token matrix, and back.
Matrix to_tokens(const Tensor& x);
Tensor from_tokens(const Matrix& m, int h, int w);

struct AttentionCache {
  Matrix q, k, v, weights;
};

/// Single-head softmax(Q K^T / sqrt(C)) V over L tokens of width C.
Matrix cross_attention(const Matrix& q, const Matrix& k, const Matrix& v, AttentionCache* cache = nullptr);

struct AttentionGrads {
  Matrix q, k, v;
};

AttentionGrads cross_attention_backward(const AttentionCache& cache, const Matrix& gout);

}  // namespace tfr::nn
