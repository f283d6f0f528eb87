#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "gradcheck.hpp"
#include "tfr/error.hpp"
#include "tfr/nn/attention.hpp"
#include "tfr/nn/blocks.hpp"
#include "tfr/nn/layers.hpp"
#include "tfr/nn/spectral.hpp"

using namespace tfr;
using namespace tfr::nn;
using tfr::testing::check_entries;
using tfr::testing::check_params;
using tfr::testing::Probe;
using tfr::testing::random_tensor;

namespace {

constexpr double kTol = 1e-4;

void require_all(const std::vector<tfr::testing::GradReport>& reports) {
  for (const auto& r : reports) {
    INFO(r.name << " rel error " << r.rel_error);
    CHECK(r.rel_error <= kTol);
  }
}

// Checks d(probe . f(x))/dx against the analytic input gradient.
void check_input_grad(const std::string& name, Tensor x, const std::function<Tensor(const Tensor&)>& f,
                      const std::function<Tensor(const Tensor&, const Tensor&)>& grad_of) {
  const Tensor y = f(x);
  const Probe probe(y, 99);
  const Tensor gx = grad_of(x, probe.grad(y));
  REQUIRE(gx.same_shape(x));
  const auto r = check_entries(name, x.data, gx.data, [&] { return probe.loss(f(x)); }, 200);
  INFO(name << " rel error " << r.rel_error);
  CHECK(r.rel_error <= kTol);
}

// Direct O(N^2) evaluation of truncated DFT -> per-mode mixing -> half-spectrum inverse.
Tensor spectral_oracle(const Tensor& u, const Buffer& R, int f1, int f2) {
  using cd = std::complex<double>;
  const int C = u.c, H = u.h, W = u.w;
  const double pi = std::numbers::pi;
  const auto rows = retained_rows(H, f1);
  Tensor y(C, H, W);
  for (int r = 0; r < f1; ++r) {
    const int k1 = rows[r];
    for (int k2 = 0; k2 < f2; ++k2) {
      std::vector<cd> uh(C);
      for (int j = 0; j < C; ++j) {
        for (int a = 0; a < H; ++a) {
          for (int b = 0; b < W; ++b) {
            uh[j] += u(j, a, b) * std::exp(cd(0, -2 * pi * (double(k1) * a / H + double(k2) * b / W)));
          }
        }
      }
      const double weight = (k2 == 0 || (W % 2 == 0 && k2 == W / 2)) ? 1.0 : 2.0;
      for (int i = 0; i < C; ++i) {
        cd yh = 0;
        for (int j = 0; j < C; ++j) {
          const std::size_t o = ((((std::size_t)r * f2 + k2) * C + i) * C + j) * 2;
          yh += cd(R[o], R[o + 1]) * uh[j];
        }
        for (int a = 0; a < H; ++a) {
          for (int b = 0; b < W; ++b) {
            y(i, a, b) += weight / (H * W) *
                          std::real(yh * std::exp(cd(0, 2 * pi * (double(k1) * a / H + double(k2) * b / W))));
          }
        }
      }
    }
  }
  return y;
}

double rel_diff(const Tensor& a, const Tensor& b) {
  return tfr::testing::relative_error(a.data, b.data);
}

}  // namespace

TEST_CASE("elementary ops") {
  CHECK(gelu(0.0) == 0.0);
  const Tensor c(3, 8, 8, 2.5);
  const Tensor p = maxpool4(c);
  CHECK(p.c == 3);
  CHECK(p.h == 2);
  CHECK(p.w == 2);
  for (double v : p.data) CHECK(v == 2.5);
  CHECK_THROWS_AS(maxpool4(Tensor(1, 6, 8)), ConfigError);

  ParamStore s;
  Rng rng(1);
  Conv2d dense(s, "d", 3, 3, 1, 1, true, rng);
  auto& w = dense.weight().value;
  std::fill(w.begin(), w.end(), 0.0);
  for (int i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
  const Tensor x = random_tensor(3, 4, 5, 2);
  CHECK(dense.forward(x) == x);
}

TEST_CASE("conv3x3 against direct evaluation") {
  ParamStore s;
  Rng rng(2);
  Conv2d conv(s, "c", 2, 3, 3, 2, true, rng);
  tfr::testing::randomize(conv.bias()->value, 3);
  const Tensor x = random_tensor(2, 7, 6, 4);
  const Tensor y = conv.forward(x);
  REQUIRE(y.h == 4);
  REQUIRE(y.w == 3);
  const auto& w = conv.weight().value;
  for (int o = 0; o < 3; ++o) {
    for (int oy = 0; oy < y.h; ++oy) {
      for (int ox = 0; ox < y.w; ++ox) {
        double acc = conv.bias()->value[o];
        for (int c = 0; c < 2; ++c) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const int iy = 2 * oy + ky - 1, ix = 2 * ox + kx - 1;
              if (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w) acc += w[((o * 2 + c) * 3 + ky) * 3 + kx] * x(c, iy, ix);
            }
          }
        }
        CHECK(y(o, oy, ox) == doctest::Approx(acc).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("layer gradients") {
  Rng rng(7);
  SUBCASE("conv") {
    for (int k : {1, 3}) {
      for (int stride : {1, 2}) {
        if (k == 1 && stride == 2) continue;
        ParamStore s;
        Conv2d conv(s, "c", 2, 3, k, stride, true, rng);
        tfr::testing::randomize(conv.bias()->value, 5);
        Tensor x = random_tensor(2, 6, 6, 8);
        Conv2d::Cache cache;
        require_all(check_params(
            s, [&] { return conv.forward(x, cache); }, [&](const Tensor& g) { conv.backward(cache, g); }));
        check_input_grad("conv input", x, [&](const Tensor& in) { return conv.forward(in); },
                         [&](const Tensor& in, const Tensor& g) {
                           Conv2d::Cache c;
                           conv.forward(in, c);
                           return conv.backward(c, g);
                         });
      }
    }
  }
  SUBCASE("gelu") {
    check_input_grad("gelu", random_tensor(2, 4, 4, 1, -3, 3), [](const Tensor& x) { return gelu(x); },
                     [](const Tensor& x, const Tensor& g) { return gelu_backward(x, g); });
  }
  SUBCASE("maxpool") {
    check_input_grad(
        "maxpool4", random_tensor(2, 8, 8, 3), [](const Tensor& x) { return maxpool4(x); },
        [](const Tensor& x, const Tensor& g) {
          PoolCache c;
          maxpool(x, 4, c);
          return maxpool_backward(c, g);
        });
  }
  SUBCASE("nearest resize") {
    check_input_grad(
        "resize", random_tensor(2, 3, 5, 3), [](const Tensor& x) { return resize_nearest(x, 8, 7); },
        [](const Tensor& x, const Tensor& g) { return resize_nearest_backward(g, x.h, x.w); });
  }
  SUBCASE("group norm") {
    ParamStore s;
    GroupNorm gn(&s, "gn", 16, true);
    tfr::testing::randomize(s[0].value, 1, 0.5, 1.5);
    tfr::testing::randomize(s[1].value, 2);
    Tensor x = random_tensor(16, 3, 3, 4, -2, 2);
    GroupNorm::Cache cache;
    require_all(check_params(
        s, [&] { return gn.forward(x, cache); }, [&](const Tensor& g) { gn.backward(cache, g); }));
    check_input_grad(
        "group norm input", x,
        [&](const Tensor& in) {
          GroupNorm::Cache c;
          return gn.forward(in, c);
        },
        [&](const Tensor& in, const Tensor& g) {
          GroupNorm::Cache c;
          gn.forward(in, c);
          return gn.backward(c, g);
        });
    GroupNorm plain(nullptr, "p", 4, false);
    CHECK(plain.groups() == 1);
  }
}

TEST_CASE("positional embedding") {
  const Tensor e = positional_embedding(8, 4, 4);
  CHECK(e(0, 0, 0) == 0.0);
  CHECK(positional_embedding(8, 4, 4) == e);
  for (int a = 0; a < 16; ++a) {
    for (int b = a + 1; b < 16; ++b) {
      double d = 0.0;
      for (int c = 0; c < 8; ++c) d += std::abs(e(c, a / 4, a % 4) - e(c, b / 4, b % 4));
      CHECK(d > 1e-6);
    }
  }
  CHECK_THROWS_AS(positional_embedding(7, 4, 4), ConfigError);
}

TEST_CASE("cross attention") {
  SUBCASE("single token returns the value row") {
    Matrix q(1, 3), k(1, 3), v(1, 3);
    q << 0.3, -1, 2;
    k << 1, 1, 1;
    v << 4, 5, 6;
    CHECK(cross_attention(q, k, v) == v);
  }
  SUBCASE("orthogonal queries average the values") {
    Matrix q = Matrix::Zero(3, 2), k(3, 2), v(3, 2);
    k << 1, 2, 3, 4, 5, 6;
    v << 1, 0, 0, 3, 5, 6;
    const Matrix o = cross_attention(q, k, v);
    for (int r = 0; r < 3; ++r) {
      CHECK(o(r, 0) == doctest::Approx(2.0));
      CHECK(o(r, 1) == doctest::Approx(3.0));
    }
  }
  SUBCASE("hand case against the direct formula") {
    Matrix q(1, 2), k(2, 2), v(2, 2);
    q << 1, 0;
    k << 1, 0, 0, 1;
    v << 1, 0, 0, 1;
    // L = 2 keys; one query row.
    const double a = std::exp(1.0 / std::sqrt(2.0)), b = 1.0;
    AttentionCache cache;
    const Matrix qq = q.replicate(2, 1);
    const Matrix o = cross_attention(qq, k, v, &cache);
    CHECK(o(0, 0) == doctest::Approx(a / (a + b)).epsilon(1e-14));
    CHECK(o(0, 1) == doctest::Approx(b / (a + b)).epsilon(1e-14));
  }
  SUBCASE("softmax rows, permutation equivariance, errors") {
    Rng rng(9);
    Matrix q(6, 4), k(6, 4), v(6, 4);
    for (auto* m : {&q, &k, &v}) {
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.uniform(-2, 2);
    }
    AttentionCache cache;
    const Matrix o = cross_attention(q, k, v, &cache);
    for (Eigen::Index r = 0; r < 6; ++r) CHECK(std::abs(cache.weights.row(r).sum() - 1.0) <= 1e-6);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(6);
    perm.indices() << 3, 0, 5, 1, 4, 2;
    const Matrix kp = perm * k, vp = perm * v;
    CHECK((cross_attention(q, kp, vp) - o).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK_THROWS_AS(cross_attention(q, Matrix(5, 4), v), ConfigError);
    Matrix bad = q;
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(cross_attention(bad, k, v), NumericError);
  }
  SUBCASE("gradients") {
    Rng rng(10);
    Matrix q(5, 4), k(5, 4), v(5, 4);
    for (auto* m : {&q, &k, &v}) {
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.uniform(-1, 1);
    }
    Matrix w(5, 4);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-1, 1);
    auto loss = [&] { return cross_attention(q, k, v).cwiseProduct(w).sum(); };
    AttentionCache cache;
    cross_attention(q, k, v, &cache);
    const auto g = cross_attention_backward(cache, w);
    for (auto [name, m, gm] : {std::tuple{"q", &q, &g.q}, std::tuple{"k", &k, &g.k}, std::tuple{"v", &v, &g.v}}) {
      Buffer vals(m->data(), m->data() + m->size());
      Buffer an(gm->data(), gm->data() + gm->size());
      const auto r = check_entries(name, vals, an, [&] {
        std::copy(vals.begin(), vals.end(), m->data());
        return loss();
      });
      std::copy(vals.begin(), vals.end(), m->data());
      INFO(name);
      CHECK(r.rel_error <= kTol);
    }
  }
}

TEST_CASE("spectral conv against explicit DFT summation") {
  Rng rng(31);
  const SpectralPlan plan = SpectralPlan::make(4, 4, 2, 2);
  for (int t = 0; t < 50; ++t) {
    const Tensor u = random_tensor(2, 4, 4, 100 + t);
    Buffer R(2 * 2 * 2 * 2 * 2);
    for (double& v : R) v = rng.uniform(-1, 1);
    CHECK(rel_diff(spectral_conv(u, R, plan), spectral_oracle(u, R, 2, 2)) <= 1e-5);
  }
  // Odd sizes and a Nyquist column.
  const Tensor u = random_tensor(3, 5, 6, 7);
  Buffer R(5 * 4 * 3 * 3 * 2);
  tfr::testing::randomize(R, 8);
  CHECK(rel_diff(spectral_conv(u, R, SpectralPlan::make(5, 6, 5, 4)), spectral_oracle(u, R, 5, 4)) <= 1e-10);
}

TEST_CASE("spectral conv identities") {
  SUBCASE("full-mode identity round trip") {
    for (auto [h, w] : {std::pair{4, 4}, std::pair{6, 5}, std::pair{16, 16}}) {
      const Tensor u = random_tensor(3, h, w, 5);
      const Tensor y = spectral_conv(u, identity_spectral_weights(h, w / 2 + 1, 3), SpectralPlan::make(h, w, h, w / 2 + 1));
      CHECK(rel_diff(y, u) <= 1e-5);
    }
  }
  SUBCASE("DC only gives the channel mean") {
    const Tensor u = random_tensor(2, 6, 6, 3);
    const Tensor y = spectral_conv(u, identity_spectral_weights(1, 1, 2), SpectralPlan::make(6, 6, 1, 1));
    for (int c = 0; c < 2; ++c) {
      double mean = 0.0;
      for (int i = 0; i < 36; ++i) mean += u.channel(c)[i] / 36.0;
      for (int i = 0; i < 36; ++i) CHECK(y.channel(c)[i] == doctest::Approx(mean).epsilon(1e-12));
    }
  }
  SUBCASE("linearity") {
    const SpectralPlan plan = SpectralPlan::make(8, 8, 3, 3);
    Buffer R(3 * 3 * 2 * 2 * 2);
    tfr::testing::randomize(R, 4);
    const Tensor u = random_tensor(2, 8, 8, 1), v = random_tensor(2, 8, 8, 2);
    Tensor mix = u;
    for (std::size_t i = 0; i < mix.size(); ++i) mix.data[i] = 2.5 * u.data[i] - 0.7 * v.data[i];
    Tensor expect = spectral_conv(u, R, plan);
    expect *= 2.5;
    Tensor fv = spectral_conv(v, R, plan);
    fv *= -0.7;
    expect += fv;
    CHECK(rel_diff(spectral_conv(mix, R, plan), expect) <= 1e-5);
  }
  SUBCASE("translation commutes with the full identity") {
    const Tensor u = random_tensor(1, 6, 6, 9);
    Tensor shifted(1, 6, 6);
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) shifted(0, (i + 2) % 6, (j + 1) % 6) = u(0, i, j);
    }
    const SpectralPlan plan = SpectralPlan::make(6, 6, 6, 4);
    const auto R = identity_spectral_weights(6, 4, 1);
    const Tensor a = spectral_conv(u, R, plan);
    Tensor a_shift(1, 6, 6);
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) a_shift(0, (i + 2) % 6, (j + 1) % 6) = a(0, i, j);
    }
    CHECK(rel_diff(spectral_conv(shifted, R, plan), a_shift) <= 1e-10);
  }
  SUBCASE("truncation does not add energy") {
    for (int f = 1; f <= 5; ++f) {
      const Tensor u = random_tensor(2, 8, 8, f);
      const Tensor y = spectral_conv(u, identity_spectral_weights(f, std::min(f, 5), 2), SpectralPlan::make(8, 8, f, std::min(f, 5)));
      double eu = 0.0, ey = 0.0;
      for (double v : u.data) eu += v * v;
      for (double v : y.data) ey += v * v;
      CHECK(ey <= eu * (1 + 1e-12));
    }
  }
  SUBCASE("mode bounds") {
    CHECK_THROWS_AS(SpectralPlan::make(4, 4, 5, 2), ConfigError);
    CHECK_THROWS_AS(SpectralPlan::make(4, 4, 2, 4), ConfigError);
    CHECK_NOTHROW(SpectralPlan::make(4, 4, 4, 3));
  }
}

TEST_CASE("spectral and Fourier layer gradients") {
  Rng rng(12);
  SUBCASE("spectral conv input and weights") {
    ParamStore s;
    SpectralConv sc(s, "sc", 2, 2, 2, 4, 4, rng);
    tfr::testing::randomize(s[0].value, 6);
    Tensor x = random_tensor(2, 4, 4, 3);
    SpectralCache cache;
    require_all(check_params(s, [&] { return sc.forward(x, cache); }, [&](const Tensor& g) { sc.backward(cache, g); },
                             5, 1000));
    check_input_grad(
        "spectral input", x,
        [&](const Tensor& in) {
          SpectralCache c;
          return sc.forward(in, c);
        },
        [&](const Tensor& in, const Tensor& g) {
          SpectralCache c;
          sc.forward(in, c);
          return sc.backward(c, g);
        });
  }
  SUBCASE("fourier layer") {
    ParamStore s;
    FourierLayer fl(s, "fl", 2, 2, 2, 4, 4, rng);
    tfr::testing::randomize(s[0].value, 1);
    Tensor x = random_tensor(2, 4, 4, 3);
    FourierLayer::Cache cache;
    require_all(check_params(s, [&] { return fl.forward(x, cache); }, [&](const Tensor& g) { fl.backward(cache, g); },
                             5, 1000));
  }
  SUBCASE("fourier layer definitions") {
    ParamStore s;
    FourierLayer fl(s, "fl", 2, 2, 2, 4, 4, rng);
    FourierLayer::Cache cache;
    CHECK(fl.forward(Tensor(2, 4, 4), cache) == Tensor(2, 4, 4));
    auto& R = fl.spectral().weights().value;
    std::fill(R.begin(), R.end(), 0.0);
    tfr::testing::randomize(fl.local().bias()->value, 3);
    const Tensor x = random_tensor(2, 4, 4, 4);
    const Tensor want = gelu(fl.local().forward(x));
    CHECK(rel_diff(fl.forward(x, cache), want) <= 1e-14);
  }
}

TEST_CASE("encoder") {
  Rng rng(13);
  ParamStore s;
  UNetEncoder enc(s, "enc", 1, 32, rng);
  UNetEncoder::Cache cache;
  const Tensor y = enc.forward(Tensor(1, 64, 64), cache);
  CHECK(y.c == 32);
  CHECK(y.h == 16);
  CHECK(y.w == 16);
  for (double v : y.data) CHECK(v == 0.0);
  CHECK_THROWS_AS(enc.forward(Tensor(1, 10, 12), cache), ConfigError);

  ParamStore small;
  UNetEncoder e2(small, "enc", 1, 8, rng);
  for (std::size_t i = 0; i < small.count(); ++i) {
    if (small[i].name.find("bias") != std::string::npos) tfr::testing::randomize(small[i].value, i, -0.2, 0.2);
  }
  Tensor x = random_tensor(1, 8, 8, 2);
  require_all(check_params(small, [&] { return e2.forward(x, cache); }, [&](const Tensor& g) { e2.backward(cache, g); }));
}

TEST_CASE("auxiliary Fourier branch") {
  Rng rng(14);
  SUBCASE("shape") {
    ParamStore s;
    FourierBranch aux(s, "aux", 1, 32, 4, 12, 12, 64, 64, true, rng);
    FourierBranch::Cache c;
    const Tensor y = aux.forward(random_tensor(1, 64, 64, 1), c);
    CHECK(y.c == 1);
    CHECK(y.h == 16);
    CHECK(y.w == 16);
    CHECK_THROWS_AS(aux.forward(Tensor(1, 62, 64), c), ConfigError);
  }
  SUBCASE("constant input stays constant") {
    ParamStore s;
    FourierBranch aux(s, "aux", 1, 4, 2, 3, 3, 8, 8, false, rng);
    for (const auto& l : aux.layers()) {
      auto& R = l.spectral().weights().value;
      std::fill(R.begin(), R.end(), 0.0);
      // Identity local path.
      auto& w = l.local().weight().value;
      std::fill(w.begin(), w.end(), 0.0);
      for (int i = 0; i < 4; ++i) w[i * 4 + i] = 1.0;
    }
    FourierBranch::Cache c;
    const Tensor y = aux.forward(Tensor(1, 8, 8, 0.37), c);
    for (double v : y.data) CHECK(v == doctest::Approx(y.data[0]).epsilon(1e-14));
  }
  SUBCASE("gradients") {
    ParamStore s;
    FourierBranch aux(s, "aux", 1, 4, 2, 3, 3, 8, 8, true, rng);
    for (std::size_t i = 0; i < s.count(); ++i) {
      if (s[i].name.find("bias") != std::string::npos) tfr::testing::randomize(s[i].value, i, -0.2, 0.2);
    }
    Tensor x = random_tensor(1, 8, 8, 5);
    FourierBranch::Cache c;
    require_all(check_params(s, [&] { return aux.forward(x, c); }, [&](const Tensor& g) { aux.backward(c, g); }));
  }
}

TEST_CASE("unet") {
  Rng rng(15);
  ParamStore s;
  UNet net(s, "u", 2, 4, 3, 1, rng);
  UNet::Cache c;
  const Tensor y = net.forward(random_tensor(2, 16, 16, 1), c);
  CHECK(y.c == 1);
  CHECK(y.h == 16);
  CHECK_THROWS_AS(net.forward(Tensor(2, 12, 12), c), ConfigError);
  Tensor x = random_tensor(2, 8, 8, 2);
  require_all(check_params(s, [&] { return net.forward(x, c); }, [&](const Tensor& g) { net.backward(c, g); }));
}

TEST_CASE("SPADE") {
  Rng rng(16);
  SUBCASE("block gradients, parameters and conditioning") {
    ParamStore s;
    SpadeResBlock blk(s, "b", 4, 3, 4, 3, rng);
    for (std::size_t i = 0; i < s.count(); ++i) {
      if (s[i].name.find("bias") != std::string::npos) tfr::testing::randomize(s[i].value, i, -0.2, 0.2);
    }
    Tensor x = random_tensor(4, 4, 4, 1);
    Tensor cond = random_tensor(3, 2, 2, 2);
    SpadeResBlock::Cache c;
    Tensor gcond;
    require_all(check_params(
        s, [&] { return blk.forward(x, cond, c); },
        [&](const Tensor& g) {
          gcond = Tensor(3, 2, 2);
          blk.backward(c, g, gcond);
        }));
    check_input_grad(
        "spade conditioning", cond,
        [&](const Tensor& in) {
          SpadeResBlock::Cache cc;
          return blk.forward(x, in, cc);
        },
        [&](const Tensor& in, const Tensor& g) {
          SpadeResBlock::Cache cc;
          blk.forward(x, in, cc);
          Tensor gc(3, 2, 2);
          blk.backward(cc, g, gc);
          return gc;
        });
    check_input_grad(
        "spade input", x,
        [&](const Tensor& in) {
          SpadeResBlock::Cache cc;
          return blk.forward(in, cond, cc);
        },
        [&](const Tensor& in, const Tensor& g) {
          SpadeResBlock::Cache cc;
          blk.forward(in, cond, cc);
          Tensor gc(3, 2, 2);
          return blk.backward(cc, g, gc);
        });
  }
  SUBCASE("decoder shape and degenerate modulation") {
    ParamStore s;
    SpadeDecoder dec(s, "dec", 33, 32, 32, 16, 32, 16, rng);
    SpadeDecoder::Cache c;
    const Tensor cond = random_tensor(33, 16, 16, 3);
    const Tensor y = dec.forward(cond, c);
    CHECK(y.c == 1);
    CHECK(y.h == 64);
    CHECK(y.w == 64);
    for (std::size_t i = 0; i < s.count(); ++i) {
      if (s[i].name.find(".mod") != std::string::npos) std::fill(s[i].value.begin(), s[i].value.end(), 0.0);
    }
    const Tensor z = dec.forward(cond, c);
    for (double v : z.data) CHECK(std::isfinite(v));
    // Zero modulation leaves the plain normalization output.
    CHECK(c.b1.m0 == c.b1.n0.xhat);
    CHECK(c.b2.m1 == c.b2.n1.xhat);
    CHECK_THROWS_AS(dec.forward(Tensor(5, 16, 16), c), ConfigError);
  }
  SUBCASE("decoder gradients") {
    ParamStore s;
    SpadeDecoder dec(s, "dec", 3, 4, 4, 2, 3, 2, rng);
    for (std::size_t i = 0; i < s.count(); ++i) {
      if (s[i].name.find("bias") != std::string::npos) tfr::testing::randomize(s[i].value, i, -0.2, 0.2);
    }
    Tensor cond = random_tensor(3, 2, 2, 4);
    SpadeDecoder::Cache c;
    require_all(check_params(s, [&] { return dec.forward(cond, c); }, [&](const Tensor& g) { dec.backward(c, g); }));
  }
}
