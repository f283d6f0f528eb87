// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.
//
//   acceptance --tfr <path to tfr> --work <scratch dir> [--only 1,4,9]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gradcheck.hpp"
#include "tfr/checkpoint.hpp"
#include "tfr/datagen.hpp"
#include "tfr/encoding.hpp"
#include "tfr/error.hpp"
#include "tfr/hashing.hpp"
#include "tfr/metrics.hpp"
#include "tfr/model.hpp"
#include "tfr/nn/attention.hpp"
#include "tfr/nn/blocks.hpp"
#include "tfr/nn/layers.hpp"
#include "tfr/nn/spectral.hpp"
#include "tfr/solver.hpp"
#include "tfr/training.hpp"

namespace fs = std::filesystem;
using namespace tfr;
using nn::Buffer;
using nn::Tensor;
using tfr::testing::random_tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path tfr;
  fs::path work;
  // Evaluations made by earlier criteria, reused by the metric identity check.
  std::vector<EvalResult> evaluations;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

BoundarySpec left_right(double tl, double tr) {
  BoundarySpec b;
  b[Side::left] = SideCondition::dirichlet(tl);
  b[Side::right] = SideCondition::dirichlet(tr);
  b[Side::bottom] = SideCondition::neumann();
  b[Side::top] = SideCondition::neumann();
  return b;
}

// ---------------------------------------------------------------------------
// 1. Linear profile between two walls is reproduced to round-off.

Outcome solver_exactness(Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  const Grid g = make_grid(32, 32, 0.1, 0.1);
  const auto r = solve_steady(g, {}, left_right(298.0, 398.0), ConductivityModel::constant(1.0));
  double err = 0.0;
  for (int i = 0; i < g.ny; ++i) {
    for (int j = 0; j < g.nx; ++j) err = std::max(err, std::abs(r.field.at(i, j) - (298.0 + 1000.0 * g.x(j))));
  }
  const double t = seconds_since(t0);
  return {err <= 1e-8 && t < 1.0, fmt("max error %.3e K (limit 1e-8), %.3f s (limit 1 s)", err, t)};
}

// ---------------------------------------------------------------------------
// 2. Second-order convergence against a manufactured solution.

double manufactured_error(int n) {
  const Grid g = make_grid(n, n, 0.1, 0.1);
  const double pi = std::numbers::pi;
  const double amp = 100.0;
  const double k = pi * pi * (1.0 / (g.lx * g.lx) + 1.0 / (g.ly * g.ly)) * amp;
  // T = 298 + amp sin(pi x / L) sin(pi y / L) needs f = k sin sin; one source
  // rectangle per interior control volume carries f sampled at its node.
  std::vector<HeatSource> src;
  for (int i = 1; i < n - 1; ++i) {
    for (int j = 1; j < n - 1; ++j) {
      HeatSource s;
      s.kind = SourceKind::uniform;
      s.region = {g.x(j) - 0.5 * g.hx(), g.y(i) - 0.5 * g.hy(), g.x(j) + 0.5 * g.hx(), g.y(i) + 0.5 * g.hy()};
      s.power = k * std::sin(pi * g.x(j) / g.lx) * std::sin(pi * g.y(i) / g.ly);
      src.push_back(s);
    }
  }
  BoundarySpec b;
  for (Side s : kAllSides) b[s] = SideCondition::dirichlet(298.0);
  const auto r = solve_steady(g, src, b, ConductivityModel::constant(1.0));
  double err = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double exact = 298.0 + amp * std::sin(pi * g.x(j) / g.lx) * std::sin(pi * g.y(i) / g.ly);
      err = std::max(err, std::abs(r.field.at(i, j) - exact));
    }
  }
  return err;
}

Outcome solver_convergence(Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  const double e32 = manufactured_error(32), e64 = manufactured_error(64);
  const double ratio = e32 / e64, t = seconds_since(t0);
  return {ratio >= 3.2 && ratio <= 4.8 && t < 30.0,
          fmt("error 32x32 %.4e K, 64x64 %.4e K, ratio %.3f (want [3.2, 4.8]), %.2f s", e32, e64, ratio, t)};
}

// ---------------------------------------------------------------------------
// 3. Temperature-dependent conductivity.

Outcome nonlinear_solver(Context&) {
  const ScenarioSpec spec = scenario_template("NewScenario", 64);
  const Grid g = spec.grid();
  int ok = 0, worst_iters = 0;
  double worst_delta = 0.0, worst_residual = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto src = draw_sources(spec, derive_seed(2024, s));
    const auto r = solve_steady(g, src, spec.boundary, spec.conductivity, spec.solver);
    const double res = pde_residual(r.field, src, spec.boundary, spec.conductivity);
    worst_iters = std::max(worst_iters, r.report.iterations);
    worst_delta = std::max(worst_delta, r.report.nonlinear_delta);
    worst_residual = std::max(worst_residual, res);
    if (r.report.converged && r.report.iterations <= 100 && r.report.nonlinear_delta <= 1e-8 && res <= 1e-6) ++ok;
  }
  return {ok == 20, fmt("%d/20 draws pass; worst: %d Picard iterations, delta %.2e K, residual %.2e", ok, worst_iters,
                        worst_delta, worst_residual)};
}

// ---------------------------------------------------------------------------
// 4. Nearest-sensor assignment.

// Sensors on the half-node lattice make exact ties common. Squared distances
// scaled by (2 (nx-1) (ny-1) / L)^2 are integers, so the reference compares
// them exactly: smallest distance, then lowest sensor index.
std::vector<int> lattice_owner(const std::vector<std::pair<int, int>>& half_coords, int nx, int ny) {
  std::vector<int> out(static_cast<std::size_t>(nx) * ny);
  const long long sx = static_cast<long long>(ny - 1) * (ny - 1), sy = static_cast<long long>(nx - 1) * (nx - 1);
  for (int i = 0; i < ny; ++i) {
    for (int j = 0; j < nx; ++j) {
      long long best = -1;
      int owner = -1;
      for (std::size_t s = 0; s < half_coords.size(); ++s) {
        const long long dx = 2LL * j - half_coords[s].first, dy = 2LL * i - half_coords[s].second;
        const long long d = dx * dx * sx + dy * dy * sy;
        if (owner < 0 || d < best) {
          best = d;
          owner = static_cast<int>(s);
        }
      }
      out[static_cast<std::size_t>(i) * nx + j] = owner;
    }
  }
  return out;
}

std::vector<int> scan_owner(const SensorLayout& l, const Grid& g) {
  std::vector<int> out(g.node_count());
  for (int i = 0; i < g.ny; ++i) {
    for (int j = 0; j < g.nx; ++j) {
      double best = 0.0;
      int owner = -1;
      for (std::size_t s = 0; s < l.size(); ++s) {
        const double dx = g.x(j) - l.positions[s].x, dy = g.y(i) - l.positions[s].y;
        const double d = dx * dx + dy * dy;
        if (owner < 0 || d < best) {
          best = d;
          owner = static_cast<int>(s);
        }
      }
      out[g.flat(i, j)] = owner;
    }
  }
  return out;
}

Outcome voronoi_oracle(Context&) {
  Rng rng(404);
  int matched = 0, with_ties = 0;
  for (int t = 0; t < 100; ++t) {
    const int nx = static_cast<int>(rng.uniform_int(2, 16)), ny = static_cast<int>(rng.uniform_int(2, 16));
    const Grid g = make_grid(nx, ny, 0.1, 0.1);
    const int k = static_cast<int>(rng.uniform_int(1, 12));
    SensorLayout l;
    std::vector<int> want;
    if (t % 2 == 0) {
      std::set<std::pair<int, int>> used;
      std::vector<std::pair<int, int>> half;
      while (static_cast<int>(half.size()) < k && used.size() < static_cast<std::size_t>((2 * nx - 1) * (2 * ny - 1))) {
        const std::pair<int, int> c{static_cast<int>(rng.uniform_int(0, 2 * (nx - 1))),
                                    static_cast<int>(rng.uniform_int(0, 2 * (ny - 1)))};
        if (used.insert(c).second) half.push_back(c);
      }
      for (const auto& [a, b] : half) l.positions.push_back({0.5 * a * g.hx(), 0.5 * b * g.hy()});
      want = lattice_owner(half, nx, ny);
      // Count cases where some node is equidistant from two sensors.
      bool tie = false;
      for (int i = 0; i < ny && !tie; ++i) {
        for (int j = 0; j < nx && !tie; ++j) {
          std::vector<long long> d;
          for (const auto& [a, b] : half) {
            const long long dx = 2LL * j - a, dy = 2LL * i - b;
            d.push_back(dx * dx * (ny - 1) * (ny - 1) + dy * dy * (nx - 1) * (nx - 1));
          }
          std::sort(d.begin(), d.end());
          tie = d.size() > 1 && d[0] == d[1];
        }
      }
      with_ties += tie;
    } else {
      for (int s = 0; s < k; ++s) l.positions.push_back({rng.uniform(0.0, 0.1), rng.uniform(0.0, 0.1)});
      want = scan_owner(l, g);
    }
    if (voronoi_owner(l, g) == want) ++matched;
  }
  return {matched == 100,
          fmt("%d/100 layouts match the brute-force assignment (%d lattice layouts contain exact ties)", matched, with_ties)};
}

// ---------------------------------------------------------------------------
// 5. Spectral convolution against direct DFT summation.

// Retained first-axis frequencies: 0, 1, h-1, 2, h-2, ...
int row_frequency(int r, int h) { return r == 0 ? 0 : (r % 2 == 1 ? (r + 1) / 2 : h - r / 2); }

Tensor dft_oracle(const Tensor& u, const Buffer& R, int f1, int f2) {
  using cd = std::complex<double>;
  const int C = u.c, H = u.h, W = u.w;
  const double pi = std::numbers::pi;
  Tensor y(C, H, W);
  for (int r = 0; r < f1; ++r) {
    const int k1 = row_frequency(r, H);
    for (int k2 = 0; k2 < f2; ++k2) {
      std::vector<cd> uh(C);
      for (int j = 0; j < C; ++j) {
        for (int a = 0; a < H; ++a) {
          for (int b = 0; b < W; ++b) uh[j] += u(j, a, b) * std::exp(cd(0, -2 * pi * (double(k1) * a / H + double(k2) * b / W)));
        }
      }
      // Columns other than 0 and Nyquist stand for their conjugate twins too.
      const double weight = (k2 == 0 || (W % 2 == 0 && k2 == W / 2)) ? 1.0 : 2.0;
      for (int i = 0; i < C; ++i) {
        cd yh = 0;
        for (int j = 0; j < C; ++j) {
          const std::size_t o = ((((std::size_t)r * f2 + k2) * C + i) * C + j) * 2;
          yh += cd(R[o], R[o + 1]) * uh[j];
        }
        for (int a = 0; a < H; ++a) {
          for (int b = 0; b < W; ++b) {
            y(i, a, b) += weight / (H * W) * std::real(yh * std::exp(cd(0, 2 * pi * (double(k1) * a / H + double(k2) * b / W))));
          }
        }
      }
    }
  }
  return y;
}

Outcome spectral_oracle(Context&) {
  Rng rng(505);
  double worst = 0.0;
  int ok = 0;
  const std::pair<int, int> modes[] = {{2, 2}, {3, 2}, {4, 3}, {1, 1}, {2, 3}};
  for (int t = 0; t < 50; ++t) {
    const auto [f1, f2] = modes[t % 5];
    const Tensor u = random_tensor(2, 4, 4, 700 + t);
    Buffer R(static_cast<std::size_t>(f1) * f2 * 2 * 2 * 2);
    for (double& v : R) v = rng.uniform(-1, 1);
    const double e = tfr::testing::relative_error(nn::spectral_conv(u, R, nn::SpectralPlan::make(4, 4, f1, f2)).data,
                                                  dft_oracle(u, R, f1, f2).data);
    worst = std::max(worst, e);
    ok += e <= 1e-5;
  }
  const Tensor u = random_tensor(2, 4, 4, 9);
  const double round_trip = tfr::testing::relative_error(
      nn::spectral_conv(u, nn::identity_spectral_weights(4, 3, 2), nn::SpectralPlan::make(4, 4, 4, 3)).data, u.data);
  return {ok == 50 && round_trip <= 1e-5,
          fmt("%d/50 trials within 1e-5 (worst %.2e); identity full-mode round trip %.2e", ok, worst, round_trip)};
}

// ---------------------------------------------------------------------------
// 6. Finite-difference gradient suite.

struct GradSuite {
  std::vector<tfr::testing::GradReport> reports;

  void params(nn::ParamStore& s, const std::function<Tensor()>& f, const std::function<void(const Tensor&)>& b,
              std::size_t entries = 40) {
    for (auto& r : tfr::testing::check_params(s, f, b, 5, entries)) reports.push_back(r);
  }
  void input(const std::string& name, Tensor x, const std::function<Tensor(const Tensor&)>& f,
             const std::function<Tensor(const Tensor&, const Tensor&)>& grad_of) {
    const Tensor y = f(x);
    const tfr::testing::Probe probe(y, 99);
    const Tensor gx = grad_of(x, probe.grad(y));
    if (!gx.same_shape(x)) throw std::runtime_error(name + ": input gradient has the wrong shape");
    reports.push_back(tfr::testing::check_entries(name, x.data, gx.data, [&] { return probe.loss(f(x)); }, 200));
  }
};

void randomize_biases(nn::ParamStore& s, double a) {
  for (std::size_t i = 0; i < s.count(); ++i) {
    if (s[i].name.ends_with(".bias") || s[i].name.ends_with("bias")) tfr::testing::randomize(s[i].value, 40 + i, -a, a);
  }
}

ModelConfig tiny_model(Architecture a, Variant v) {
  ModelConfig c;
  c.arch = a;
  c.variant = v;
  c.height = c.width = 8;
  c.latent = 8;
  c.lift = 4;
  c.modes1 = c.modes2 = 3;
  c.fourier_layers = 2;
  c.decoder_width0 = 8;
  c.decoder_width1 = 8;
  c.decoder_width2 = 4;
  c.decoder_hidden1 = 4;
  c.decoder_hidden2 = 4;
  c.unet_width = 4;
  c.aux_unet_width = 4;
  c.init_seed = 3;
  return c;
}

Outcome gradient_suite(Context&) {
  using namespace tfr::nn;
  const auto t0 = std::chrono::steady_clock::now();
  GradSuite g;
  Rng rng(606);

  for (auto [k, stride] : {std::pair{1, 1}, std::pair{3, 1}, std::pair{3, 2}}) {
    ParamStore s;
    Conv2d conv(s, "conv" + std::to_string(k), 2, 3, k, stride, true, rng);
    tfr::testing::randomize(conv.bias()->value, 5);
    const Tensor x = random_tensor(2, 6, 6, 8);
    Conv2d::Cache c;
    g.params(s, [&] { return conv.forward(x, c); }, [&](const Tensor& gy) { conv.backward(c, gy); });
    g.input("conv input", x, [&](const Tensor& in) { return conv.forward(in); },
            [&](const Tensor& in, const Tensor& gy) {
              Conv2d::Cache cc;
              conv.forward(in, cc);
              return conv.backward(cc, gy);
            });
  }
  g.input("gelu", random_tensor(2, 4, 4, 1, -3, 3), [](const Tensor& x) { return gelu(x); },
          [](const Tensor& x, const Tensor& gy) { return gelu_backward(x, gy); });
  g.input("maxpool", random_tensor(2, 8, 8, 3), [](const Tensor& x) { return maxpool4(x); },
          [](const Tensor& x, const Tensor& gy) {
            PoolCache c;
            maxpool(x, 4, c);
            return maxpool_backward(c, gy);
          });
  g.input("nearest resize", random_tensor(2, 3, 5, 3), [](const Tensor& x) { return resize_nearest(x, 8, 7); },
          [](const Tensor& x, const Tensor& gy) { return resize_nearest_backward(gy, x.h, x.w); });
  {
    const Tensor other = random_tensor(3, 4, 4, 12);
    g.input("concat", random_tensor(2, 4, 4, 11), [&](const Tensor& x) { return concat_channels(x, other); },
            [](const Tensor&, const Tensor& gy) {
              Tensor ga, gb;
              split_channels(gy, 2, ga, gb);
              return ga;
            });
  }
  {
    ParamStore s;
    GroupNorm gn(&s, "group_norm", 16, true);
    tfr::testing::randomize(s[0].value, 1, 0.5, 1.5);
    tfr::testing::randomize(s[1].value, 2);
    const Tensor x = random_tensor(16, 3, 3, 4, -2, 2);
    GroupNorm::Cache c;
    g.params(s, [&] { return gn.forward(x, c); }, [&](const Tensor& gy) { gn.backward(c, gy); });
    g.input("group norm input", x,
            [&](const Tensor& in) {
              GroupNorm::Cache cc;
              return gn.forward(in, cc);
            },
            [&](const Tensor& in, const Tensor& gy) {
              GroupNorm::Cache cc;
              gn.forward(in, cc);
              return gn.backward(cc, gy);
            });
  }
  {
    // Attention over (tokens, channels) matrices, checked through tensors.
    const Matrix q = to_tokens(random_tensor(4, 2, 3, 21)), k = to_tokens(random_tensor(4, 2, 3, 22)),
                 v = to_tokens(random_tensor(4, 2, 3, 23));
    auto attend = [&](const Matrix& qq, const Matrix& kk, const Matrix& vv) { return from_tokens(cross_attention(qq, kk, vv), 2, 3); };
    auto grads = [&](const Matrix& qq, const Matrix& kk, const Matrix& vv, const Tensor& gy) {
      AttentionCache c;
      cross_attention(qq, kk, vv, &c);
      return cross_attention_backward(c, to_tokens(gy));
    };
    g.input("attention query", from_tokens(q, 2, 3), [&](const Tensor& x) { return attend(to_tokens(x), k, v); },
            [&](const Tensor& x, const Tensor& gy) { return from_tokens(grads(to_tokens(x), k, v, gy).q, 2, 3); });
    g.input("attention key", from_tokens(k, 2, 3), [&](const Tensor& x) { return attend(q, to_tokens(x), v); },
            [&](const Tensor& x, const Tensor& gy) { return from_tokens(grads(q, to_tokens(x), v, gy).k, 2, 3); });
    g.input("attention value", from_tokens(v, 2, 3), [&](const Tensor& x) { return attend(q, k, to_tokens(x)); },
            [&](const Tensor& x, const Tensor& gy) { return from_tokens(grads(q, k, to_tokens(x), gy).v, 2, 3); });
  }
  {
    ParamStore s;
    SpectralConv sc(s, "spectral", 2, 2, 2, 4, 4, rng);
    tfr::testing::randomize(s[0].value, 6);
    const Tensor x = random_tensor(2, 4, 4, 3);
    SpectralCache c;
    g.params(s, [&] { return sc.forward(x, c); }, [&](const Tensor& gy) { sc.backward(c, gy); }, 1000);
    g.input("spectral input", x,
            [&](const Tensor& in) {
              SpectralCache cc;
              return sc.forward(in, cc);
            },
            [&](const Tensor& in, const Tensor& gy) {
              SpectralCache cc;
              sc.forward(in, cc);
              return sc.backward(cc, gy);
            });
  }
  {
    ParamStore s;
    FourierLayer fl(s, "fourier_layer", 2, 2, 2, 4, 4, rng);
    tfr::testing::randomize(s[0].value, 1);
    randomize_biases(s, 0.2);
    const Tensor x = random_tensor(2, 4, 4, 3);
    FourierLayer::Cache c;
    g.params(s, [&] { return fl.forward(x, c); }, [&](const Tensor& gy) { fl.backward(c, gy); }, 1000);
    g.input("fourier layer input", x,
            [&](const Tensor& in) {
              FourierLayer::Cache cc;
              return fl.forward(in, cc);
            },
            [&](const Tensor& in, const Tensor& gy) {
              FourierLayer::Cache cc;
              fl.forward(in, cc);
              return fl.backward(cc, gy);
            });
  }
  {
    ParamStore s;
    FourierBranch aux(s, "fourier_branch", 1, 4, 2, 3, 3, 8, 8, true, rng);
    randomize_biases(s, 0.2);
    const Tensor x = random_tensor(1, 8, 8, 5);
    FourierBranch::Cache c;
    g.params(s, [&] { return aux.forward(x, c); }, [&](const Tensor& gy) { aux.backward(c, gy); });
  }
  {
    ParamStore s;
    UNetEncoder enc(s, "encoder", 1, 8, rng);
    randomize_biases(s, 0.2);
    const Tensor x = random_tensor(1, 8, 8, 2);
    UNetEncoder::Cache c;
    g.params(s, [&] { return enc.forward(x, c); }, [&](const Tensor& gy) { enc.backward(c, gy); });
  }
  {
    ParamStore s;
    UNet net(s, "unet", 2, 4, 3, 1, rng);
    const Tensor x = random_tensor(2, 8, 8, 2);
    UNet::Cache c;
    g.params(s, [&] { return net.forward(x, c); }, [&](const Tensor& gy) { net.backward(c, gy); });
  }
  {
    ParamStore s;
    SpadeResBlock blk(s, "spade_block", 4, 3, 4, 3, rng);
    randomize_biases(s, 0.2);
    const Tensor x = random_tensor(4, 4, 4, 1), cond = random_tensor(3, 2, 2, 2);
    SpadeResBlock::Cache c;
    g.params(s, [&] { return blk.forward(x, cond, c); },
             [&](const Tensor& gy) {
               Tensor gc(3, 2, 2);
               blk.backward(c, gy, gc);
             });
    g.input("spade conditioning", cond,
            [&](const Tensor& in) {
              SpadeResBlock::Cache cc;
              return blk.forward(x, in, cc);
            },
            [&](const Tensor& in, const Tensor& gy) {
              SpadeResBlock::Cache cc;
              blk.forward(x, in, cc);
              Tensor gc(3, 2, 2);
              blk.backward(cc, gy, gc);
              return gc;
            });
    g.input("spade input", x,
            [&](const Tensor& in) {
              SpadeResBlock::Cache cc;
              return blk.forward(in, cond, cc);
            },
            [&](const Tensor& in, const Tensor& gy) {
              SpadeResBlock::Cache cc;
              blk.forward(in, cond, cc);
              Tensor gc(3, 2, 2);
              return blk.backward(cc, gy, gc);
            });
  }
  {
    ParamStore s;
    SpadeDecoder dec(s, "spade_decoder", 3, 4, 4, 2, 3, 2, rng);
    randomize_biases(s, 0.2);
    const Tensor cond = random_tensor(3, 2, 2, 4);
    SpadeDecoder::Cache c;
    g.params(s, [&] { return dec.forward(cond, c); }, [&](const Tensor& gy) { dec.backward(c, gy); });
  }
  // Complete networks: every branch variant of the reconstruction model and
  // the four baselines.
  std::vector<ModelConfig> models;
  for (auto v : {Variant::full, Variant::no_aux, Variant::no_implicit, Variant::unet_aux}) {
    models.push_back(tiny_model(Architecture::iptr, v));
  }
  for (auto a : {Architecture::vor_unet, Architecture::vor_fno, Architecture::mask_unet, Architecture::mask_fno}) {
    models.push_back(tiny_model(a, Variant::full));
  }
  for (const auto& mc : models) {
    Model m(mc);
    // Zero biases leave the no_implicit decoder input almost constant, where
    // the parameter-free normalization is nearly singular; check at a generic
    // point instead.
    randomize_biases(m.params(), 0.5);
    ModelInput in;
    in.target = random_tensor(mc.input_channels(), 8, 8, 9, 0.0, 1.0);
    if (mc.uses_reference()) {
      in.reference = random_tensor(mc.input_channels(), 8, 8, 10, 0.0, 1.0);
      in.reference_field = random_tensor(1, 8, 8, 11, 0.0, 1.0);
    }
    ForwardCache fc;
    const std::size_t before = g.reports.size();
    g.params(m.params(), [&] { return m.forward(in, fc); }, [&](const Tensor& gy) { m.backward(fc, gy); }, 12);
    const std::string tag = std::string(to_string(mc.arch)) + "/" + std::string(to_string(mc.variant)) + ":";
    for (std::size_t i = before; i < g.reports.size(); ++i) g.reports[i].name = tag + g.reports[i].name;
  }

  const auto worst = std::max_element(g.reports.begin(), g.reports.end(),
                                      [](const auto& a, const auto& b) { return a.rel_error < b.rel_error; });
  const auto failed = std::count_if(g.reports.begin(), g.reports.end(), [](const auto& r) { return !(r.rel_error <= 1e-4); });
  const double t = seconds_since(t0);
  return {failed == 0 && t < 300.0, fmt("%zu gradient arrays, %td above 1e-4; worst %.2e (%s); %.1f s (limit 300 s)",
                                        g.reports.size(), failed, worst->rel_error, worst->name.c_str(), t)};
}

// ---------------------------------------------------------------------------
// 7. Latent shapes at desk scale.

Outcome shape_contracts(Context&) {
  ModelConfig c;
  c.height = c.width = 64;
  c.latent = 32;
  Model m(c);
  ModelInput in{random_tensor(1, 64, 64, 1, 0, 1), random_tensor(1, 64, 64, 2, 0, 1), random_tensor(1, 64, 64, 3, 0, 1)};
  ForwardCache fc;
  const Tensor y = m.forward(in, fc);
  const bool ok = fc.implicit.shape_str() == "32x16x16" && fc.aux.shape_str() == "1x16x16" &&
                  fc.fused.shape_str() == "33x16x16" && y.shape_str() == "1x64x64";
  return {ok, "implicit " + fc.implicit.shape_str() + ", auxiliary " + fc.aux.shape_str() + ", fused " +
                  fc.fused.shape_str() + ", output " + y.shape_str()};
}

// ---------------------------------------------------------------------------
// 8. Capacity: memorise four sliding pairs.

Outcome overfit_capacity(Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset ds = generate(scenario_template("HSink", 32), SplitCounts{4, 0, 0}, 88);
  const auto pairs = make_pairs(ds.train, PairingStrategy{});
  ModelConfig c;
  c.height = c.width = 32;
  Model m(c);
  m.set_stats(ds.stats);
  TrainConfig t;
  t.epochs = 500;
  t.batch_size = 1;
  t.milestones = {400};
  const TrainHistory h = train(m, pairs, nullptr, t);
  const double loss = pair_loss(m, pairs), secs = seconds_since(t0);
  return {loss < 0.01 && secs < 600.0,
          fmt("normalized train MAE %.5f after %zu steps (want < 0.01), %.0f s (limit 600 s)", loss, h.steps, secs)};
}

// ---------------------------------------------------------------------------
// 9. Desk-scale comparison with the baselines.

Dataset desk_dataset() { return generate(scenario_template("HSink", 64), SplitCounts{200, 0, 50}, 1); }

Outcome desk_comparison(Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset ds = desk_dataset();
  const auto pairs = make_pairs(ds.train, PairingStrategy{});
  const EvalResult identity = evaluate_voronoi_identity(ds.test);
  ctx.evaluations.push_back(identity);
  std::map<std::string, double> mae;
  for (auto a : {Architecture::iptr, Architecture::vor_unet, Architecture::mask_unet, Architecture::vor_fno,
                 Architecture::mask_fno}) {
    ModelConfig c;
    c.arch = a;
    Model m(c);
    m.set_stats(ds.stats);
    train(m, pairs, nullptr, TrainConfig::desk());
    const EvalResult r = evaluate(m, ds.test, ds.train, 0);
    ctx.evaluations.push_back(r);
    mae[std::string(to_string(a))] = r.mae_mean;
    std::fprintf(stderr, "  %-10s test MAE %.4f K, Max-AE %.4f K\n", std::string(to_string(a)).c_str(), r.mae_mean,
                 r.max_ae_max);
  }
  const double ours = mae["iptr"];
  int beaten = 0;
  std::string others;
  for (const auto& [name, v] : mae) {
    if (name == "iptr") continue;
    beaten += ours < v;
    others += fmt(", %s %.4f", name.c_str(), v);
  }
  const double secs = seconds_since(t0);
  return {ours < identity.mae_mean && beaten >= 2 && secs < 3600.0,
          fmt("test MAE (K): iptr %.4f, voronoi identity %.4f%s; beats %d/4 baselines; %.0f s (limit 3600 s)", ours,
              identity.mae_mean, others.c_str(), beaten, secs)};
}

// ---------------------------------------------------------------------------
// CLI helpers for 10 and 12.

int run_tfr(const Context& ctx, const fs::path& cwd, const std::string& args) {
  const std::string cmd = "cd '" + cwd.string() + "' && '" + ctx.tfr.string() + "' " + args + " > log.txt 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc == -1) throw std::runtime_error("could not start " + ctx.tfr.string());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : 128;
}

void require_tfr(const Context& ctx) {
  if (ctx.tfr.empty() || !fs::exists(ctx.tfr)) throw std::runtime_error("tfr executable not given (--tfr)");
}

std::map<std::string, std::vector<std::string>> read_csv_rows(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("missing " + p.string());
  std::map<std::string, std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream s(line);
    std::string c;
    while (std::getline(s, c, ',')) cells.push_back(c);
    if (!cells.empty()) rows[cells[0]] = cells;
  }
  return rows;
}

// ---------------------------------------------------------------------------
// 10. Ablation driver.

Outcome ablation_driver(Context& ctx) {
  require_tfr(ctx);
  const fs::path dir = ctx.work / "ablation";
  fs::remove_all(dir);
  fs::create_directories(dir);
  if (int rc = run_tfr(ctx, dir, "gen-data --scenario hsink --n 200 --test 50 --res 64 --seed 1 --out data"); rc != 0) {
    return {false, fmt("gen-data exited with %d", rc)};
  }
  const auto t0 = std::chrono::steady_clock::now();
  if (int rc = run_tfr(ctx, dir, "ablate --data data --out runs"); rc != 0) return {false, fmt("ablate exited with %d", rc)};
  const auto rows = read_csv_rows(dir / "runs" / "ablation.csv");
  std::string missing;
  for (const char* m : {"iptr", "iptr_no_aux", "iptr_no_implicit", "iptr_unet_aux", "iptr_fixed"}) {
    if (!rows.count(m) || !fs::exists(dir / "runs" / m / "checkpoint" / "params.json")) missing += std::string(" ") + m;
  }
  if (!missing.empty()) return {false, "missing ablation runs:" + missing};
  const nlohmann::json manifest = read_checkpoint_manifest(dir / "runs" / "iptr_no_aux" / "checkpoint");
  bool aux_free = true;
  for (const auto& p : manifest.at("params")) aux_free &= !p.at("name").get<std::string>().starts_with("aux");
  const double sliding = std::stod(rows.at("iptr")[3]), fixed = std::stod(rows.at("iptr_fixed")[3]);
  std::string table;
  for (const auto& [name, r] : rows) table += " " + name + "=" + r[3];
  return {aux_free && sliding <= fixed,
          fmt("test MAE (K):%s; sliding %s fixed; no_aux checkpoint %s aux parameters; %.0f s", table.c_str(),
              sliding <= fixed ? "<=" : ">", aux_free ? "has no" : "HAS", seconds_since(t0))};
}

// ---------------------------------------------------------------------------
// 11. Metric identities.

Outcome metric_identities(Context& ctx) {
  std::vector<EvalResult> evals = ctx.evaluations;
  if (evals.empty()) {
    // Standalone: the identity baseline and an untrained network.
    const Dataset ds = generate(scenario_template("HSink", 32), SplitCounts{4, 0, 20}, 5);
    evals.push_back(evaluate_voronoi_identity(ds.test));
    ModelConfig c;
    c.height = c.width = 32;
    Model m(c);
    m.set_stats(ds.stats);
    evals.push_back(evaluate(m, ds.test, ds.train, 0));
  }
  std::size_t samples = 0, violations = 0;
  for (const auto& e : evals) {
    for (std::size_t i = 0; i < e.mae.size(); ++i, ++samples) violations += !(e.max_ae[i] >= e.mae[i]);
  }
  const Dataset ds = generate(scenario_template("DSine", 32), SplitCounts{2, 0, 0}, 6);
  int exact = 0;
  const double offsets[] = {0.5, 1.25, 3.0};
  for (const auto& s : ds.train) {
    for (double off : offsets) {
      ScalarField shifted = s.field;
      for (double& v : shifted.values) v += off;
      exact += mae(s.field, shifted) == off && max_ae(s.field, shifted) == off;
    }
  }
  const int cases = static_cast<int>(ds.train.size() * std::size(offsets));
  return {samples > 0 && violations == 0 && exact == cases,
          fmt("Max-AE >= MAE on %zu/%zu evaluated samples; constant offsets exact in %d/%d cases", samples - violations,
              samples, exact, cases)};
}

// ---------------------------------------------------------------------------
// 12. Repeated commands give identical outputs.

Outcome determinism(Context& ctx) {
  require_tfr(ctx);
  const std::vector<std::string> commands = {
      "gen-data --scenario hsink --n 12 --val 2 --test 4 --res 32 --seed 5 --out data",
      "gen-data --scenario dsine --n 6 --test 4 --res 32 --seed 6 --out new",
      "train --model iptr --data data --set train.epochs=3 --set train.milestones=[2] --out train",
      "train --model vor_unet --data data --set train.epochs=2 --set train.milestones=[1] --out unet",
      "eval --checkpoint train --data data --out eval",
      "eval --checkpoint unet --model vor_unet --data data --out eval_unet",
      "finetune --checkpoint train --data new --shots 4 --set finetune.epochs=2 --set finetune.milestones=[1] --out ft",
      "ablate --data data --variant no_aux --set train.epochs=1 --set train.milestones=[] --out ablate",
      "sweep --res 32 --n 6 --test 2 --counts 9 16 --set train.epochs=1 --set train.milestones=[] --out sweep",
      "plot --checkpoint train --data data --samples 2 --curve ablate/ablation.csv --out plot",
  };
  std::string hashes[2], inputs_before, inputs_after;
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path dir = ctx.work / "determinism" / (rep == 0 ? "a" : "b");
    fs::remove_all(dir);
    fs::create_directories(dir);
    for (const auto& c : commands) {
      if (c.starts_with("train") && rep == 0 && inputs_before.empty()) inputs_before = sha256_tree(dir / "data");
      if (int rc = run_tfr(ctx, dir, c); rc != 0) return {false, fmt("'%s' exited with %d", c.c_str(), rc)};
    }
    if (rep == 0) inputs_after = sha256_tree(dir / "data");
    fs::remove(dir / "log.txt");
    hashes[rep] = sha256_tree(dir);
  }
  if (hashes[0] != hashes[1]) {
    std::string diff;
    const fs::path a = ctx.work / "determinism" / "a", b = ctx.work / "determinism" / "b";
    for (const auto& e : fs::recursive_directory_iterator(a)) {
      if (!e.is_regular_file()) continue;
      const fs::path rel = fs::relative(e.path(), a);
      if (!fs::exists(b / rel) || sha256_file(e.path()) != sha256_file(b / rel)) diff += " " + rel.string();
    }
    return {false, "outputs differ:" + diff};
  }
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(ctx.work / "determinism" / "a")) files += e.is_regular_file();
  return {inputs_before == inputs_after,
          fmt("%zu commands, %zu output files bit-identical across repeats (tree %s...); input data %s", commands.size(),
              files, hashes[0].substr(0, 12).c_str(), inputs_before == inputs_after ? "unchanged" : "MODIFIED")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  Context ctx;
  std::vector<int> only;
  app.add_option("--tfr", ctx.tfr, "tfr executable");
  app.add_option("--work", ctx.work, "scratch directory")->required();
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(ctx.work);
  ctx.work = fs::absolute(ctx.work);
  if (!ctx.tfr.empty()) ctx.tfr = fs::absolute(ctx.tfr);

  const std::vector<std::pair<std::string, std::function<Outcome(Context&)>>> criteria = {
      {"solver exactness", solver_exactness},     {"solver convergence order", solver_convergence},
      {"nonlinear conductivity", nonlinear_solver}, {"voronoi oracle", voronoi_oracle},
      {"spectral conv oracle", spectral_oracle},  {"gradient suite", gradient_suite},
      {"shape contracts", shape_contracts},       {"overfit capacity", overfit_capacity},
      {"desk-scale comparison", desk_comparison}, {"ablation driver", ablation_driver},
      {"metric identities", metric_identities},   {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s  %2d  %-26s %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
