#include "tfr/nn/blocks.hpp"

#include "tfr/error.hpp"

namespace tfr::nn {

ConvBlock::ConvBlock(ParamStore& store, const std::string& name, int in, int out, int stride, bool second_norm,
                     Rng& rng)
    : conv_a_(store, name + ".conv1", in, out, 3, stride, true, rng),
      conv_b_(store, name + ".conv2", out, out, 3, 1, true, rng),
      norm_a_(&store, name + ".norm1", out, true),
      second_norm_(second_norm) {
  if (second_norm) norm_b_ = GroupNorm(&store, name + ".norm2", out, true);
}

Tensor ConvBlock::forward(const Tensor& x, Cache& cache) const {
  const Tensor a = conv_a_.forward(x, cache.a);
  cache.a_norm = norm_a_.forward(a, cache.na);
  Tensor b = conv_b_.forward(gelu(cache.a_norm), cache.b);
  if (second_norm_) b = norm_b_.forward(b, cache.nb);
  cache.b_out = std::move(b);
  return gelu(cache.b_out);
}

Tensor ConvBlock::backward(const Cache& cache, const Tensor& gy) const {
  Tensor g = gelu_backward(cache.b_out, gy);
  if (second_norm_) g = norm_b_.backward(cache.nb, g);
  g = conv_b_.backward(cache.b, g);
  g = gelu_backward(cache.a_norm, g);
  g = norm_a_.backward(cache.na, g);
  return conv_a_.backward(cache.a, g);
}

UNetEncoder::UNetEncoder(ParamStore& store, const std::string& name, int in, int channels, Rng& rng)
    : b1_(store, name + ".down1", in, channels / 2, 2, false, rng),
      b2_(store, name + ".down2", channels / 2, channels, 2, false, rng) {
  if (channels < 2 || channels % 2 != 0) throw ConfigError("encoder width must be even");
}

Tensor UNetEncoder::forward(const Tensor& x, Cache& cache) const {
  if (x.h % 4 != 0 || x.w % 4 != 0) {
    throw ConfigError("encoder input " + x.shape_str() + ": spatial size must be divisible by 4");
  }
  return b2_.forward(b1_.forward(x, cache.b1), cache.b2);
}

Tensor UNetEncoder::backward(const Cache& cache, const Tensor& gy) const {
  return b1_.backward(cache.b1, b2_.backward(cache.b2, gy));
}

FourierBranch::FourierBranch(ParamStore& store, const std::string& name, int in, int lift, int layers, int f1,
                             int f2, int h, int w, bool pool, Rng& rng)
    : fc0_(store, name + ".fc0", in, lift, 1, 1, true, rng), pool_(pool) {
  if (lift < 2) throw ConfigError("lift width must be at least 2");
  for (int l = 0; l < layers; ++l) {
    layers_.emplace_back(store, name + ".fourier" + std::to_string(l), lift, f1, f2, h, w, rng);
  }
  fc1_ = Conv2d(store, name + ".fc1", lift, lift / 2, 1, 1, true, rng);
  fc2_ = Conv2d(store, name + ".fc2", lift / 2, 1, 1, 1, true, rng);
}

Tensor FourierBranch::forward(const Tensor& x, Cache& cache) const {
  if (pool_ && (x.h % 4 != 0 || x.w % 4 != 0)) {
    throw ConfigError("auxiliary branch input " + x.shape_str() + ": spatial size must be divisible by 4");
  }
  Tensor a = fc0_.forward(x, cache.fc0);
  cache.layers.resize(layers_.size());
  for (std::size_t l = 0; l < layers_.size(); ++l) a = layers_[l].forward(a, cache.layers[l]);
  cache.fc1_out = fc1_.forward(a, cache.fc1);
  Tensor o = fc2_.forward(gelu(cache.fc1_out), cache.fc2);
  if (!pool_) return o;
  return maxpool(o, 4, cache.pool);
}

Tensor FourierBranch::backward(const Cache& cache, const Tensor& gy) const {
  Tensor g = pool_ ? maxpool_backward(cache.pool, gy) : gy;
  g = fc2_.backward(cache.fc2, g);
  g = gelu_backward(cache.fc1_out, g);
  g = fc1_.backward(cache.fc1, g);
  for (std::size_t l = layers_.size(); l-- > 0;) g = layers_[l].backward(cache.layers[l], g);
  return fc0_.backward(cache.fc0, g);
}

UNet::UNet(ParamStore& store, const std::string& name, int in, int width, int levels, int out, Rng& rng)
    : levels_(levels) {
  if (levels < 1 || width < 1) throw ConfigError("UNet needs at least one level and positive width");
  int ch = in;
  for (int l = 0; l < levels; ++l) {
    const int o = width << l;
    down_.emplace_back(store, name + ".down" + std::to_string(l), ch, o, 1, true, rng);
    ch = o;
  }
  bottom_ = ConvBlock(store, name + ".bottom", ch, width << levels, 1, true, rng);
  ch = width << levels;
  for (int l = levels - 1; l >= 0; --l) {
    const int o = width << l;
    up_.emplace_back(store, name + ".up" + std::to_string(l), ch + o, o, 1, true, rng);
    ch = o;
  }
  head_ = Conv2d(store, name + ".head", width, out, 1, 1, true, rng);
}

Tensor UNet::forward(const Tensor& x, Cache& cache) const {
  const int div = 1 << levels_;
  if (x.h % div != 0 || x.w % div != 0) {
    throw ConfigError("UNet input " + x.shape_str() + ": spatial size must be divisible by " + std::to_string(div));
  }
  cache.down.resize(down_.size());
  cache.up.resize(up_.size());
  cache.pools.resize(down_.size());
  cache.skip_channels.clear();
  std::vector<Tensor> skips;
  Tensor a = x;
  for (std::size_t l = 0; l < down_.size(); ++l) {
    Tensor s = down_[l].forward(a, cache.down[l]);
    a = maxpool(s, 2, cache.pools[l]);
    cache.skip_channels.push_back(s.c);
    skips.push_back(std::move(s));
  }
  a = bottom_.forward(a, cache.bottom);
  for (std::size_t u = 0; u < up_.size(); ++u) {
    const Tensor& s = skips[skips.size() - 1 - u];
    a = up_[u].forward(concat_channels(resize_nearest(a, s.h, s.w), s), cache.up[u]);
  }
  return head_.forward(a, cache.head);
}

Tensor UNet::backward(const Cache& cache, const Tensor& gy) const {
  Tensor g = head_.backward(cache.head, gy);
  std::vector<Tensor> gskip(down_.size());
  for (std::size_t u = up_.size(); u-- > 0;) {
    const std::size_t l = down_.size() - 1 - u;
    const Tensor gc = up_[u].backward(cache.up[u], g);
    Tensor gup;
    split_channels(gc, gc.c - cache.skip_channels[l], gup, gskip[l]);
    g = resize_nearest_backward(gup, gup.h / 2, gup.w / 2);
  }
  g = bottom_.backward(cache.bottom, g);
  for (std::size_t l = down_.size(); l-- > 0;) {
    Tensor gs = maxpool_backward(cache.pools[l], g);
    gs += gskip[l];
    g = down_[l].backward(cache.down[l], gs);
  }
  return g;
}

SpadeResBlock::SpadeResBlock(ParamStore& store, const std::string& name, int fin, int fout, int hidden, int cond,
                             Rng& rng)
    : trunk_(store, name + ".trunk", cond, hidden, 3, 1, true, rng),
      mod0_(store, name + ".mod0", hidden, 2 * fin, 3, 1, true, rng),
      mod1_(store, name + ".mod1", hidden, 2 * fout, 3, 1, true, rng),
      conv0_(store, name + ".conv0", fin, fout, 3, 1, true, rng),
      conv1_(store, name + ".conv1", fout, fout, 3, 1, true, rng),
      n0_(nullptr, name + ".norm0", fin, false),
      n1_(nullptr, name + ".norm1", fout, false),
      fin_(fin),
      fout_(fout),
      learned_shortcut_(fin != fout) {
  if (learned_shortcut_) shortcut_ = Conv2d(store, name + ".shortcut", fin, fout, 1, 1, false, rng);
}

namespace {

// m = n * (1 + gamma) + beta, with gb = [gamma; beta] along channels.
Tensor modulate(const Tensor& n, const Tensor& gb) {
  Tensor m = n;
  const std::size_t half = n.size();
  for (std::size_t i = 0; i < half; ++i) m.data[i] = n.data[i] * (1.0 + gb.data[i]) + gb.data[half + i];
  return m;
}

// Returns the gradient w.r.t. n and fills ggb.
Tensor modulate_backward(const Tensor& n, const Tensor& gb, const Tensor& gm, Tensor& ggb) {
  Tensor gn = gm;
  ggb = Tensor(gb.c, gb.h, gb.w);
  const std::size_t half = n.size();
  for (std::size_t i = 0; i < half; ++i) {
    gn.data[i] = gm.data[i] * (1.0 + gb.data[i]);
    ggb.data[i] = gm.data[i] * n.data[i];
    ggb.data[half + i] = gm.data[i];
  }
  return gn;
}

}  // namespace

Tensor SpadeResBlock::forward(const Tensor& x, const Tensor& cond, Cache& cache) const {
  cache.cond_h = cond.h;
  cache.cond_w = cond.w;
  const Tensor c = resize_nearest(cond, x.h, x.w);
  cache.trunk_pre = trunk_.forward(c, cache.trunk);
  const Tensor t = gelu(cache.trunk_pre);
  cache.mod0_out = mod0_.forward(t, cache.mod0);
  cache.mod1_out = mod1_.forward(t, cache.mod1);

  const Tensor n0 = n0_.forward(x, cache.n0);
  cache.m0 = modulate(n0, cache.mod0_out);
  const Tensor h = conv0_.forward(gelu(cache.m0), cache.conv0);
  const Tensor n1 = n1_.forward(h, cache.n1);
  cache.m1 = modulate(n1, cache.mod1_out);
  Tensor y = conv1_.forward(gelu(cache.m1), cache.conv1);
  if (learned_shortcut_) {
    y += shortcut_.forward(x, cache.shortcut);
  } else {
    y += x;
  }
  return y;
}

Tensor SpadeResBlock::backward(const Cache& cache, const Tensor& gy, Tensor& grad_cond) const {
  Tensor gx = learned_shortcut_ ? shortcut_.backward(cache.shortcut, gy) : gy;

  Tensor g = conv1_.backward(cache.conv1, gy);
  g = gelu_backward(cache.m1, g);
  Tensor ggb1;
  g = modulate_backward(cache.n1.xhat, cache.mod1_out, g, ggb1);
  g = n1_.backward(cache.n1, g);
  g = conv0_.backward(cache.conv0, g);
  g = gelu_backward(cache.m0, g);
  Tensor ggb0;
  g = modulate_backward(cache.n0.xhat, cache.mod0_out, g, ggb0);
  gx += n0_.backward(cache.n0, g);

  Tensor gt = mod0_.backward(cache.mod0, ggb0);
  gt += mod1_.backward(cache.mod1, ggb1);
  gt = gelu_backward(cache.trunk_pre, gt);
  const Tensor gc = trunk_.backward(cache.trunk, gt);
  grad_cond += resize_nearest_backward(gc, cache.cond_h, cache.cond_w);
  return gx;
}

SpadeDecoder::SpadeDecoder(ParamStore& store, const std::string& name, int cond, int width0, int width1,
                           int width2, int hidden1, int hidden2, Rng& rng)
    : head_(store, name + ".head", cond, width0, 3, 1, true, rng),
      out_(store, name + ".out", width2, 1, 3, 1, true, rng),
      b1_(store, name + ".block1", width0, width1, hidden1, cond, rng),
      b2_(store, name + ".block2", width1, width2, hidden2, cond, rng) {}

Tensor SpadeDecoder::forward(const Tensor& cond, Cache& cache) const {
  if (cond.c != head_.in_channels()) {
    throw ConfigError("decoder expects " + std::to_string(head_.in_channels()) + " conditioning channels, got " +
                      std::to_string(cond.c));
  }
  Tensor x = head_.forward(cond, cache.head);
  cache.h0 = x.h;
  cache.w0 = x.w;
  x = b1_.forward(resize_nearest(x, 2 * x.h, 2 * x.w), cond, cache.b1);
  cache.h1 = x.h;
  cache.w1 = x.w;
  x = b2_.forward(resize_nearest(x, 2 * x.h, 2 * x.w), cond, cache.b2);
  cache.pre_out = std::move(x);
  return out_.forward(gelu(cache.pre_out), cache.out);
}

Tensor SpadeDecoder::backward(const Cache& cache, const Tensor& gy) const {
  Tensor gcond(head_.in_channels(), cache.h0, cache.w0);
  Tensor g = out_.backward(cache.out, gy);
  g = gelu_backward(cache.pre_out, g);
  g = b2_.backward(cache.b2, g, gcond);
  g = resize_nearest_backward(g, cache.h1, cache.w1);
  g = b1_.backward(cache.b1, g, gcond);
  g = resize_nearest_backward(g, cache.h0, cache.w0);
  gcond += head_.backward(cache.head, g);
  return gcond;
}

}  // namespace tfr::nn
