#include "tfr/model.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "tfr/error.hpp"

namespace tfr {

namespace {

constexpr std::pair<Architecture, std::string_view> kArchNames[] = {
    {Architecture::iptr, "iptr"},         {Architecture::vor_unet, "vor_unet"}, {Architecture::vor_fno, "vor_fno"},
    {Architecture::mask_unet, "mask_unet"}, {Architecture::mask_fno, "mask_fno"}};
constexpr std::pair<Variant, std::string_view> kVariantNames[] = {
    {Variant::full, "full"}, {Variant::no_aux, "no_aux"}, {Variant::no_implicit, "no_implicit"}, {Variant::unet_aux, "unet_aux"}};

bool is_unet(Architecture a) { return a == Architecture::vor_unet || a == Architecture::mask_unet; }
bool is_fno(Architecture a) { return a == Architecture::vor_fno || a == Architecture::mask_fno; }

}  // namespace

std::string_view to_string(Architecture a) {
  for (auto [k, n] : kArchNames) {
    if (k == a) return n;
  }
  return "?";
}

std::string_view to_string(Variant v) {
  for (auto [k, n] : kVariantNames) {
    if (k == v) return n;
  }
  return "?";
}

Architecture parse_architecture(std::string_view text) {
  std::string all;
  for (auto [k, n] : kArchNames) {
    if (n == text) return k;
    all += (all.empty() ? "" : ", ") + std::string(n);
  }
  throw ConfigError("unknown model '" + std::string(text) + "'; valid models: " + all);
}

Variant parse_variant(std::string_view text) {
  std::string all;
  for (auto [k, n] : kVariantNames) {
    if (n == text) return k;
    all += (all.empty() ? "" : ", ") + std::string(n);
  }
  throw ConfigError("unknown variant '" + std::string(text) + "'; valid variants: " + all);
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("model config: " + m); };
  if (height < 4 || width < 4) fail("resolution must be at least 4x4");
  if (variant != Variant::full && arch != Architecture::iptr) fail("ablation variants apply to iptr only");
  if (is_unet(arch)) {
    if (unet_width < 1 || unet_levels < 1) fail("unet width and levels must be positive");
    const int d = 1 << unet_levels;
    if (height % d != 0 || width % d != 0) fail("resolution must be divisible by " + std::to_string(d));
    return;
  }
  const bool fourier = is_fno(arch) || (variant != Variant::no_aux && variant != Variant::unet_aux);
  if (fourier) {
    if (lift < 2 || lift % 2 != 0) fail("lift width must be even and at least 2");
    if (fourier_layers < 1) fail("need at least one Fourier layer");
    if (modes1 < 1 || modes1 > height) fail("modes1 must lie in [1, height]");
    if (modes2 < 1 || modes2 > width / 2 + 1) fail("modes2 must lie in [1, width/2 + 1]");
  }
  if (is_fno(arch)) return;
  if (height % 4 != 0 || width % 4 != 0) fail("resolution must be divisible by 4");
  if (latent < 2 || latent % 2 != 0) fail("latent width must be even and at least 2");
  if (decoder_width0 < 1 || decoder_width1 < 1 || decoder_width2 < 1 || decoder_hidden1 < 1 || decoder_hidden2 < 1) {
    fail("decoder widths must be positive");
  }
  if (variant == Variant::unet_aux) {
    const int d = 1 << aux_unet_levels;
    if (aux_unet_width < 1 || aux_unet_levels < 1) fail("auxiliary unet width and levels must be positive");
    if (height % d != 0 || width % d != 0) fail("resolution must be divisible by " + std::to_string(d));
  }
}

int ModelConfig::input_channels() const {
  return (arch == Architecture::mask_unet || arch == Architecture::mask_fno) ? 2 : 1;
}

EncodingKind ModelConfig::encoding() const {
  return input_channels() == 2 ? EncodingKind::mask : EncodingKind::voronoi;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"architecture", to_string(c.arch)},
                     {"variant", to_string(c.variant)},
                     {"height", c.height},
                     {"width", c.width},
                     {"latent", c.latent},
                     {"lift", c.lift},
                     {"modes1", c.modes1},
                     {"modes2", c.modes2},
                     {"fourier_layers", c.fourier_layers},
                     {"decoder_width0", c.decoder_width0},
                     {"decoder_width1", c.decoder_width1},
                     {"decoder_width2", c.decoder_width2},
                     {"decoder_hidden1", c.decoder_hidden1},
                     {"decoder_hidden2", c.decoder_hidden2},
                     {"unet_width", c.unet_width},
                     {"unet_levels", c.unet_levels},
                     {"aux_unet_width", c.aux_unet_width},
                     {"aux_unet_levels", c.aux_unet_levels},
                     {"init_seed", c.init_seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.arch = parse_architecture(j.value("architecture", std::string(to_string(d.arch))));
  c.variant = parse_variant(j.value("variant", std::string(to_string(d.variant))));
  c.height = j.value("height", d.height);
  c.width = j.value("width", d.width);
  c.latent = j.value("latent", d.latent);
  c.lift = j.value("lift", d.lift);
  c.modes1 = j.value("modes1", d.modes1);
  c.modes2 = j.value("modes2", d.modes2);
  c.fourier_layers = j.value("fourier_layers", d.fourier_layers);
  c.decoder_width0 = j.value("decoder_width0", d.decoder_width0);
  c.decoder_width1 = j.value("decoder_width1", d.decoder_width1);
  c.decoder_width2 = j.value("decoder_width2", d.decoder_width2);
  c.decoder_hidden1 = j.value("decoder_hidden1", d.decoder_hidden1);
  c.decoder_hidden2 = j.value("decoder_hidden2", d.decoder_hidden2);
  c.unet_width = j.value("unet_width", d.unet_width);
  c.unet_levels = j.value("unet_levels", d.unet_levels);
  c.aux_unet_width = j.value("aux_unet_width", d.aux_unet_width);
  c.aux_unet_levels = j.value("aux_unet_levels", d.aux_unet_levels);
  c.init_seed = j.value("init_seed", d.init_seed);
}

Model::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  Rng rng(derive_seed(config_.init_seed, 0x1417));
  const auto& c = config_;
  if (is_unet(c.arch)) {
    unet_ = nn::UNet(params_, "unet", c.input_channels(), c.unet_width, c.unet_levels, 1, rng);
    return;
  }
  if (is_fno(c.arch)) {
    fourier_ = nn::FourierBranch(params_, "fno", c.input_channels(), c.lift, c.fourier_layers, c.modes1, c.modes2,
                                 c.height, c.width, false, rng);
    return;
  }
  int cond = 0;
  if (c.variant != Variant::no_implicit) {
    enc_m_ = nn::UNetEncoder(params_, "enc_m", 1, c.latent, rng);
    enc_tf_ = nn::UNetEncoder(params_, "enc_tf", 1, c.latent, rng);
    cond += c.latent;
  }
  if (c.variant == Variant::unet_aux) {
    unet_ = nn::UNet(params_, "aux_unet", 1, c.aux_unet_width, c.aux_unet_levels, 1, rng);
    cond += 1;
  } else if (c.variant != Variant::no_aux) {
    fourier_ = nn::FourierBranch(params_, "aux", 1, c.lift, c.fourier_layers, c.modes1, c.modes2, c.height, c.width,
                                 true, rng);
    cond += 1;
  }
  decoder_ = nn::SpadeDecoder(params_, "decoder", cond, c.decoder_width0, c.decoder_width1, c.decoder_width2,
                              c.decoder_hidden1, c.decoder_hidden2, rng);
}

void Model::check_input(const ModelInput& in) const {
  const auto& t = in.target;
  if (t.c != config_.input_channels()) {
    throw ConfigError(std::string(to_string(config_.arch)) + " expects " + std::to_string(config_.input_channels()) +
                      " input channel(s), got " + std::to_string(t.c));
  }
  if (t.h != config_.height || t.w != config_.width) {
    throw ConfigError("input resolution " + std::to_string(t.h) + "x" + std::to_string(t.w) +
                      " does not match the model's " + std::to_string(config_.height) + "x" +
                      std::to_string(config_.width));
  }
  if (config_.uses_reference() && config_.variant != Variant::no_implicit) {
    if (!in.reference.same_shape(t) || !in.reference_field.same_shape(t)) {
      throw ConfigError("reference resolution does not match the target");
    }
  }
}

nn::Tensor Model::forward(const ModelInput& in) const {
  ForwardCache cache;
  return forward(in, cache);
}

nn::Tensor Model::forward(const ModelInput& in, ForwardCache& cache) const {
  check_input(in);
  const auto& c = config_;
  if (is_unet(c.arch)) return unet_.forward(in.target, cache.unet);
  if (is_fno(c.arch)) return fourier_.forward(in.target, cache.fourier);

  if (c.variant != Variant::no_implicit) {
    nn::Tensor lt = enc_m_.forward(in.target, cache.enc_target);
    nn::Tensor ls = enc_m_.forward(in.reference, cache.enc_reference);
    const nn::Tensor lf = enc_tf_.forward(in.reference_field, cache.enc_field);
    const nn::Tensor pos = nn::positional_embedding(c.latent, lt.h, lt.w);
    lt += pos;
    ls += pos;
    const nn::Matrix out = nn::cross_attention(nn::to_tokens(lt), nn::to_tokens(ls), nn::to_tokens(lf), &cache.attention);
    cache.implicit = nn::from_tokens(out, lt.h, lt.w);
  } else {
    cache.implicit = nn::Tensor();
  }
  if (c.variant == Variant::unet_aux) {
    cache.aux = nn::maxpool(unet_.forward(in.target, cache.unet), 4, cache.aux_pool);
  } else if (c.variant != Variant::no_aux) {
    cache.aux = fourier_.forward(in.target, cache.fourier);
  } else {
    cache.aux = nn::Tensor();
  }
  if (cache.implicit.size() == 0) {
    cache.fused = cache.aux;
  } else if (cache.aux.size() == 0) {
    cache.fused = cache.implicit;
  } else {
    cache.fused = nn::concat_channels(cache.implicit, cache.aux);
  }
  return decoder_.forward(cache.fused, cache.decoder);
}

nn::Tensor Model::decode(const nn::Tensor& fused) const {
  if (config_.arch != Architecture::iptr) throw ConfigError("decode is only defined for iptr models");
  nn::SpadeDecoder::Cache cache;
  return decoder_.forward(fused, cache);
}

void Model::backward(const ForwardCache& cache, const nn::Tensor& grad_output) {
  const auto& c = config_;
  if (is_unet(c.arch)) {
    unet_.backward(cache.unet, grad_output);
    return;
  }
  if (is_fno(c.arch)) {
    fourier_.backward(cache.fourier, grad_output);
    return;
  }
  const nn::Tensor gfused = decoder_.backward(cache.decoder, grad_output);
  nn::Tensor gimplicit, gaux;
  if (cache.implicit.size() == 0) {
    gaux = gfused;
  } else if (cache.aux.size() == 0) {
    gimplicit = gfused;
  } else {
    nn::split_channels(gfused, cache.implicit.c, gimplicit, gaux);
  }
  if (gaux.size() != 0) {
    if (c.variant == Variant::unet_aux) {
      unet_.backward(cache.unet, nn::maxpool_backward(cache.aux_pool, gaux));
    } else {
      fourier_.backward(cache.fourier, gaux);
    }
  }
  if (gimplicit.size() != 0) {
    const int h = gimplicit.h;
    const int w = gimplicit.w;
    const auto g = nn::cross_attention_backward(cache.attention, nn::to_tokens(gimplicit));
    enc_tf_.backward(cache.enc_field, nn::from_tokens(g.v, h, w));
    enc_m_.backward(cache.enc_target, nn::from_tokens(g.q, h, w));
    enc_m_.backward(cache.enc_reference, nn::from_tokens(g.k, h, w));
  }
}

std::unique_ptr<Model> Model::clone() const {
  auto m = std::make_unique<Model>(config_);
  m->set_stats(stats_);
  m->params().restore(params_.snapshot());
  return m;
}

nn::Tensor encode_readings(const Readings& readings, const Grid& grid, EncodingKind kind, const NormStats& stats) {
  const Readings r = normalize(readings, stats);
  if (kind == EncodingKind::voronoi) {
    const PseudoField v = voronoi_encode(r, grid);
    nn::Tensor t(1, grid.ny, grid.nx);
    t.data.assign(v.values.begin(), v.values.end());
    return t;
  }
  const PseudoField m = mask_encode(r, grid);
  nn::Tensor t(2, grid.ny, grid.nx);
  std::copy(m.values.begin(), m.values.end(), t.channel(0));
  std::copy(m.mask.begin(), m.mask.end(), t.channel(1));
  return t;
}

nn::Tensor field_tensor(const ScalarField& field, const NormStats& stats) {
  nn::Tensor t(1, field.grid.ny, field.grid.nx);
  const ScalarField n = normalize(field, stats);
  t.data.assign(n.values.begin(), n.values.end());
  return t;
}

ScalarField tensor_to_field(const nn::Tensor& t, const Grid& grid, const NormStats& stats) {
  if (t.c != 1 || t.h != grid.ny || t.w != grid.nx) throw ConfigError("output tensor does not match the grid");
  for (double v : t.data) {
    if (!std::isfinite(v)) throw NumericError("network produced a non-finite value");
  }
  ScalarField f(grid, std::vector<double>(t.data.begin(), t.data.end()));
  f.normalized = true;
  return denormalize(f, stats);
}

ModelInput make_input(const ModelConfig& config, const Sample& target, const Sample* reference,
                      const NormStats& stats) {
  ModelInput in;
  const Grid& g = target.field.grid;
  in.target = encode_readings(target.readings, g, config.encoding(), stats);
  if (config.uses_reference() && config.variant != Variant::no_implicit) {
    if (!reference) throw ConfigError("iptr needs a reference sample");
    if (reference->field.grid.nx != g.nx || reference->field.grid.ny != g.ny) {
      throw ConfigError("reference resolution does not match the target");
    }
    in.reference = encode_readings(reference->readings, g, EncodingKind::voronoi, stats);
    in.reference_field = field_tensor(reference->field, stats);
  }
  return in;
}

ScalarField predict(const Model& model, const Sample& target, const Sample* reference) {
  const ModelInput in = make_input(model.config(), target, reference, model.stats());
  return tensor_to_field(model.forward(in), target.field.grid, model.stats());
}

}  // namespace tfr
