#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

#include "tfr/domain.hpp"
#include "tfr/encoding.hpp"
#include "tfr/nn/attention.hpp"
#include "tfr/nn/blocks.hpp"

namespace tfr {

enum class Architecture { iptr, vor_unet, vor_fno, mask_unet, mask_fno };

/// Branch-ablation variants; only meaningful for the iptr architecture.
enum class Variant { full, no_aux, no_implicit, unet_aux };

std::string_view to_string(Architecture a);
std::string_view to_string(Variant v);
Architecture parse_architecture(std::string_view text);
Variant parse_variant(std::string_view text);

struct ModelConfig {
  Architecture arch = Architecture::iptr;
  Variant variant = Variant::full;
  int height = 64;
  int width = 64;
  int latent = 32;  // C
  int lift = 32;    // C'
  int modes1 = 12;
  int modes2 = 12;
  int fourier_layers = 4;
  int decoder_width0 = 32;
  int decoder_width1 = 32;
  int decoder_width2 = 16;
  int decoder_hidden1 = 32;
  int decoder_hidden2 = 16;
  int unet_width = 16;
  int unet_levels = 3;
  int aux_unet_width = 8;
  int aux_unet_levels = 2;
  std::uint64_t init_seed = 0;

  /// Throws ConfigError for inconsistent sizes.
  void validate() const;
  int input_channels() const;
  bool uses_reference() const { return arch == Architecture::iptr; }
  EncodingKind encoding() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Network inputs in normalized units. `target` is the Voronoi pseudo-field
/// (one channel) or the mask encoding (values, indicator). The reference
/// tensors are only read by iptr.
struct ModelInput {
  nn::Tensor target;
  nn::Tensor reference;
  nn::Tensor reference_field;
};

/// Intermediate activations kept for the backward pass. The named latents are
/// also exposed for inspection.
struct ForwardCache {
  nn::UNetEncoder::Cache enc_target, enc_reference, enc_field;
  nn::AttentionCache attention;
  nn::FourierBranch::Cache fourier;
  nn::UNet::Cache unet;
  nn::PoolCache aux_pool;
  nn::SpadeDecoder::Cache decoder;
  nn::Tensor implicit;  // I_p
  nn::Tensor aux;       // E_p
  nn::Tensor fused;     // F_p
};

/// Architecture, parameters and normalization statistics of one network.
/// Forward passes are const and may run concurrently; backward accumulates
/// into the parameter gradients and needs exclusive access.
class Model {
 public:
  explicit Model(const ModelConfig& config);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const NormStats& stats() const { return stats_; }
  void set_stats(const NormStats& s) { stats_ = s; }

  nn::Tensor forward(const ModelInput& in, ForwardCache& cache) const;
  nn::Tensor forward(const ModelInput& in) const;
  void backward(const ForwardCache& cache, const nn::Tensor& grad_output);

  /// Runs only the decoder on a fused map (iptr only), e.g. with a branch
  /// zeroed out.
  nn::Tensor decode(const nn::Tensor& fused) const;

  /// A fresh model with the same configuration, statistics and parameter values.
  std::unique_ptr<Model> clone() const;

 private:
  void check_input(const ModelInput& in) const;

  ModelConfig config_;
  NormStats stats_;
  nn::ParamStore params_;
  nn::UNetEncoder enc_m_, enc_tf_;
  nn::FourierBranch fourier_;
  nn::UNet unet_;
  nn::SpadeDecoder decoder_;
};

/// Encodes readings and fields of normalized samples into network tensors.
nn::Tensor encode_readings(const Readings& readings, const Grid& grid, EncodingKind kind, const NormStats& stats);
nn::Tensor field_tensor(const ScalarField& field, const NormStats& stats);
ScalarField tensor_to_field(const nn::Tensor& t, const Grid& grid, const NormStats& stats);

/// Builds the input for predicting `target`; `reference` is required for iptr.
ModelInput make_input(const ModelConfig& config, const Sample& target, const Sample* reference,
                      const NormStats& stats);

/// Prediction in Kelvin.
ScalarField predict(const Model& model, const Sample& target, const Sample* reference);

}  // namespace tfr
