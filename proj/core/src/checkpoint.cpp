#include "tfr/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "tfr/error.hpp"
#include "tfr/hashing.hpp"
#include "tfr/serialize.hpp"

namespace tfr {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifest = "params.json";
constexpr const char* kBlob = "params.bin";

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + p.string());
}

void put_f32(std::string& buf, double v) {
  const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int b = 0; b < 4; ++b) buf.push_back(static_cast<char>((u >> (8 * b)) & 0xffu));
}

double get_f32(const std::string& buf, std::size_t off) {
  std::uint32_t u = 0;
  for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + b])) << (8 * b);
  return static_cast<double>(std::bit_cast<float>(u));
}

}  // namespace

void save_checkpoint(const Model& model, const fs::path& dir, const nlohmann::json& metadata) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());

  const auto& params = model.params();
  std::string blob;
  blob.reserve(params.total_size() * 4);
  nlohmann::json entries = nlohmann::json::array();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.count(); ++i) {
    const auto& p = params[i];
    for (double v : p.value) {
      if (!std::isfinite(v)) throw NumericError("parameter " + p.name + " is not finite");
      put_f32(blob, v);
    }
    entries.push_back({{"name", p.name}, {"shape", p.shape}, {"offset", offset}, {"count", p.size()}});
    offset += p.size();
  }
  nlohmann::json m;
  m["format_version"] = kCheckpointFormatVersion;
  m["architecture"] = to_string(model.config().arch);
  m["variant"] = to_string(model.config().variant);
  m["config"] = model.config();
  m["seed"] = model.config().init_seed;
  m["normalization"] = model.stats();
  m["dtype"] = "float32";
  m["byte_order"] = "little";
  m["blob"] = kBlob;
  m["blob_sha256"] = sha256_hex(std::as_bytes(std::span(blob.data(), blob.size())));
  m["parameter_count"] = offset;
  m["params"] = std::move(entries);
  m["metadata"] = metadata;
  write_bytes(dir / kBlob, blob);
  write_bytes(dir / kManifest, m.dump(2) + "\n");
}

nlohmann::json read_checkpoint_manifest(const fs::path& dir) {
  const fs::path p = dir / kManifest;
  if (!fs::exists(p)) throw DataError("no checkpoint manifest at " + p.string());
  try {
    return nlohmann::json::parse(read_bytes(p));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint manifest " + p.string() + ": " + e.what());
  }
}

std::unique_ptr<Model> load_checkpoint(const fs::path& dir) {
  const nlohmann::json m = read_checkpoint_manifest(dir);
  std::unique_ptr<Model> model;
  try {
    if (m.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw DataError("unsupported checkpoint version in " + dir.string());
    }
    if (m.at("dtype") != "float32" || m.at("byte_order") != "little") {
      throw DataError("unsupported checkpoint encoding in " + dir.string());
    }
    model = std::make_unique<Model>(m.at("config").get<ModelConfig>());
    model->set_stats(m.at("normalization").get<NormStats>());
    const std::string blob = read_bytes(dir / m.at("blob").get<std::string>());
    if (sha256_hex(std::as_bytes(std::span(blob.data(), blob.size()))) != m.at("blob_sha256").get<std::string>()) {
      throw DataError("checkpoint blob checksum mismatch in " + dir.string());
    }
    auto& params = model->params();
    const auto& entries = m.at("params");
    if (entries.size() != params.count()) throw DataError("checkpoint parameter list does not match the architecture");
    if (blob.size() != params.total_size() * 4) throw DataError("checkpoint blob has the wrong size");
    for (std::size_t i = 0; i < params.count(); ++i) {
      auto& p = params[i];
      const auto& e = entries[i];
      if (e.at("name").get<std::string>() != p.name || e.at("shape").get<std::vector<int>>() != p.shape) {
        throw DataError("checkpoint entry " + std::to_string(i) + " does not match parameter " + p.name);
      }
      const auto off = e.at("offset").get<std::size_t>();
      if (off + p.size() > params.total_size()) throw DataError("checkpoint offset out of range");
      for (std::size_t k = 0; k < p.size(); ++k) p.value[k] = get_f32(blob, (off + k) * 4);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint manifest in " + dir.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError("checkpoint in " + dir.string() + " is inconsistent: " + e.what());
  }
  return model;
}

void round_params_to_f32(Model& model) {
  auto& params = model.params();
  for (std::size_t i = 0; i < params.count(); ++i) {
    for (double& v : params[i].value) v = static_cast<double>(static_cast<float>(v));
  }
}

}  // namespace tfr
