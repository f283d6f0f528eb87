#include "tfr/datagen.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cctype>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>
#include <cmath>
#include <mutex>

#include "tfr/error.hpp"
#include "tfr/hashing.hpp"
#include "tfr/rng.hpp"
#include "tfr/serialize.hpp"

namespace tfr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"HSink", "ADlet", "DSine", "NewScenario"};
  return names;
}

ScenarioSpec scenario_template(std::string_view name, int resolution) {
  std::string key = lower(name);
  if (key == "new" || key == "new_scenario") key = "newscenario";
  ScenarioSpec spec;
  spec.nx = spec.ny = resolution;
  for (Side s : kAllSides) spec.boundary[s] = SideCondition::neumann();
  if (key == "hsink") {
    spec.name = "HSink";
    spec.boundary[Side::left] = SideCondition::dirichlet(298.0);
    spec.source_kind = SourceKind::uniform;
  } else if (key == "adlet") {
    spec.name = "ADlet";
    for (Side s : kAllSides) spec.boundary[s] = SideCondition::dirichlet(298.0);
    spec.boundary[Side::left] = SideCondition::sine(298.0, 25.0);
    spec.source_kind = SourceKind::gaussian;
  } else if (key == "dsine") {
    spec.name = "DSine";
    spec.boundary[Side::left] = SideCondition::sine(298.0, 25.0);
    spec.source_kind = SourceKind::gaussian;
  } else if (key == "newscenario") {
    spec.name = "NewScenario";
    spec.boundary[Side::left] = SideCondition::dirichlet(298.0);
    spec.source_kind = SourceKind::gaussian;
    spec.conductivity = ConductivityModel::affine(1.0, 0.05);
  } else {
    std::string valid;
    for (const auto& n : scenario_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown scenario '" + std::string(name) + "'; valid scenarios: " + valid);
  }
  spec.sensor_count = 25;
  make_grid(spec.nx, spec.ny, spec.lx, spec.ly);
  return spec;
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

const std::vector<Sample>& Dataset::split(Split s) const {
  return s == Split::train ? train : s == Split::val ? val : test;
}
std::vector<Sample>& Dataset::split(Split s) { return s == Split::train ? train : s == Split::val ? val : test; }

std::vector<HeatSource> draw_sources(const ScenarioSpec& spec, std::uint64_t seed) {
  const SourceRanges& r = spec.sources;
  Rng rng(seed);
  const auto count = rng.uniform_int(r.count_min, r.count_max);
  std::vector<HeatSource> out;
  for (std::int64_t c = 0; c < count; ++c) {
    for (int attempt = 0; attempt < r.placement_attempts; ++attempt) {
      const double w = rng.uniform(r.size_min, r.size_max);
      const double h = rng.uniform(r.size_min, r.size_max);
      const double x = rng.uniform(0.0, spec.lx - w);
      const double y = rng.uniform(0.0, spec.ly - h);
      const Rect rect{x, y, x + w, y + h};
      const bool clash = std::any_of(out.begin(), out.end(), [&](const HeatSource& s) { return s.region.overlaps(rect); });
      if (clash) continue;
      HeatSource src;
      src.kind = spec.source_kind;
      src.region = rect;
      src.power = rng.uniform(r.power_min, r.power_max);
      if (src.kind == SourceKind::gaussian) {
        src.center = {x + 0.5 * w, y + 0.5 * h};
        src.radius = 0.5 * std::min(w, h);
        src.sigma = r.sigma;
      }
      out.push_back(src);
      break;
    }
  }
  return out;
}

namespace {

std::optional<Sample> simulate(const ScenarioSpec& spec, const Grid& grid, const SensorLayout& layout,
                               std::uint64_t seed) {
  Sample s;
  s.condition_id = spec.name;
  s.seed = seed;
  s.boundary = spec.boundary;
  s.sources = draw_sources(spec, seed);
  try {
    auto solved = solve_steady(grid, s.sources, spec.boundary, spec.conductivity, spec.solver);
    if (!solved.report.converged) return std::nullopt;
    for (double& v : solved.field.values) {
      if (!std::isfinite(v)) return std::nullopt;
      v = to_f32(v);
    }
    s.field = std::move(solved.field);
  } catch (const NumericError&) {
    return std::nullopt;
  }
  s.readings = sample_at_sensors(s.field, layout);
  return s;
}

}  // namespace

Dataset generate(const ScenarioSpec& spec, SplitCounts counts, std::uint64_t master_seed, int jobs) {
  if (counts.train < 2) throw ConfigError("dataset needs at least 2 training samples for pairing");
  const Grid grid = spec.grid();
  spec.boundary.validate();
  if (!spec.boundary.has_dirichlet_or_robin()) throw ConfigError("scenario boundary is all-Neumann");

  SensorLayout layout = uniform_sensor_layout(grid, spec.sensor_count);
  for (auto& p : layout.positions) p = {to_f32(p.x), to_f32(p.y)};
  layout.validate(grid);

  Dataset ds;
  ds.scenario = spec;
  ds.master_seed = master_seed;

  struct Job {
    Split split;
    std::size_t index;
  };
  std::vector<Job> work;
  for (Split sp : {Split::train, Split::val, Split::test}) {
    const std::size_t n = sp == Split::train ? counts.train : sp == Split::val ? counts.val : counts.test;
    ds.split(sp).resize(n);
    for (std::size_t i = 0; i < n; ++i) work.push_back({sp, i});
  }

  std::atomic<std::size_t> next{0};
  std::atomic<int> redraws{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t w = next++; w < work.size(); w = next++) {
      const Job job = work[w];
      const std::uint64_t base = derive_seed(master_seed, static_cast<std::uint64_t>(job.split), job.index);
      std::optional<Sample> got;
      for (int attempt = 0; attempt <= 5 && !got; ++attempt) {
        const std::uint64_t seed = attempt == 0 ? base : derive_seed(base, 0x5eed, static_cast<std::uint64_t>(attempt));
        got = simulate(spec, grid, layout, seed);
        if (!got && attempt < 5) {
          ++redraws;
          std::clog << "[datagen] " << to_string(job.split) << " sample " << job.index
                    << " failed to converge; re-drawing (attempt " << attempt + 1 << ")\n";
        }
      }
      if (!got) {
        std::lock_guard lock(failure_mu);
        if (!failure) {
          failure = std::make_exception_ptr(NumericError(
              "solver failed on " + std::string(to_string(job.split)) + " sample " + std::to_string(job.index) +
              " after 5 re-draws"));
        }
        return;
      }
      ds.split(job.split)[job.index] = std::move(*got);
    }
  };
  const int threads = std::max(1, jobs);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  ds.redraws = redraws;
  ds.stats = compute_stats(ds.train);
  return ds;
}

Dataset generate(const ScenarioSpec& spec, std::size_t n, std::uint64_t master_seed) {
  return generate(spec, SplitCounts{n, 0, 0}, master_seed);
}

NormStats compute_stats(const std::vector<Sample>& samples) {
  if (samples.empty()) throw ConfigError("normalisation statistics need at least one sample");
  NormStats st{samples.front().field.values.front(), samples.front().field.values.front()};
  for (const auto& s : samples) {
    st.t_min = std::min(st.t_min, s.field.min());
    st.t_max = std::max(st.t_max, s.field.max());
  }
  return st;
}

PairingStrategy parse_pairing(std::string_view text) {
  const std::string key = lower(text);
  if (key == "sliding") return {PairingKind::sliding, 0};
  if (key == "fixed") return {PairingKind::fixed, 0};
  if (key.rfind("fixed:", 0) == 0) {
    try {
      return {PairingKind::fixed, static_cast<std::size_t>(std::stoul(key.substr(6)))};
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("unknown pairing strategy '" + std::string(text) + "' (expected sliding, fixed or fixed:<index>)");
}

std::string_view to_string(PairingKind k) { return k == PairingKind::sliding ? "sliding" : "fixed"; }

std::vector<ReferencePair> make_pairs(const std::vector<Sample>& samples, PairingStrategy strategy) {
  const std::size_t n = samples.size();
  if (n < 2) throw ConfigError("pairing needs at least 2 training samples");
  std::vector<ReferencePair> pairs;
  if (strategy.kind == PairingKind::sliding) {
    pairs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pairs.push_back({&samples[i], &samples[(i + 1) % n]});
  } else {
    if (strategy.fixed_index >= n) {
      throw ConfigError("fixed reference index " + std::to_string(strategy.fixed_index) + " outside training split of " +
                        std::to_string(n));
    }
    pairs.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      if (i != strategy.fixed_index) pairs.push_back({&samples[i], &samples[strategy.fixed_index]});
    }
  }
  return pairs;
}

const Sample& select_test_reference(const std::vector<Sample>& train, std::string_view condition_id,
                                    std::uint64_t rng_seed) {
  std::vector<const Sample*> candidates;
  for (const auto& s : train) {
    if (s.condition_id == condition_id) candidates.push_back(&s);
  }
  if (candidates.empty()) {
    throw DataError("no training sample with condition '" + std::string(condition_id) + "' to use as reference");
  }
  Rng rng(derive_seed(rng_seed, 0x7e5f));
  const auto k = rng.uniform_int(0, static_cast<std::int64_t>(candidates.size()) - 1);
  return *candidates[static_cast<std::size_t>(k)];
}

const Sample& select_test_reference(const Dataset& ds, std::string_view condition_id, std::uint64_t rng_seed) {
  return select_test_reference(ds.train, condition_id, rng_seed);
}

// ---------------------------------------------------------------------------
// Persistence.

namespace {

constexpr char kMagic[4] = {'T', 'F', 'R', 'D'};

void put_u32(std::string& buf, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) buf.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}
void put_f32(std::string& buf, double v) { put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

std::uint32_t get_u32(const std::string& buf, std::size_t& off) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + b])) << (8 * b);
  off += 4;
  return v;
}
double get_f32(const std::string& buf, std::size_t& off) {
  return static_cast<double>(std::bit_cast<float>(get_u32(buf, off)));
}

std::string encode_split(const std::vector<Sample>& samples) {
  std::string buf;
  buf.append(kMagic, 4);
  put_u32(buf, kDatasetFormatVersion);
  put_u32(buf, static_cast<std::uint32_t>(samples.size()));
  put_u32(buf, 0);
  for (const auto& s : samples) {
    for (double v : s.field.values) put_f32(buf, v);
    for (std::size_t k = 0; k < s.readings.size(); ++k) {
      put_f32(buf, s.readings.layout.positions[k].x);
      put_f32(buf, s.readings.layout.positions[k].y);
      put_f32(buf, s.readings.values[k]);
    }
  }
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("missing file " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + p.string());
}

std::string split_file(Split s) { return std::string(to_string(s)) + ".bin"; }

}  // namespace

void save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["format_version"] = kDatasetFormatVersion;
  manifest["scenario"] = ds.scenario;
  manifest["master_seed"] = ds.master_seed;
  manifest["normalization"] = ds.stats;
  manifest["redraws"] = ds.redraws;
  manifest["test_protocol"] = "fresh draws from held-out seed streams (split ids 1 = val, 2 = test)";
  manifest["encoding"] = "little-endian float32; per sample: field (ny*nx, row-major) then sensors (x, y, value)";
  json files = json::object();
  json counts = json::object();
  json samples = json::object();
  for (Split sp : {Split::train, Split::val, Split::test}) {
    const auto& items = ds.split(sp);
    const std::string bytes = encode_split(items);
    write_file(dir / split_file(sp), bytes);
    files[split_file(sp)] = {{"sha256", sha256_hex(std::as_bytes(std::span(bytes.data(), bytes.size())))},
                             {"bytes", bytes.size()}};
    counts[std::string(to_string(sp))] = items.size();
    json meta = json::array();
    for (const auto& s : items) {
      meta.push_back({{"condition_id", s.condition_id},
                      {"seed", s.seed},
                      {"grid", s.field.grid},
                      {"sensors", s.readings.size()},
                      {"boundary", s.boundary},
                      {"sources", s.sources}});
    }
    samples[std::string(to_string(sp))] = std::move(meta);
  }
  manifest["counts"] = counts;
  manifest["files"] = files;
  manifest["samples"] = samples;
  write_file(dir / "manifest.json", manifest.dump(1) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw DataError("missing manifest.json in " + dir.string());
  Dataset ds;
  try {
    const json manifest = json::parse(read_file(mpath));
    if (manifest.at("format_version").get<std::uint32_t>() != kDatasetFormatVersion) {
      throw DataError("unsupported dataset format version in " + mpath.string());
    }
    manifest.at("scenario").get_to(ds.scenario);
    manifest.at("master_seed").get_to(ds.master_seed);
    manifest.at("normalization").get_to(ds.stats);
    ds.redraws = manifest.value("redraws", 0);
    for (Split sp : {Split::train, Split::val, Split::test}) {
      const std::string name = split_file(sp);
      const fs::path path = dir / name;
      if (!fs::exists(path)) throw DataError("missing split file " + path.string());
      const std::string bytes = read_file(path);
      const auto& entry = manifest.at("files").at(name);
      const std::string digest = sha256_hex(std::as_bytes(std::span(bytes.data(), bytes.size())));
      if (digest != entry.at("sha256").get<std::string>()) {
        throw DataError("checksum mismatch for " + path.string());
      }
      const json& meta = manifest.at("samples").at(std::string(to_string(sp)));
      if (bytes.size() < 16 || std::string_view(bytes.data(), 4) != std::string_view(kMagic, 4)) {
        throw DataError("bad header in " + path.string());
      }
      std::size_t off = 4;
      const auto version = get_u32(bytes, off);
      const auto count = get_u32(bytes, off);
      get_u32(bytes, off);
      if (version != kDatasetFormatVersion || count != meta.size()) {
        throw DataError("header of " + path.string() + " disagrees with manifest");
      }
      std::size_t expected = 16;
      for (const auto& m : meta) {
        const Grid g = m.at("grid").get<Grid>();
        expected += 4 * (g.node_count() + 3 * m.at("sensors").get<std::size_t>());
      }
      if (bytes.size() != expected) throw DataError("shape mismatch: " + path.string() + " has unexpected size");

      auto& out = ds.split(sp);
      out.reserve(count);
      for (const auto& m : meta) {
        Sample s;
        m.at("condition_id").get_to(s.condition_id);
        m.at("seed").get_to(s.seed);
        m.at("boundary").get_to(s.boundary);
        m.at("sources").get_to(s.sources);
        const Grid g = m.at("grid").get<Grid>();
        std::vector<double> values(g.node_count());
        for (auto& v : values) v = get_f32(bytes, off);
        s.field = ScalarField(g, std::move(values));
        const auto sensors = m.at("sensors").get<std::size_t>();
        for (std::size_t k = 0; k < sensors; ++k) {
          const double x = get_f32(bytes, off);
          const double y = get_f32(bytes, off);
          s.readings.layout.positions.push_back({x, y});
          s.readings.values.push_back(get_f32(bytes, off));
        }
        if (sample_at_sensors(s.field, s.readings.layout).values != s.readings.values) {
          throw DataError("stored readings of " + path.string() + " do not match their field");
        }
        out.push_back(std::move(s));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest in " + dir.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError("invalid dataset contents in " + dir.string() + ": " + e.what());
  }
  return ds;
}

}  // namespace tfr
