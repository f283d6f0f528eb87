#include "tfr_cli/run_dir.hpp"

#include <cstdlib>

#include "tfr/error.hpp"
#include "tfr/hashing.hpp"

namespace tfr::cli {

namespace fs = std::filesystem;

RunDir::RunDir(fs::path dir, bool force) : dir_(std::move(dir)) {
  if (fs::exists(dir_)) {
    if (!fs::is_directory(dir_)) throw ConfigError("output path " + dir_.string() + " is not a directory");
    if (!fs::is_empty(dir_)) {
      if (!force) throw ConfigError("output directory " + dir_.string() + " is not empty (use --force to replace it)");
      fs::remove_all(dir_);
    }
  }
  fs::create_directories(dir_);
}

void RunDir::write_json(const std::string& name, const nlohmann::json& j) const { write_text(name, j.dump(2) + "\n"); }

void RunDir::write_text(const std::string& name, const std::string& text) const {
  std::ofstream out(dir_ / name, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + (dir_ / name).string());
}

nlohmann::json describe_input(const fs::path& dir) {
  return {{"path", dir.generic_string()}, {"sha256", sha256_tree(dir)}};
}

std::string deterministic_mode() {
  const char* v = std::getenv("TFR_DETERMINISTIC");
  const std::string s = v && *v ? v : "1";
  if (s != "0" && s != "1") throw ConfigError("TFR_DETERMINISTIC must be 0 or 1, got '" + s + "'");
  return s;
}

}  // namespace tfr::cli
