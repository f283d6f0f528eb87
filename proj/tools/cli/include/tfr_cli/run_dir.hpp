#pragma once

#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

namespace tfr::cli {

/// Output directory of one command.
class RunDir {
 public:
  /// Throws ConfigError if dir exists and is not empty, unless `force`
  /// (which clears it first).
  RunDir(std::filesystem::path dir, bool force);

  const std::filesystem::path& path() const { return dir_; }
  std::filesystem::path operator/(const std::string& name) const { return dir_ / name; }
  void write_json(const std::string& name, const nlohmann::json& j) const;
  void write_text(const std::string& name, const std::string& text) const;

  /// Runs f; if it throws, leaves a FAILED file holding the message and rethrows.
  template <class F>
  decltype(auto) guard(F&& f) const {
    try {
      return std::forward<F>(f)();
    } catch (const std::exception& e) {
      std::ofstream(dir_ / "FAILED") << e.what() << "\n";
      throw;
    }
  }

 private:
  std::filesystem::path dir_;
};

/// {"path": ..., "sha256": tree hash} for an input directory.
nlohmann::json describe_input(const std::filesystem::path& dir);

/// Value of TFR_DETERMINISTIC ("1" when unset). Throws ConfigError for
/// anything but 0 or 1.
std::string deterministic_mode();

}  // namespace tfr::cli
