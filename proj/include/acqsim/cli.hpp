#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace acqsim {

inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitConfig = 4;

/// Whole command line, stdout and stderr injectable for in-process tests.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Run manifest -------------------------------------------------------------

std::string sha256_hex(std::string_view bytes);
/// Throws DataError FileNotFound.
std::string sha256_file(const std::filesystem::path& path);
std::string utc_timestamp();

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::string config_sha256;  // of config.json as written
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, sha256
  nlohmann::ordered_json settings_source = nlohmann::ordered_json::object();
  std::string started_at;
  std::string finished_at;  // empty while running
  std::string out_dir;
};

nlohmann::ordered_json to_json(const RunManifest& m);
void write_manifest(const std::filesystem::path& dir, const RunManifest& m);

}  // namespace acqsim
