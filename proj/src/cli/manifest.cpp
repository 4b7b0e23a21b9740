#include <chrono>
#include <ctime>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "acqsim/cli.hpp"
#include "acqsim/errors.hpp"

namespace acqsim {

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw data_error("DigestFailed", "SHA-256 computation failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("FileNotFound", path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_hex(bytes);
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::ordered_json to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["tool"] = "acqsim";
  j["version"] = kToolVersion;
  j["command"] = m.command;
  j["argv"] = m.argv;
  j["config_sha256"] = m.config_sha256;
  j["seed"] = m.seed;
  auto inputs = nlohmann::ordered_json::array();
  for (const auto& [path, digest] : m.inputs) inputs.push_back({{"path", path}, {"sha256", digest}});
  j["inputs"] = std::move(inputs);
  j["settings_source"] = m.settings_source;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(m.finished_at);
  j["out_dir"] = m.out_dir;
  return j;
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw data_error("WriteFailed", (dir / "manifest.json").string());
  out << to_json(m).dump(2) << '\n';
}

}  // namespace acqsim
