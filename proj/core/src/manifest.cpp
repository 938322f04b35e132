#include "locdiff/manifest.hpp"

#include <fstream>
#include <sstream>

#include "locdiff/errors.hpp"

namespace locdiff {

std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("fnv1a: cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

void RunManifest::write(const std::filesystem::path& dir) const {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = config;
  j["seed"] = seed;
  j["artifacts"] = artifact_hashes;
  j["duration_seconds"] = duration_seconds;
  j["tool_version"] = tool_version;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw ArgumentError("manifest: cannot write to " + dir.string());
  out << j.dump(2) << "\n";
}

RunManifest RunManifest::read(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw PipelineError("manifest: missing manifest.json in " + dir.string());
  nlohmann::json j = nlohmann::json::parse(in);
  RunManifest m;
  m.command = j.value("command", std::string{});
  m.config = j.value("config", nlohmann::json::object());
  m.seed = j.value("seed", std::uint64_t{0});
  m.artifact_hashes = j.value("artifacts", std::map<std::string, std::string>{});
  m.duration_seconds = j.value("duration_seconds", 0.0);
  m.tool_version = j.value("tool_version", std::string{});
  return m;
}

}  // namespace locdiff
