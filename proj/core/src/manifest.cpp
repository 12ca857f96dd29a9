#include "cropattn/manifest.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cropattn/errors.hpp"

namespace cropattn {

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char byte : data) {
    hash ^= byte;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for fingerprinting");
  std::ostringstream buf;
  buf << in.rdbuf();
  return fnv1a64(buf.str());
}

std::string fingerprint_hex(std::uint64_t hash) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

namespace {

std::string utc_now_iso() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

} // namespace

std::string append_manifest(const RunManifest& manifest, const std::string& out_dir) {
  nlohmann::ordered_json entry;
  entry["subcommand"] = manifest.subcommand;
  entry["software_version"] = manifest.software_version;
  entry["seed"] = manifest.seed;
  entry["started_at_utc"] =
      manifest.started_at_utc.empty() ? utc_now_iso() : manifest.started_at_utc;
  entry["wall_seconds"] = manifest.wall_seconds;
  entry["config"] = manifest.config;
  entry["input_fingerprints"] = manifest.input_fingerprints;
  entry["outputs"] = manifest.outputs;

  const std::string path = out_dir + "/manifest_" + manifest.subcommand + ".json";
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  {
    std::ifstream in(path);
    if (in) {
      try {
        in >> runs;
      } catch (const nlohmann::json::exception& e) {
        throw ParseError("existing manifest '" + path + "' is unreadable: " + e.what());
      }
      if (!runs.is_array()) {
        throw SchemaError("existing manifest '" + path + "' is not a run list");
      }
    }
  }
  runs.push_back(std::move(entry));

  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << runs.dump(2) << '\n';
  if (!out) throw Error("write to '" + path + "' failed");
  return path;
}

} // namespace cropattn
