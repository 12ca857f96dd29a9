#ifndef CROPATTN_MANIFEST_HPP
#define CROPATTN_MANIFEST_HPP

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace cropattn {

/// FNV-1a 64-bit content fingerprint.
std::uint64_t fnv1a64(std::string_view data);
std::uint64_t fnv1a64_file(const std::string& path);
std::string fingerprint_hex(std::uint64_t hash);

/// One run's provenance: what ran, with which resolved settings, over which
/// inputs, producing which files.
struct RunManifest {
  std::string subcommand;
  std::string software_version;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config;             // resolved settings
  std::map<std::string, std::string> input_fingerprints; // path -> fnv1a64 hex
  std::vector<std::string> outputs;
  std::string started_at_utc; // ISO-8601, filled by write if empty
  double wall_seconds = 0.0;
};

/// Append the run to `manifest_<subcommand>.json` in out_dir (a JSON array;
/// existing entries are never modified). Returns the manifest path.
std::string append_manifest(const RunManifest& manifest, const std::string& out_dir);

} // namespace cropattn

#endif // CROPATTN_MANIFEST_HPP
