#ifndef COTKD_MANIFEST_HPP
#define COTKD_MANIFEST_HPP

#include <string>

#include <nlohmann/json.hpp>

#include "cotkd/error.hpp"

namespace cotkd::manifest {

inline constexpr const char* kToolName = "cotkd";
inline constexpr const char* kToolVersion = "0.1.0";

// Record of one CLI invocation, written next to its artifacts. Everything a
// replay needs lives in `config` (fully resolved parameters, seeds included)
// plus `inputs`; `created_utc` is bookkeeping only and is the one field two
// otherwise-identical runs may disagree on.
struct RunManifest {
  std::string command;     // subcommand name
  nlohmann::json config;   // resolved parameter snapshot, seeds included
  nlohmann::json inputs;   // logical name -> path
  nlohmann::json outputs;  // logical name -> path
  std::string tool = kToolName;
  std::string version = kToolVersion;
  std::string created_utc;  // filled at write time when empty
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);
RunManifest read_manifest(const std::string& path);

// Serializes and writes via tmp + rename so a partial manifest is never
// visible at the final path.
void write_manifest(const std::string& path, RunManifest m);

// Atomic whole-file write used for every artifact the CLI emits.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

std::string utc_timestamp_now();  // "YYYY-MM-DDTHH:MM:SSZ"

}  // namespace cotkd::manifest

#endif  // COTKD_MANIFEST_HPP
