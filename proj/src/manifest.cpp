#include "cotkd/manifest.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

namespace cotkd::manifest {

using nlohmann::json;

json to_json(const RunManifest& m) {
  json j;
  j["command"] = m.command;
  j["config"] = m.config;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["tool"] = m.tool;
  j["version"] = m.version;
  j["created_utc"] = m.created_utc;
  return j;
}

RunManifest manifest_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("manifest must be a JSON object");
  for (const char* key : {"command", "config", "inputs", "outputs"})
    if (!j.contains(key)) throw ConfigError(std::string("manifest missing key '") + key + "'");
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.config = j.at("config");
  m.inputs = j.at("inputs");
  m.outputs = j.at("outputs");
  m.tool = j.value("tool", std::string(kToolName));
  m.version = j.value("version", std::string(kToolVersion));
  m.created_utc = j.value("created_utc", std::string());
  return m;
}

RunManifest read_manifest(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("manifest " + path + " is not valid JSON: " + e.what());
  }
  return manifest_from_json(j);
}

void write_manifest(const std::string& path, RunManifest m) {
  if (m.created_utc.empty()) m.created_utc = utc_timestamp_now();
  write_file_atomic(path, to_json(m).dump(2) + "\n");
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw IoError("cannot move " + tmp + " into place");
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string utc_timestamp_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace cotkd::manifest
