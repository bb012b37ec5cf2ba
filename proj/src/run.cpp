#include "contra/run.hpp"

#include <ctime>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "contra/errors.hpp"
#include "contra/vocab.hpp"

namespace contra::run {

namespace {

using nlohmann::json;

}  // namespace

std::string string_digest(const std::string& data) {
  return hex64(fnv1a(data));
}

std::string file_digest(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot read " + file.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return string_digest(buffer.str());
}

std::string iso_timestamp_utc() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string make_run_id(const std::string& command,
                        const std::string& config_digest,
                        const std::map<std::string, std::string>& input_digests) {
  std::string blob = command + '\n' + config_digest;
  for (const auto& [label, digest] : input_digests) {
    blob += '\n' + label + '=' + digest;
  }
  return string_digest(blob);
}

void save_manifest(const std::filesystem::path& file,
                   const RunManifest& manifest) {
  json blob{{"run_id", manifest.run_id},
            {"command", manifest.command},
            {"config_digest", manifest.config_digest},
            {"input_digests", manifest.input_digests},
            {"started", manifest.started},
            {"finished", manifest.finished},
            {"artifacts", manifest.artifacts}};
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << blob.dump(2) << '\n';
}

RunManifest load_manifest(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read " + file.string());
  json blob = json::parse(in);
  RunManifest manifest;
  manifest.run_id = blob.at("run_id").get<std::string>();
  manifest.command = blob.at("command").get<std::string>();
  manifest.config_digest = blob.at("config_digest").get<std::string>();
  manifest.input_digests =
      blob.at("input_digests").get<std::map<std::string, std::string>>();
  manifest.started = blob.at("started").get<std::string>();
  manifest.finished = blob.at("finished").get<std::string>();
  manifest.artifacts = blob.at("artifacts").get<std::vector<std::string>>();
  return manifest;
}

}  // namespace contra::run
