#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace contra::run {

// FNV-1a content digests rendered as 16 hex digits.
std::string string_digest(const std::string& data);
std::string file_digest(const std::filesystem::path& file);

// Current UTC time as e.g. 2026-08-26T12:34:56Z.
std::string iso_timestamp_utc();

struct RunManifest {
  std::string run_id;
  std::string command;
  std::string config_digest;
  std::map<std::string, std::string> input_digests;  // label -> digest
  std::string started;
  std::string finished;
  std::vector<std::string> artifacts;  // paths relative to the run directory
};

// Pure function of command, config and inputs so that identical runs share
// an id; timestamps never enter the hash.
std::string make_run_id(const std::string& command,
                        const std::string& config_digest,
                        const std::map<std::string, std::string>& input_digests);

void save_manifest(const std::filesystem::path& file, const RunManifest& manifest);
RunManifest load_manifest(const std::filesystem::path& file);

}  // namespace contra::run
