#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hg {

struct FileRecord {
  std::string path;  // absolute
  std::string hash;  // git blob hash
  // Outputs that embed wall-clock data (training log) are recorded but not
  // compared on replay.
  bool volatile_content = false;

  friend bool operator==(const FileRecord&, const FileRecord&) = default;
};

struct RunManifest {
  std::string tool = "higarment";
  std::string command;            // sub-command path, e.g. "fabric-db query"
  std::vector<std::string> args;  // argv after the program name
  std::string cwd;
  std::string config;             // resolved key=value text, empty if unused
  std::uint64_t seed = 0;
  std::vector<FileRecord> inputs;
  std::vector<FileRecord> outputs;
  std::string stdout_hash;        // hash of everything printed to stdout
  double wall_time_s = 0.0;

  friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const std::string& text);
void save_manifest(const RunManifest& m, const std::filesystem::path& path);
RunManifest load_manifest(const std::filesystem::path& path);

FileRecord hash_file_record(const std::filesystem::path& path, bool volatile_content = false);

}  // namespace hg
