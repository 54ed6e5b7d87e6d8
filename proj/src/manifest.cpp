#include "higarment/manifest.hpp"

#include "json.hpp"

#include "higarment/errors.hpp"
#include "higarment/hash.hpp"
#include "higarment/image.hpp"

namespace hg {

namespace {

nlohmann::ordered_json files_to_json(const std::vector<FileRecord>& files) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& f : files) {
    nlohmann::ordered_json j;
    j["path"] = f.path;
    j["hash"] = f.hash;
    if (f.volatile_content) j["volatile"] = true;
    arr.push_back(j);
  }
  return arr;
}

std::vector<FileRecord> files_from_json(const nlohmann::json& arr) {
  std::vector<FileRecord> out;
  for (const auto& j : arr) {
    FileRecord f;
    f.path = j.at("path").get<std::string>();
    f.hash = j.at("hash").get<std::string>();
    f.volatile_content = j.value("volatile", false);
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace

std::string manifest_to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["tool"] = m.tool;
  j["command"] = m.command;
  j["args"] = m.args;
  j["cwd"] = m.cwd;
  j["config"] = m.config;
  j["seed"] = m.seed;
  j["inputs"] = files_to_json(m.inputs);
  j["outputs"] = files_to_json(m.outputs);
  j["stdout_hash"] = m.stdout_hash;
  j["wall_time_s"] = m.wall_time_s;
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunManifest m;
    m.tool = j.at("tool").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.args = j.at("args").get<std::vector<std::string>>();
    m.cwd = j.at("cwd").get<std::string>();
    m.config = j.value("config", std::string());
    m.seed = j.value("seed", std::uint64_t{0});
    m.inputs = files_from_json(j.at("inputs"));
    m.outputs = files_from_json(j.at("outputs"));
    m.stdout_hash = j.value("stdout_hash", std::string());
    m.wall_time_s = j.value("wall_time_s", 0.0);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed run manifest: ") + e.what());
  }
}

void save_manifest(const RunManifest& m, const std::filesystem::path& path) {
  write_text_file(path, manifest_to_json(m));
}

RunManifest load_manifest(const std::filesystem::path& path) {
  return manifest_from_json(read_text_file(path));
}

FileRecord hash_file_record(const std::filesystem::path& path, bool volatile_content) {
  FileRecord f;
  f.path = std::filesystem::absolute(path).lexically_normal().string();
  f.hash = git_blob_hash_file(path);
  f.volatile_content = volatile_content;
  return f;
}

}  // namespace hg
