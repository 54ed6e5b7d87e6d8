#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hg {

enum class CosineSource { kRaw, kEnhanced };

struct ModelConfig {
  std::size_t image_size = 32;
  std::size_t d_model = 64;
  std::size_t patch = 8;  // encoder patch size
  std::size_t num_queries = 8;
  std::size_t max_text_len = 16;
  double lambda = 0.6;
  CosineSource cosine_source = CosineSource::kRaw;
  bool detach_alpha = false;
  bool use_mmse = true;
  bool use_hca = true;
  bool freeze_denoiser = false;
  std::size_t timesteps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::size_t denoiser_patch = 2;
  std::size_t denoiser_width1 = 32;
  std::size_t denoiser_width2 = 128;
  std::size_t time_dim = 32;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct RunConfig {
  std::uint64_t seed = 0;
  ModelConfig model;
  std::optional<double> alpha_override;
  double lr = 1e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t batch = 8;
  std::size_t steps = 2000;
  std::size_t ddim_steps = 50;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Every key in documented order.
const std::vector<std::string>& config_keys();

// Sets one key from its text form. Throws ValidationError naming the key when
// it is unknown or the value does not parse or is out of range.
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const RunConfig& cfg, std::string_view key);

// "key=value" lines; blank lines and lines starting with '#' are skipped.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});
// Every key, one per line, in config_keys() order. Round-trips exactly.
std::string config_to_text(const RunConfig& cfg);

// For every key k, applies the value of environment variable HG_<K> (upper
// case) when `lookup` returns one. Returns the keys that were overridden.
using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;
std::vector<std::string> apply_env_overrides(RunConfig& cfg, const EnvLookup& lookup);
std::string env_name(std::string_view key);

// Range checks shared by the parser and programmatic callers.
void validate_config(const RunConfig& cfg);

}  // namespace hg
