#include "higarment/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "higarment/errors.hpp"
#include "higarment/image.hpp"

namespace hg {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  throw ValidationError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) +
                        "' as " + expected);
}

std::size_t parse_size(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) bad_value(key, v, "an unsigned integer");
  return static_cast<std::size_t>(out);
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) bad_value(key, v, "an unsigned integer");
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(out)) bad_value(key, v, "a finite number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true/false");
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SIZE_FIELD(name, member)                                                    \
  Field {                                                                          \
    name, [](RunConfig& c, std::string_view v) { c.member = parse_size(name, v); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }                 \
  }
#define DOUBLE_FIELD(name, member)                                                    \
  Field {                                                                            \
    name, [](RunConfig& c, std::string_view v) { c.member = parse_double(name, v); }, \
        [](const RunConfig& c) { return fmt_double(c.member); }                       \
  }
#define BOOL_FIELD(name, member)                                                    \
  Field {                                                                          \
    name, [](RunConfig& c, std::string_view v) { c.member = parse_bool(name, v); }, \
        [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"seed", [](RunConfig& c, std::string_view v) { c.seed = parse_u64("seed", v); },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
      SIZE_FIELD("image_size", model.image_size),
      SIZE_FIELD("d_model", model.d_model),
      SIZE_FIELD("patch", model.patch),
      SIZE_FIELD("num_queries", model.num_queries),
      SIZE_FIELD("max_text_len", model.max_text_len),
      DOUBLE_FIELD("lambda", model.lambda),
      Field{"alpha_override",
            [](RunConfig& c, std::string_view v) {
              if (v.empty() || v == "none") {
                c.alpha_override.reset();
              } else {
                c.alpha_override = parse_double("alpha_override", v);
              }
            },
            [](const RunConfig& c) {
              return c.alpha_override ? fmt_double(*c.alpha_override) : std::string("none");
            }},
      Field{"cosine_source",
            [](RunConfig& c, std::string_view v) {
              if (v == "raw") {
                c.model.cosine_source = CosineSource::kRaw;
              } else if (v == "enhanced") {
                c.model.cosine_source = CosineSource::kEnhanced;
              } else {
                bad_value("cosine_source", v, "raw or enhanced");
              }
            },
            [](const RunConfig& c) {
              return std::string(c.model.cosine_source == CosineSource::kRaw ? "raw" : "enhanced");
            }},
      BOOL_FIELD("detach_alpha", model.detach_alpha),
      BOOL_FIELD("use_mmse", model.use_mmse),
      BOOL_FIELD("use_hca", model.use_hca),
      BOOL_FIELD("freeze_denoiser", model.freeze_denoiser),
      SIZE_FIELD("timesteps", model.timesteps),
      DOUBLE_FIELD("beta_start", model.beta_start),
      DOUBLE_FIELD("beta_end", model.beta_end),
      SIZE_FIELD("denoiser_patch", model.denoiser_patch),
      SIZE_FIELD("denoiser_width1", model.denoiser_width1),
      SIZE_FIELD("denoiser_width2", model.denoiser_width2),
      SIZE_FIELD("time_dim", model.time_dim),
      DOUBLE_FIELD("lr", lr),
      DOUBLE_FIELD("weight_decay", weight_decay),
      DOUBLE_FIELD("beta1", beta1),
      DOUBLE_FIELD("beta2", beta2),
      DOUBLE_FIELD("eps", eps),
      SIZE_FIELD("batch", batch),
      SIZE_FIELD("steps", steps),
      SIZE_FIELD("ddim_steps", ddim_steps),
  };
  return table;
}

#undef SIZE_FIELD
#undef DOUBLE_FIELD
#undef BOOL_FIELD

const Field& field(std::string_view key) {
  for (const auto& f : fields())
    if (f.key == key) return f;
  throw ValidationError("unknown config key '" + std::string(key) + "'");
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError("invalid config: " + what);
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  field(key).set(cfg, trim(value));
}

std::string get_config_value(const RunConfig& cfg, std::string_view key) { return field(key).get(cfg); }

void validate_config(const RunConfig& c) {
  const ModelConfig& m = c.model;
  require(m.image_size >= 8 && m.image_size <= 64, "image_size must lie in [8, 64]");
  require(m.patch > 0 && m.image_size % m.patch == 0, "patch must divide image_size");
  require(m.d_model > 0, "d_model must be positive");
  require(m.num_queries >= 1, "num_queries must be at least 1");
  require(m.max_text_len >= 1, "max_text_len must be at least 1");
  require(m.lambda >= 0.0 && m.lambda < 1.0, "lambda must lie in [0, 1)");
  require(m.timesteps >= 1, "timesteps must be positive");
  require(m.beta_start > 0.0 && m.beta_start <= m.beta_end && m.beta_end < 1.0,
          "need 0 < beta_start <= beta_end < 1");
  require(m.denoiser_patch > 0 && m.image_size % (2 * m.denoiser_patch) == 0,
          "denoiser_patch must divide image_size / 2");
  require(m.denoiser_width1 > 0 && m.denoiser_width2 > 0, "denoiser widths must be positive");
  require(m.time_dim >= 2 && m.time_dim % 2 == 0, "time_dim must be even");
  if (c.alpha_override) {
    require(*c.alpha_override > 0.0 && *c.alpha_override <= 1.0, "alpha_override must lie in (0, 1]");
  }
  require(c.lr > 0.0, "lr must be positive");
  require(c.weight_decay >= 0.0, "weight_decay must be non-negative");
  require(c.beta1 >= 0.0 && c.beta1 < 1.0 && c.beta2 >= 0.0 && c.beta2 < 1.0, "betas must lie in [0, 1)");
  require(c.eps > 0.0, "eps must be positive");
  require(c.batch >= 1, "batch must be positive");
  require(c.ddim_steps >= 1 && c.ddim_steps <= m.timesteps, "ddim_steps must lie in [1, timesteps]");
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    set_config_value(base, trim(std::string_view(t).substr(0, eq)), std::string_view(t).substr(eq + 1));
  }
  validate_config(base);
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  return parse_config(read_text_file(path), std::move(base));
}

std::string config_to_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += f.key + "=" + f.get(cfg) + "\n";
  return out;
}

std::string env_name(std::string_view key) {
  std::string out = "HG_";
  for (char ch : key) out += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return out;
}

std::vector<std::string> apply_env_overrides(RunConfig& cfg, const EnvLookup& lookup) {
  std::vector<std::string> applied;
  for (const auto& f : fields()) {
    if (auto v = lookup(env_name(f.key))) {
      f.set(cfg, trim(*v));
      applied.push_back(f.key);
    }
  }
  validate_config(cfg);
  return applied;
}

}  // namespace hg
