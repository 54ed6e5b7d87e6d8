#include "higarment/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "higarment/encoders.hpp"
#include "higarment/errors.hpp"
#include "higarment/hash.hpp"
#include "higarment/rng.hpp"

namespace hg::synth {

const std::vector<NamedColor>& colors() {
  static const std::vector<NamedColor> table = {
      {"red", {0.90, 0.20, 0.20}},   {"orange", {0.95, 0.55, 0.15}},
      {"yellow", {0.95, 0.90, 0.25}}, {"green", {0.25, 0.75, 0.30}},
      {"cyan", {0.20, 0.80, 0.85}},  {"blue", {0.20, 0.35, 0.90}},
      {"purple", {0.60, 0.30, 0.80}}, {"pink", {0.95, 0.55, 0.75}},
  };
  return table;
}

const std::vector<FabricInfo>& fabrics() {
  static const std::vector<FabricInfo> table = {
      {"denim", {"jeans", "jean"}, Texture::kTwill},
      {"cotton", {"poplin"}, Texture::kSmooth},
      {"gingham", {"check", "plaid"}, Texture::kChecker},
      {"tweed", {"heather"}, Texture::kSpeckle},
      {"seersucker", {"pinstripe"}, Texture::kStripes},
      {"corduroy", {"cord", "corded"}, Texture::kRib},
      {"pique", {"honeycomb"}, Texture::kDots},
      {"canvas", {"duck"}, Texture::kCrosshatch},
  };
  return table;
}

const std::vector<std::string>& silhouette_names() {
  static const std::vector<std::string> names = {"tshirt", "hoodie", "pants", "skirt"};
  return names;
}

const std::vector<std::string>& component_names() {
  static const std::vector<std::string> names = {"pocket", "hood", "collar", "buttons"};
  return names;
}

const std::vector<std::string>& extra_garment_nouns() {
  static const std::vector<std::string> names = {"jacket", "top",    "shirt", "dress",
                                                 "coat",   "blouse", "shorts", "sweater"};
  return names;
}

std::vector<std::string> grammar_words() {
  std::vector<std::string> words = {"with", "and", "a", "the", "in", "of", "light", "dark",
                                    "long", "short", "sleeve", "sleeves", "loose", "fitted",
                                    "soft", "heavy", "plain", "classic"};
  for (const auto& c : colors()) words.push_back(c.name);
  for (const auto& f : fabrics()) {
    words.push_back(f.canonical);
    words.insert(words.end(), f.aliases.begin(), f.aliases.end());
  }
  for (const auto& s : silhouette_names()) words.push_back(s);
  for (const auto& c : component_names()) words.push_back(c);
  for (const auto& g : extra_garment_nouns()) words.push_back(g);
  return words;
}

std::optional<std::size_t> find_color(std::string_view name) {
  const auto& t = colors();
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i].name == name) return i;
  return std::nullopt;
}

std::optional<std::size_t> find_fabric(std::string_view canonical) {
  const auto& t = fabrics();
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i].canonical == canonical) return i;
  return std::nullopt;
}

std::optional<std::size_t> find_silhouette(std::string_view name) {
  const auto& t = silhouette_names();
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] == name) return i;
  return std::nullopt;
}

std::string_view texture_name(Texture t) {
  switch (t) {
    case Texture::kStripes: return "stripes";
    case Texture::kTwill: return "twill";
    case Texture::kChecker: return "checker";
    case Texture::kSpeckle: return "speckle";
    case Texture::kSmooth: return "smooth";
    case Texture::kRib: return "rib";
    case Texture::kDots: return "dots";
    case Texture::kCrosshatch: return "crosshatch";
  }
  return "?";
}

namespace {

// Fabric index for a canonical name or alias.
std::optional<std::size_t> find_fabric_term(std::string_view word) {
  const auto& t = fabrics();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i].canonical == word) return i;
    if (std::find(t[i].aliases.begin(), t[i].aliases.end(), word) != t[i].aliases.end()) return i;
  }
  return std::nullopt;
}

bool in_silhouette(Silhouette s, double u, double v) {
  auto box = [&](double u0, double u1, double v0, double v1) {
    return u >= u0 && u <= u1 && v >= v0 && v <= v1;
  };
  switch (s) {
    case Silhouette::kTshirt:
      return box(0.30, 0.70, 0.22, 0.90) || box(0.12, 0.88, 0.22, 0.42);
    case Silhouette::kHoodie:
      return box(0.28, 0.72, 0.25, 0.92) || box(0.10, 0.90, 0.25, 0.40) ||
             box(0.10, 0.22, 0.25, 0.82) || box(0.78, 0.90, 0.25, 0.82) ||
             (u - 0.5) * (u - 0.5) + (v - 0.20) * (v - 0.20) <= 0.13 * 0.13;
    case Silhouette::kPants:
      return box(0.28, 0.72, 0.10, 0.32) || box(0.28, 0.48, 0.10, 0.94) ||
             box(0.52, 0.72, 0.10, 0.94);
    case Silhouette::kSkirt: {
      if (v < 0.18 || v > 0.86) return false;
      const double half = 0.14 + (v - 0.18) / 0.68 * 0.18;
      return std::abs(u - 0.5) <= half;
    }
  }
  return false;
}

std::vector<std::uint8_t> silhouette_mask(Silhouette s, std::size_t size) {
  std::vector<std::uint8_t> mask(size * size, 0);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double u = (static_cast<double>(x) + 0.5) / static_cast<double>(size);
      const double v = (static_cast<double>(y) + 0.5) / static_cast<double>(size);
      mask[y * size + x] = in_silhouette(s, u, v) ? 1 : 0;
    }
  return mask;
}

bool is_outline(const std::vector<std::uint8_t>& mask, std::size_t size, std::size_t x, std::size_t y) {
  if (!mask[y * size + x]) return false;
  if (x == 0 || y == 0 || x + 1 == size || y + 1 == size) return true;
  return !mask[y * size + x - 1] || !mask[y * size + x + 1] || !mask[(y - 1) * size + x] ||
         !mask[(y + 1) * size + x];
}

// Component marks at pixel (x, y).
bool is_mark(const GarmentSpec& spec, std::size_t size, std::size_t x, std::size_t y) {
  const double s = static_cast<double>(size);
  const double u = (static_cast<double>(x) + 0.5) / s;
  const double v = (static_cast<double>(y) + 0.5) / s;
  const double px = 1.0 / s;
  auto pix = [&](double f) { return static_cast<std::size_t>(std::floor(f * s)); };
  if (spec.has(Component::kPocket)) {
    const bool pants = spec.silhouette == Silhouette::kPants;
    const std::size_t x0 = pix(pants ? 0.31 : 0.55), x1 = pix(pants ? 0.43 : 0.67);
    const std::size_t y0 = pix(pants ? 0.36 : 0.58), y1 = pix(pants ? 0.48 : 0.70);
    const bool on_v = (x == x0 || x == x1) && y >= y0 && y <= y1;
    const bool on_h = (y == y0 || y == y1) && x >= x0 && x <= x1;
    if (on_v || on_h) return true;
  }
  if (spec.has(Component::kHood)) {
    const double r = std::hypot(u - 0.5, v - 0.30);
    if (v <= 0.30 && std::abs(r - 0.12) < 0.6 * px) return true;
  }
  if (spec.has(Component::kCollar)) {
    const double du = std::abs(u - 0.5);
    if (du <= 0.10 && std::abs((v - 0.24) - du) < 0.7 * px) return true;
  }
  if (spec.has(Component::kButtons)) {
    if (x == pix(0.5)) {
      for (double bv : {0.48, 0.60, 0.72})
        if (y == pix(bv)) return true;
    }
  }
  return false;
}

constexpr double kTextureDepth = 0.35;
constexpr double kMarkShade = 0.55;
constexpr double kSwatchBase = 0.8;

}  // namespace

std::string caption(const GarmentSpec& spec) {
  std::string out = colors().at(spec.color).name + " ";
  out += spec.fabric_term.empty() ? fabrics().at(spec.fabric).canonical : spec.fabric_term;
  out += " " + silhouette_names().at(static_cast<std::size_t>(spec.silhouette));
  bool first = true;
  for (std::size_t b = 0; b < component_names().size(); ++b) {
    if (!(spec.components & (1u << b))) continue;
    out += first ? " with " : " and ";
    out += component_names()[b];
    first = false;
  }
  return out;
}

GarmentSpec parse_caption(std::string_view text) {
  const auto words = split_words(text);
  auto fail = [&](const std::string& why) -> GarmentSpec {
    throw ValidationError("caption '" + std::string(text) + "': " + why);
  };
  if (words.size() < 3) return fail("expected <color> <fabric> <silhouette>");
  GarmentSpec spec;
  const auto color = find_color(words[0]);
  if (!color) return fail("unknown color '" + words[0] + "'");
  spec.color = *color;
  const auto fabric = find_fabric_term(words[1]);
  if (!fabric) return fail("unknown fabric '" + words[1] + "'");
  spec.fabric = *fabric;
  if (fabrics()[*fabric].canonical != words[1]) spec.fabric_term = words[1];
  const auto sil = find_silhouette(words[2]);
  if (!sil) return fail("unknown silhouette '" + words[2] + "'");
  spec.silhouette = static_cast<Silhouette>(*sil);
  if (words.size() == 3) return spec;
  if (words[3] != "with" || words.size() < 5) return fail("expected 'with <components>'");
  for (std::size_t i = 4; i < words.size(); ++i) {
    if ((i - 4) % 2 == 1) {
      if (words[i] != "and") return fail("expected 'and' between components");
      continue;
    }
    const auto& names = component_names();
    const auto it = std::find(names.begin(), names.end(), words[i]);
    if (it == names.end()) return fail("unknown component '" + words[i] + "'");
    const auto bit = static_cast<std::uint8_t>(1u << (it - names.begin()));
    if (spec.components & bit) return fail("component repeated");
    spec.components |= bit;
  }
  if ((words.size() - 4) % 2 == 0) return fail("dangling 'and'");
  return spec;
}

nlohmann::json spec_to_json(const GarmentSpec& spec) {
  nlohmann::json comps = nlohmann::json::array();
  for (std::size_t b = 0; b < component_names().size(); ++b)
    if (spec.components & (1u << b)) comps.push_back(component_names()[b]);
  nlohmann::json j = {
      {"silhouette", silhouette_names().at(static_cast<std::size_t>(spec.silhouette))},
      {"color", colors().at(spec.color).name},
      {"fabric", fabrics().at(spec.fabric).canonical},
      {"fabric_term", spec.fabric_term},
      {"components", comps},
      {"sketch_color", nullptr},
  };
  if (spec.sketch_color) j["sketch_color"] = colors().at(*spec.sketch_color).name;
  return j;
}

GarmentSpec spec_from_json(const nlohmann::json& j) {
  GarmentSpec spec;
  auto need = [](auto opt, const std::string& what) {
    if (!opt) throw ValidationError("unknown " + what);
    return *opt;
  };
  const auto sil = j.at("silhouette").get<std::string>();
  spec.silhouette = static_cast<Silhouette>(need(find_silhouette(sil), "silhouette '" + sil + "'"));
  const auto color = j.at("color").get<std::string>();
  spec.color = need(find_color(color), "color '" + color + "'");
  const auto fabric = j.at("fabric").get<std::string>();
  spec.fabric = need(find_fabric(fabric), "fabric '" + fabric + "'");
  spec.fabric_term = j.value("fabric_term", std::string());
  for (const auto& c : j.at("components")) {
    const auto& names = component_names();
    const auto it = std::find(names.begin(), names.end(), c.get<std::string>());
    if (it == names.end()) throw ValidationError("unknown component " + c.dump());
    spec.components |= static_cast<std::uint8_t>(1u << (it - names.begin()));
  }
  if (j.contains("sketch_color") && !j.at("sketch_color").is_null()) {
    const auto sc = j.at("sketch_color").get<std::string>();
    spec.sketch_color = need(find_color(sc), "color '" + sc + "'");
  }
  return spec;
}

double hint_gray(std::size_t color) { return 0.55 + 0.05 * static_cast<double>(color); }

double texture_pattern(Texture t, std::size_t x, std::size_t y, Rng& rng) {
  switch (t) {
    case Texture::kStripes: return (y % 4) < 2 ? 1.0 : 0.0;
    case Texture::kRib: return (x % 4) < 2 ? 1.0 : 0.0;
    case Texture::kTwill: return ((x + y) % 4) < 2 ? 1.0 : 0.0;
    case Texture::kChecker: return ((x / 2 + y / 2) % 2) ? 1.0 : 0.0;
    case Texture::kCrosshatch: return ((x + y) % 4 == 0 || (x + 4 - y % 4) % 4 == 0) ? 1.0 : 0.0;
    case Texture::kDots: return (x % 4 == 1 || x % 4 == 2) && (y % 4 == 1 || y % 4 == 2) ? 1.0 : 0.0;
    case Texture::kSpeckle: return rng.bernoulli(0.35) ? 1.0 : 0.0;
    case Texture::kSmooth: return 0.0;
  }
  return 0.0;
}

Sample render_sample(const GarmentSpec& spec, std::size_t size, std::uint64_t seed) {
  if (size < 8 || size % 8 != 0) throw ValidationError("image size must be a positive multiple of 8");
  Rng rng(seed);
  Sample s;
  s.spec = spec;
  s.caption = caption(spec);
  s.mask = silhouette_mask(spec.silhouette, size);
  s.sketch = Image(size, size, 1, 0.0);
  s.target = Image(size, size, 3, 0.0);
  const auto& rgb = colors().at(spec.color).rgb;
  const double gray = hint_gray(spec.hint_color());
  const Texture tex = fabrics().at(spec.fabric).texture;
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      if (!s.mask[y * size + x]) continue;
      const bool mark = is_mark(spec, size, x, y);
      const bool line = mark || is_outline(s.mask, size, x, y);
      s.sketch.at(x, y) = line ? 1.0 : gray;
      const double shade = (1.0 - kTextureDepth * texture_pattern(tex, x, y, rng)) *
                           (mark ? kMarkShade : 1.0);
      for (std::size_t c = 0; c < 3; ++c) s.target.at(x, y, c) = rgb[c] * shade;
    }
  s.sketch.quantize();
  s.target.quantize();
  return s;
}

Image render_fabric_swatch(std::string_view fabric, std::size_t size, std::uint64_t seed) {
  const auto idx = find_fabric(fabric);
  if (!idx) throw ValidationError("unknown fabric '" + std::string(fabric) + "'");
  Rng rng(seed);
  const Texture tex = fabrics()[*idx].texture;
  Image img(size, size, 3);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double v = kSwatchBase * (1.0 - kTextureDepth * texture_pattern(tex, x, y, rng));
      for (std::size_t c = 0; c < 3; ++c) img.at(x, y, c) = v;
    }
  img.quantize();
  return img;
}

GarmentSpec random_spec(Rng& rng, double conflict_fraction, double alias_fraction) {
  GarmentSpec spec;
  spec.silhouette = static_cast<Silhouette>(rng.below(silhouette_names().size()));
  spec.color = static_cast<std::size_t>(rng.below(colors().size()));
  spec.fabric = static_cast<std::size_t>(rng.below(fabrics().size()));
  const auto& aliases = fabrics()[spec.fabric].aliases;
  if (rng.bernoulli(alias_fraction)) spec.fabric_term = aliases[rng.below(aliases.size())];
  for (std::size_t b = 0; b < component_names().size(); ++b)
    if (rng.bernoulli(0.5)) spec.components |= static_cast<std::uint8_t>(1u << b);
  if (rng.bernoulli(conflict_fraction)) {
    const std::size_t k = colors().size();
    spec.sketch_color = (spec.color + 1 + rng.below(k - 1)) % k;
  }
  return spec;
}

namespace {

std::string indexed_name(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu.%s", stem, i, ext);
  return buf;
}

}  // namespace

Dataset gen_dataset(std::size_t n, std::uint64_t seed, double conflict_fraction, std::size_t size,
                    double alias_fraction) {
  if (n == 0) throw ValidationError("dataset size must be at least 1");
  if (!(conflict_fraction >= 0.0 && conflict_fraction <= 1.0)) {
    throw ValidationError("conflict fraction must lie in [0, 1]");
  }
  if (!(alias_fraction >= 0.0 && alias_fraction <= 1.0)) {
    throw ValidationError("alias fraction must lie in [0, 1]");
  }
  Dataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t s = Rng::derive_seed(seed, i);
    Rng rng(s);
    const GarmentSpec spec = random_spec(rng, conflict_fraction, alias_fraction);
    Sample sample = render_sample(spec, size, Rng::derive_seed(s, std::string_view("render")));
    DatasetRecord r;
    r.index = i;
    r.seed = s;
    r.spec = spec;
    r.caption = sample.caption;
    r.sketch_file = indexed_name("sketch", i, "pgm");
    r.target_file = indexed_name("target", i, "ppm");
    r.sketch_hash = git_blob_hash(encode_netpbm(sample.sketch));
    r.target_hash = git_blob_hash(encode_netpbm(sample.target));
    ds.samples.push_back(std::move(sample));
    ds.records.push_back(std::move(r));
  }
  return ds;
}

std::string record_to_json_line(const DatasetRecord& r) {
  nlohmann::ordered_json j;
  j["index"] = r.index;
  j["seed"] = r.seed;
  j["caption"] = r.caption;
  j["spec"] = spec_to_json(r.spec);
  j["sketch"] = r.sketch_file;
  j["target"] = r.target_file;
  j["sketch_hash"] = r.sketch_hash;
  j["target_hash"] = r.target_hash;
  return j.dump();
}

DatasetRecord record_from_json(const nlohmann::json& j) {
  DatasetRecord r;
  r.index = j.at("index").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.caption = j.at("caption").get<std::string>();
  r.spec = spec_from_json(j.at("spec"));
  r.sketch_file = j.at("sketch").get<std::string>();
  r.target_file = j.at("target").get<std::string>();
  r.sketch_hash = j.value("sketch_hash", std::string());
  r.target_hash = j.value("target_hash", std::string());
  return r;
}

std::string manifest_text(const std::vector<DatasetRecord>& records) {
  std::string out;
  for (const auto& r : records) out += record_to_json_line(r) + "\n";
  return out;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    write_netpbm(ds.samples[i].sketch, dir / ds.records[i].sketch_file);
    write_netpbm(ds.samples[i].target, dir / ds.records[i].target_file);
  }
  write_text_file(dir / "manifest.jsonl", manifest_text(ds.records));
}

Dataset read_dataset(const std::filesystem::path& dir) {
  const std::string text = read_text_file(dir / "manifest.jsonl");
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  Dataset ds;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    DatasetRecord r;
    try {
      r = record_from_json(nlohmann::json::parse(line));
    } catch (const std::exception& e) {
      throw ValidationError((dir / "manifest.jsonl").string() + " line " + std::to_string(lineno) +
                            ": " + e.what());
    }
    Sample s;
    s.sketch = read_netpbm(dir / r.sketch_file);
    s.target = read_netpbm(dir / r.target_file);
    s.spec = r.spec;
    s.caption = r.caption;
    s.mask.resize(s.sketch.pixel_count());
    for (std::size_t k = 0; k < s.mask.size(); ++k) s.mask[k] = s.sketch.pixels()[k] > 0.0 ? 1 : 0;
    ds.samples.push_back(std::move(s));
    ds.records.push_back(std::move(r));
  }
  if (ds.records.empty()) throw ValidationError("dataset manifest is empty: " + dir.string());
  return ds;
}

}  // namespace hg::synth
