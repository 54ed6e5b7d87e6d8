#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "higarment/image.hpp"
#include "higarment/rng.hpp"

namespace hg::synth {

enum class Silhouette { kTshirt, kHoodie, kPants, kSkirt };
enum class Component : std::uint8_t { kPocket = 1, kHood = 2, kCollar = 4, kButtons = 8 };
enum class Texture { kStripes, kTwill, kChecker, kSpeckle, kSmooth, kRib, kDots, kCrosshatch };

struct NamedColor {
  std::string name;
  std::array<double, 3> rgb;
};

struct FabricInfo {
  std::string canonical;
  std::vector<std::string> aliases;
  Texture texture;
};

// The fixed caption grammar.
const std::vector<NamedColor>& colors();
const std::vector<FabricInfo>& fabrics();
const std::vector<std::string>& silhouette_names();
const std::vector<std::string>& component_names();  // bit order of Component
// Garment nouns outside the rendered silhouettes, accepted in free prompts.
const std::vector<std::string>& extra_garment_nouns();
// Every word the grammar can produce plus the free-prompt extras.
std::vector<std::string> grammar_words();

std::optional<std::size_t> find_color(std::string_view name);
std::optional<std::size_t> find_fabric(std::string_view canonical);
std::optional<std::size_t> find_silhouette(std::string_view name);
std::string_view texture_name(Texture t);

struct GarmentSpec {
  Silhouette silhouette = Silhouette::kTshirt;
  std::size_t color = 0;   // caption and target colour
  std::size_t fabric = 0;  // canonical fabric index
  // Word used for the fabric in the caption; empty means the canonical name.
  std::string fabric_term;
  std::uint8_t components = 0;  // Component bit mask
  // Conflict: the sketch carries this colour hint instead of `color`.
  std::optional<std::size_t> sketch_color;

  bool has(Component c) const { return components & static_cast<std::uint8_t>(c); }
  bool conflicted() const { return sketch_color.has_value(); }
  std::size_t hint_color() const { return sketch_color.value_or(color); }

  friend bool operator==(const GarmentSpec&, const GarmentSpec&) = default;
};

// "<color> <fabric> <silhouette>[ with <c1> and <c2> ...]"
std::string caption(const GarmentSpec& spec);
// Inverse of caption() for the caption-visible fields (sketch_color is not
// part of a caption). Throws ValidationError on text outside the grammar.
GarmentSpec parse_caption(std::string_view text);

nlohmann::json spec_to_json(const GarmentSpec& spec);
GarmentSpec spec_from_json(const nlohmann::json& j);

struct Sample {
  Image sketch;  // 1 channel
  Image target;  // 3 channels
  std::vector<std::uint8_t> mask;  // silhouette, row-major, shared by both
  std::string caption;
  GarmentSpec spec;
};

// Grey level that encodes a colour hint in sketches.
double hint_gray(std::size_t color);
// Texture pattern value in {0,1} at a pixel; period-4 tiles aligned to (0,0).
double texture_pattern(Texture t, std::size_t x, std::size_t y, Rng& rng);

Sample render_sample(const GarmentSpec& spec, std::size_t size, std::uint64_t seed);
// Texture on a neutral base, no silhouette.
Image render_fabric_swatch(std::string_view fabric, std::size_t size, std::uint64_t seed);

struct DatasetRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  GarmentSpec spec;
  std::string caption;
  std::string sketch_file;
  std::string target_file;
  std::string sketch_hash;
  std::string target_hash;
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<DatasetRecord> records;
};

// Draws a spec uniformly from the grammar. Conflicts get a hint colour drawn
// uniformly from the other colours.
GarmentSpec random_spec(Rng& rng, double conflict_fraction, double alias_fraction = 0.5);

// Sample i uses seed derive_seed(seed, i). Hashes are git blob hashes of the
// encoded PGM/PPM bytes.
Dataset gen_dataset(std::size_t n, std::uint64_t seed, double conflict_fraction,
                    std::size_t size = 32, double alias_fraction = 0.5);

std::string record_to_json_line(const DatasetRecord& r);
DatasetRecord record_from_json(const nlohmann::json& j);
// One JSON object per line.
std::string manifest_text(const std::vector<DatasetRecord>& records);

// Writes sketch_XXXX.pgm, target_XXXX.ppm and manifest.jsonl into `dir`.
void write_dataset(const Dataset& ds, const std::filesystem::path& dir);
// Reads manifest.jsonl and the referenced images.
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace hg::synth
