#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "higarment/attention.hpp"
#include "higarment/image.hpp"

namespace hg {

// Word-level vocabulary. Ids 0 and 1 are reserved for <pad> and <unk>;
// ordinary words follow in sorted order.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();
  // Duplicates are ignored; words are lowercased.
  static Vocabulary from_words(const std::vector<std::string>& words);

  std::size_t size() const { return id_to_token_.size(); }
  std::size_t id(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string& token(std::size_t id) const;

  // Sorted "token<TAB>id" lines.
  std::string serialize() const;
  static Vocabulary parse(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.id_to_token_ == b.id_to_token_;
  }

 private:
  std::vector<std::string> id_to_token_;
  std::map<std::string, std::size_t, std::less<>> token_to_id_;
};

// Lowercases and splits on anything that is not a letter or digit.
std::vector<std::string> split_words(std::string_view text);
std::vector<std::size_t> tokenize(std::string_view text, const Vocabulary& vocab);

struct TextEncoder {
  Parameter* embedding = nullptr;   // [|V| x d]
  Parameter* positional = nullptr;  // [max_len x d]

  static TextEncoder create(ParameterStore& store, const std::string& prefix, std::size_t vocab_size,
                            std::size_t max_len, std::size_t d, Rng& rng);
  std::size_t max_length() const { return positional->value.rows(); }

  // Embedding plus positional lookup; throws ValidationError on empty ids and
  // DimensionError past max_length().
  Var encode(Tape& tape, std::span<const std::size_t> ids) const;
};

struct ImageEncoder {
  Parameter* projection = nullptr;  // [patch*patch*channels x d]
  Parameter* positional = nullptr;  // [tokens x d]
  std::size_t patch = 8;
  std::size_t channels = 1;
  std::size_t image_size = 32;

  static ImageEncoder create(ParameterStore& store, const std::string& prefix, std::size_t image_size,
                             std::size_t patch, std::size_t channels, std::size_t d, Rng& rng);
  std::size_t token_count() const { return (image_size / patch) * (image_size / patch); }

  // Non-overlapping patches, flattened (dy, dx, channel), projected, plus the
  // positional table. Output has (w/p)*(h/p) tokens.
  Var encode(Tape& tape, const Image& img) const;
};

// [h*w x c] constant holding the image pixels.
Var image_to_grid(Tape& tape, const Image& img);

}  // namespace hg
