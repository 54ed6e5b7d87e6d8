#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "higarment/image.hpp"
#include "higarment/tensor.hpp"

namespace hg {

struct FabricEntry {
  std::string canonical;
  std::vector<std::string> aliases;  // sorted, lowercase, excludes canonical
  std::string image_path;            // relative to the db file
  Image image;                       // 3 channels
  Tensor key;                        // [1 x d], unit L2 norm once refreshed

  friend bool operator==(const FabricEntry&, const FabricEntry&) = default;
};

// Maps a fabric term to the unit-norm [1 x d] embedding used as a retrieval
// key or query.
using TermEmbedder = std::function<Tensor(std::string_view term)>;

class FabricDb {
 public:
  // Validates the entry: unique lowercase canonical name, aliases that do not
  // collide with other terms, a 3-channel image.
  void add(FabricEntry entry);

  // Entries in lexicographic canonical order.
  const std::vector<FabricEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const FabricEntry* find(std::string_view canonical) const;

  // Alias or canonical name to canonical name. nullopt means unknown fabric.
  std::optional<std::string> normalize(std::string_view label) const;
  bool knows(std::string_view term) const { return dictionary_.contains(std::string(term)); }
  const std::map<std::string, std::string>& dictionary() const { return dictionary_; }

  // Recomputes every key from its canonical name.
  void refresh_keys(const TermEmbedder& embed);
  bool has_keys() const;

  // One {"canonical", "aliases", "image"} object per line; writes the swatch
  // images next to the db file under their relative paths.
  void save(const std::filesystem::path& path) const;
  // Records without "image" only add aliases to an entry defined elsewhere in
  // the file. Errors carry the offending line number. Keys are left empty.
  static FabricDb load(const std::filesystem::path& path);

  friend bool operator==(const FabricDb&, const FabricDb&) = default;

 private:
  std::vector<FabricEntry> entries_;
  std::map<std::string, std::string> dictionary_;
};

// Gazetteer match: the first word that is a known alias or canonical name.
std::optional<std::string> extract_fabric_label(const std::vector<std::string>& words,
                                                const FabricDb& db);

// Words that frame a fabric slot in a free prompt.
struct PromptLexicon {
  std::vector<std::string> colors;
  std::vector<std::string> garment_nouns;
};

// Slot rule for terms outside the gazetteer: the word right before the first
// garment noun, when it is not a colour, not a known fabric and not the noun
// itself.
std::optional<std::string> extract_unknown_fabric_term(const std::vector<std::string>& words,
                                                       const FabricDb& db,
                                                       const PromptLexicon& lexicon);

struct RetrievalResult {
  const FabricEntry* entry = nullptr;
  bool used_fallback = false;
  // Cosine score per entry (entry order); filled only by the fallback.
  std::vector<std::pair<std::string, double>> scores;
};

// Exact dictionary hit, else the entry whose key has the highest cosine with
// embed(label); ties go to the lexicographically smallest canonical name.
// Throws ValidationError on an empty db and NumericError if keys are missing.
RetrievalResult retrieve(std::string_view label, const FabricDb& db, const TermEmbedder& embed);

// Full prompt path: extraction, normalisation, retrieval.
struct FabricResolution {
  enum class Kind { kNone, kExact, kFallback };
  Kind kind = Kind::kNone;
  std::string term;  // word taken from the prompt
  std::string canonical;
  const FabricEntry* entry = nullptr;
  std::vector<std::pair<std::string, double>> scores;
};

FabricResolution resolve_fabric(const std::vector<std::string>& words, const FabricDb& db,
                                const PromptLexicon& lexicon, const TermEmbedder& embed);

// Human-readable extraction -> normalisation -> retrieval trace.
std::string describe_resolution(const FabricResolution& r);

// Db with one swatch per fabric of the synthetic grammar.
FabricDb grammar_fabric_db(std::size_t swatch_size, std::uint64_t seed);

// Vocabulary of the synthetic grammar as a lexicon.
PromptLexicon grammar_lexicon();

}  // namespace hg
