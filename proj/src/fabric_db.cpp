#include "higarment/fabric_db.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

#include "higarment/errors.hpp"
#include "higarment/rng.hpp"
#include "higarment/synth.hpp"

namespace hg {

namespace {

bool is_lower_term(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
  });
}

double cosine(const Tensor& a, const Tensor& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine of a zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

void FabricDb::add(FabricEntry entry) {
  if (!is_lower_term(entry.canonical)) {
    throw ValidationError("fabric name must be a lowercase word: '" + entry.canonical + "'");
  }
  if (dictionary_.contains(entry.canonical)) {
    throw ValidationError("duplicate fabric term '" + entry.canonical + "'");
  }
  if (entry.image.channels() != 3) {
    throw ValidationError("fabric '" + entry.canonical + "' needs a 3-channel sample image");
  }
  std::sort(entry.aliases.begin(), entry.aliases.end());
  entry.aliases.erase(std::unique(entry.aliases.begin(), entry.aliases.end()), entry.aliases.end());
  for (const auto& a : entry.aliases) {
    if (!is_lower_term(a)) throw ValidationError("alias must be a lowercase word: '" + a + "'");
    if (a == entry.canonical || dictionary_.contains(a)) {
      throw ValidationError("duplicate fabric term '" + a + "'");
    }
  }
  dictionary_[entry.canonical] = entry.canonical;
  for (const auto& a : entry.aliases) dictionary_[a] = entry.canonical;
  auto pos = std::lower_bound(entries_.begin(), entries_.end(), entry.canonical,
                              [](const FabricEntry& e, const std::string& n) { return e.canonical < n; });
  entries_.insert(pos, std::move(entry));
}

const FabricEntry* FabricDb::find(std::string_view canonical) const {
  for (const auto& e : entries_)
    if (e.canonical == canonical) return &e;
  return nullptr;
}

std::optional<std::string> FabricDb::normalize(std::string_view label) const {
  auto it = dictionary_.find(std::string(label));
  if (it == dictionary_.end()) return std::nullopt;
  return it->second;
}

void FabricDb::refresh_keys(const TermEmbedder& embed) {
  for (auto& e : entries_) {
    e.key = embed(e.canonical);
    require_finite(e.key, "fabric key");
  }
}

bool FabricDb::has_keys() const {
  return !entries_.empty() &&
         std::all_of(entries_.begin(), entries_.end(), [](const FabricEntry& e) { return !e.key.empty(); });
}

void FabricDb::save(const std::filesystem::path& path) const {
  std::string text;
  const auto dir = path.parent_path();
  for (const auto& e : entries_) {
    nlohmann::ordered_json j;
    j["canonical"] = e.canonical;
    j["aliases"] = e.aliases;
    j["image"] = e.image_path;
    text += j.dump() + "\n";
    write_netpbm(e.image, dir / e.image_path);
  }
  write_text_file(path, text);
}

FabricDb FabricDb::load(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  const auto dir = path.parent_path();
  struct PendingAliases {
    std::size_t line;
    std::string canonical;
    std::vector<std::string> aliases;
  };
  std::vector<PendingAliases> pending;
  FabricDb db;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](std::size_t at, const std::string& why) {
    throw ValidationError(path.string() + " line " + std::to_string(at) + ": " + why);
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(lineno, std::string("malformed record: ") + e.what());
    }
    if (!j.is_object() || !j.contains("canonical") || !j["canonical"].is_string()) {
      fail(lineno, "record needs a string field 'canonical'");
    }
    std::vector<std::string> aliases;
    if (j.contains("aliases")) {
      if (!j["aliases"].is_array()) fail(lineno, "'aliases' must be an array");
      for (const auto& a : j["aliases"]) {
        if (!a.is_string()) fail(lineno, "aliases must be strings");
        aliases.push_back(a.get<std::string>());
      }
    }
    const std::string canonical = j["canonical"].get<std::string>();
    if (!j.contains("image")) {
      pending.push_back({lineno, canonical, std::move(aliases)});
      continue;
    }
    if (!j["image"].is_string()) fail(lineno, "'image' must be a string");
    FabricEntry e;
    e.canonical = canonical;
    e.aliases = std::move(aliases);
    e.image_path = j["image"].get<std::string>();
    try {
      e.image = read_netpbm(dir / e.image_path);
      db.add(std::move(e));
    } catch (const Error& err) {
      fail(lineno, err.what());
    }
  }
  for (auto& p : pending) {
    auto it = std::find_if(db.entries_.begin(), db.entries_.end(),
                           [&](const FabricEntry& e) { return e.canonical == p.canonical; });
    if (it == db.entries_.end()) {
      fail(p.line, "aliases point to missing entry '" + p.canonical + "'");
    }
    for (const auto& a : p.aliases) {
      if (!is_lower_term(a)) fail(p.line, "alias must be a lowercase word: '" + a + "'");
      if (db.dictionary_.contains(a)) fail(p.line, "duplicate fabric term '" + a + "'");
      db.dictionary_[a] = p.canonical;
      it->aliases.push_back(a);
    }
    std::sort(it->aliases.begin(), it->aliases.end());
  }
  return db;
}

std::optional<std::string> extract_fabric_label(const std::vector<std::string>& words,
                                                const FabricDb& db) {
  for (const auto& w : words)
    if (db.knows(w)) return w;
  return std::nullopt;
}

std::optional<std::string> extract_unknown_fabric_term(const std::vector<std::string>& words,
                                                       const FabricDb& db,
                                                       const PromptLexicon& lexicon) {
  auto in = [](const std::vector<std::string>& set, const std::string& w) {
    return std::find(set.begin(), set.end(), w) != set.end();
  };
  for (std::size_t i = 1; i < words.size(); ++i) {
    if (!in(lexicon.garment_nouns, words[i])) continue;
    const auto& prev = words[i - 1];
    if (in(lexicon.colors, prev) || in(lexicon.garment_nouns, prev) || db.knows(prev)) return std::nullopt;
    return prev;
  }
  return std::nullopt;
}

RetrievalResult retrieve(std::string_view label, const FabricDb& db, const TermEmbedder& embed) {
  if (db.empty()) throw ValidationError("fabric database is empty");
  RetrievalResult out;
  if (auto canonical = db.normalize(label)) {
    out.entry = db.find(*canonical);
    return out;
  }
  if (!db.has_keys()) throw NumericError("fabric keys have not been computed");
  const Tensor query = embed(label);
  out.used_fallback = true;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& e : db.entries()) {
    const double s = cosine(query, e.key);
    out.scores.emplace_back(e.canonical, s);
    // Entries are sorted, so strict '>' keeps the smallest name on ties.
    if (s > best) {
      best = s;
      out.entry = &e;
    }
  }
  return out;
}

FabricResolution resolve_fabric(const std::vector<std::string>& words, const FabricDb& db,
                                const PromptLexicon& lexicon, const TermEmbedder& embed) {
  FabricResolution r;
  if (db.empty()) return r;
  std::optional<std::string> term = extract_fabric_label(words, db);
  if (!term) term = extract_unknown_fabric_term(words, db, lexicon);
  if (!term) return r;
  RetrievalResult hit = retrieve(*term, db, embed);
  r.term = *term;
  r.entry = hit.entry;
  r.canonical = hit.entry->canonical;
  r.kind = hit.used_fallback ? FabricResolution::Kind::kFallback : FabricResolution::Kind::kExact;
  r.scores = std::move(hit.scores);
  return r;
}

std::string describe_resolution(const FabricResolution& r) {
  std::ostringstream os;
  switch (r.kind) {
    case FabricResolution::Kind::kNone:
      os << "extract: no fabric term; no-fabric path\n";
      break;
    case FabricResolution::Kind::kExact:
      os << "extract: '" << r.term << "'\n";
      os << "normalize: '" << r.term << "' -> '" << r.canonical << "'\n";
      os << "retrieve: entry '" << r.canonical << "' (" << r.entry->image_path << ")\n";
      break;
    case FabricResolution::Kind::kFallback:
      os << "extract: '" << r.term << "'\n";
      os << "normalize: '" << r.term << "' unknown; similarity fallback\n";
      for (const auto& [name, s] : r.scores) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "  cosine %-12s %+.6f\n", name.c_str(), s);
        os << buf;
      }
      os << "retrieve: nearest entry '" << r.canonical << "' (" << r.entry->image_path << ")\n";
      break;
  }
  return os.str();
}

FabricDb grammar_fabric_db(std::size_t swatch_size, std::uint64_t seed) {
  FabricDb db;
  for (const auto& f : synth::fabrics()) {
    FabricEntry e;
    e.canonical = f.canonical;
    e.aliases = f.aliases;
    e.image_path = "swatches/" + f.canonical + ".ppm";
    e.image = synth::render_fabric_swatch(f.canonical, swatch_size, Rng::derive_seed(seed, f.canonical));
    db.add(std::move(e));
  }
  return db;
}

PromptLexicon grammar_lexicon() {
  PromptLexicon lex;
  for (const auto& c : synth::colors()) lex.colors.push_back(c.name);
  lex.garment_nouns = synth::silhouette_names();
  const auto& extra = synth::extra_garment_nouns();
  lex.garment_nouns.insert(lex.garment_nouns.end(), extra.begin(), extra.end());
  return lex;
}

}  // namespace hg
