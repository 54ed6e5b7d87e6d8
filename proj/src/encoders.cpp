#include "higarment/encoders.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "higarment/errors.hpp"
#include "higarment/grid.hpp"
#include "higarment/init.hpp"

namespace hg {

Vocabulary::Vocabulary() {
  id_to_token_ = {std::string(kPadToken), std::string(kUnkToken)};
  token_to_id_.emplace(kPadToken, kPad);
  token_to_id_.emplace(kUnkToken, kUnk);
}

Vocabulary Vocabulary::from_words(const std::vector<std::string>& words) {
  std::set<std::string> unique;
  for (const auto& w : words) {
    std::string lw = w;
    std::transform(lw.begin(), lw.end(), lw.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lw.empty() || lw == kPadToken || lw == kUnkToken) continue;
    unique.insert(std::move(lw));
  }
  Vocabulary v;
  for (const auto& w : unique) {
    v.token_to_id_.emplace(w, v.id_to_token_.size());
    v.id_to_token_.push_back(w);
  }
  return v;
}

std::size_t Vocabulary::id(std::string_view token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return token_to_id_.contains(token); }

const std::string& Vocabulary::token(std::size_t id) const {
  if (id >= id_to_token_.size()) throw DimensionError("token id out of range: " + std::to_string(id));
  return id_to_token_[id];
}

std::string Vocabulary::serialize() const {
  std::ostringstream os;
  for (const auto& [tok, id] : token_to_id_) os << tok << '\t' << id << '\n';
  return os.str();
}

Vocabulary Vocabulary::parse(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<std::pair<std::size_t, std::string>> entries;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ValidationError("vocabulary line " + std::to_string(lineno) + ": missing tab");
    }
    std::size_t id = 0;
    try {
      id = std::stoul(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ValidationError("vocabulary line " + std::to_string(lineno) + ": bad id");
    }
    entries.emplace_back(id, line.substr(0, tab));
  }
  std::sort(entries.begin(), entries.end());
  Vocabulary v;
  v.id_to_token_.clear();
  v.token_to_id_.clear();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].first != i) throw ValidationError("vocabulary ids are not contiguous from 0");
    if (!v.token_to_id_.emplace(entries[i].second, i).second) {
      throw ValidationError("vocabulary token repeated: " + entries[i].second);
    }
    v.id_to_token_.push_back(entries[i].second);
  }
  if (v.id_to_token_.size() < 2 || v.id_to_token_[kPad] != kPadToken ||
      v.id_to_token_[kUnk] != kUnkToken) {
    throw ValidationError("vocabulary must reserve ids 0 and 1 for <pad> and <unk>");
  }
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const { write_text_file(path, serialize()); }

Vocabulary Vocabulary::load(const std::filesystem::path& path) { return parse(read_text_file(path)); }

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::vector<std::size_t> tokenize(std::string_view text, const Vocabulary& vocab) {
  std::vector<std::size_t> ids;
  for (const auto& w : split_words(text)) ids.push_back(vocab.id(w));
  return ids;
}

TextEncoder TextEncoder::create(ParameterStore& store, const std::string& prefix, std::size_t vocab_size,
                                std::size_t max_len, std::size_t d, Rng& rng) {
  TextEncoder enc;
  enc.embedding = &store.add(prefix + ".embedding", normal_tensor(vocab_size, d, 0.5, rng));
  enc.positional = &store.add(prefix + ".positional", normal_tensor(max_len, d, 0.1, rng));
  return enc;
}

Var TextEncoder::encode(Tape& tape, std::span<const std::size_t> ids) const {
  if (ids.empty()) throw ValidationError("encode_text: empty token sequence");
  if (ids.size() > max_length()) {
    throw DimensionError("encode_text: " + std::to_string(ids.size()) + " tokens exceed max length " +
                         std::to_string(max_length()));
  }
  std::vector<std::size_t> positions(ids.size());
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  return add(gather_rows(tape.parameter(*embedding), ids),
             gather_rows(tape.parameter(*positional), positions));
}

ImageEncoder ImageEncoder::create(ParameterStore& store, const std::string& prefix,
                                  std::size_t image_size, std::size_t patch, std::size_t channels,
                                  std::size_t d, Rng& rng) {
  if (patch == 0 || image_size % patch != 0) {
    throw ValidationError("image size " + std::to_string(image_size) + " is not divisible by patch " +
                          std::to_string(patch));
  }
  ImageEncoder enc;
  enc.patch = patch;
  enc.channels = channels;
  enc.image_size = image_size;
  const std::size_t fan_in = patch * patch * channels;
  enc.projection = &store.add(prefix + ".projection",
                              normal_tensor(fan_in, d, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng));
  enc.positional = &store.add(prefix + ".positional", normal_tensor(enc.token_count(), d, 0.1, rng));
  return enc;
}

Var image_to_grid(Tape& tape, const Image& img) {
  Tensor t({img.pixel_count(), img.channels()},
           std::vector<double>(img.pixels().begin(), img.pixels().end()));
  return tape.constant(std::move(t));
}

Var ImageEncoder::encode(Tape& tape, const Image& img) const {
  if (img.channels() != channels) {
    throw DimensionError("encode_image: expected " + std::to_string(channels) + " channels, got " +
                         std::to_string(img.channels()));
  }
  if (img.width() % patch != 0 || img.height() % patch != 0) {
    throw DimensionError("encode_image: " + std::to_string(img.width()) + "x" +
                         std::to_string(img.height()) + " is not divisible by patch " +
                         std::to_string(patch));
  }
  const std::size_t tokens = (img.width() / patch) * (img.height() / patch);
  if (tokens > positional->value.rows()) {
    throw DimensionError("encode_image: " + std::to_string(tokens) + " patches exceed the positional table");
  }
  Var patches = patchify(image_to_grid(tape, img), img.height(), img.width(), patch);
  Var proj = matmul(patches, tape.parameter(*projection));
  Var pos = slice_rows(tape.parameter(*positional), 0, tokens);
  return add(proj, pos);
}

}  // namespace hg
