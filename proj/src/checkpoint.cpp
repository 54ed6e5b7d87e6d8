#include "higarment/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "higarment/errors.hpp"

namespace hg {
namespace {

constexpr char kMagic[4] = {'H', 'G', 'C', 'K'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_f32(std::vector<unsigned char>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}
  bool done() const { return pos_ == bytes_.size(); }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ValidationError("checkpoint truncated");
  }
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_checkpoint(const ParameterStore& store) {
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kCheckpointVersion);
  for (const Parameter* p : store.all()) {
    put_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out.insert(out.end(), p->name.begin(), p->name.end());
    const auto& shape = p->value.shape();
    put_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (auto s : shape) put_u32(out, static_cast<std::uint32_t>(s));
    for (double v : p->value.data()) put_f32(out, static_cast<float>(v));
  }
  return out;
}

void save_checkpoint(const ParameterStore& store, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(store);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("short write to " + path.string());
}

void decode_checkpoint(const std::vector<unsigned char>& bytes, ParameterStore& store) {
  Reader r(bytes);
  if (r.str(4) != std::string(kMagic, 4)) throw ValidationError("not an HGCK checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  }
  std::map<std::string, Tensor> loaded;
  while (!r.done()) {
    const std::string name = r.str(r.u32());
    Shape shape(r.u32());
    for (auto& s : shape) s = r.u32();
    Tensor t(shape);
    for (double& v : t.data()) v = static_cast<double>(r.f32());
    if (!store.contains(name)) throw ValidationError("checkpoint parameter not in model: " + name);
    if (store.at(name).value.shape() != shape) {
      throw ValidationError("checkpoint shape " + shape_to_string(shape) + " for " + name +
                            " does not match model " +
                            shape_to_string(store.at(name).value.shape()));
    }
    if (!loaded.emplace(name, std::move(t)).second) {
      throw ValidationError("duplicate parameter in checkpoint: " + name);
    }
  }
  for (const Parameter* p : std::as_const(store).all()) {
    if (!loaded.contains(p->name)) throw ValidationError("checkpoint lacks parameter " + p->name);
  }
  for (auto& [name, t] : loaded) store.at(name).value = std::move(t);
}

void load_checkpoint(const std::filesystem::path& path, ParameterStore& store) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  decode_checkpoint(bytes, store);
}

}  // namespace hg
