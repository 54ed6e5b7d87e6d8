#include "higarment/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "higarment/errors.hpp"

namespace hg {

Image::Image(std::size_t width, std::size_t height, std::size_t channels, double fill)
    : width_(width), height_(height), channels_(channels),
      pixels_(width * height * channels, fill) {
  if (channels != 1 && channels != 3) {
    throw DimensionError("image channels must be 1 or 3, got " + std::to_string(channels));
  }
}

double Image::intensity(std::size_t x, std::size_t y) const {
  double s = 0.0;
  for (std::size_t c = 0; c < channels_; ++c) s += at(x, y, c);
  return s / static_cast<double>(channels_);
}

void Image::quantize() {
  for (double& v : pixels_) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

void Image::clamp01() {
  for (double& v : pixels_) v = std::clamp(v, 0.0, 1.0);
}

double image_l2_distance(const Image& a, const Image& b) {
  if (a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels()) {
    throw DimensionError("image_l2_distance: image sizes differ");
  }
  double s = 0.0;
  auto pa = a.pixels();
  auto pb = b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) s += (pa[i] - pb[i]) * (pa[i] - pb[i]);
  return std::sqrt(s);
}

std::vector<unsigned char> encode_netpbm(const Image& img) {
  std::ostringstream header;
  header << (img.channels() == 1 ? "P5" : "P6") << '\n'
         << img.width() << ' ' << img.height() << '\n'
         << 255 << '\n';
  const std::string h = header.str();
  std::vector<unsigned char> out(h.begin(), h.end());
  out.reserve(out.size() + img.pixels().size());
  for (double v : img.pixels()) {
    out.push_back(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  return out;
}

namespace {

class HeaderParser {
 public:
  explicit HeaderParser(std::span<const unsigned char> b) : b_(b) {}

  std::string token() {
    skip_space_and_comments();
    std::string t;
    while (pos_ < b_.size() && !std::isspace(b_[pos_])) t.push_back(static_cast<char>(b_[pos_++]));
    if (t.empty()) throw ValidationError("netpbm: truncated header");
    return t;
  }
  std::size_t number() {
    const std::string t = token();
    if (!std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      throw ValidationError("netpbm: bad header field '" + t + "'");
    }
    return std::stoul(t);
  }
  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_start() {
    if (pos_ >= b_.size() || !std::isspace(b_[pos_])) throw ValidationError("netpbm: missing raster");
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (std::isspace(b_[pos_])) {
        ++pos_;
      } else if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }
  std::span<const unsigned char> b_;
  std::size_t pos_ = 0;
};

}  // namespace

Image decode_netpbm(std::span<const unsigned char> bytes) {
  HeaderParser p(bytes);
  const std::string magic = p.token();
  std::size_t channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw ValidationError("netpbm: unsupported magic '" + magic + "'");
  }
  const std::size_t w = p.number(), h = p.number(), maxval = p.number();
  if (maxval != 255) throw ValidationError("netpbm: only maxval 255 is supported");
  const std::size_t start = p.raster_start();
  if (bytes.size() - start != w * h * channels) {
    throw ValidationError("netpbm: raster has " + std::to_string(bytes.size() - start) +
                          " bytes, expected " + std::to_string(w * h * channels));
  }
  Image img(w, h, channels);
  auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<double>(bytes[start + i]) / 255.0;
  return img;
}

void write_netpbm(const Image& img, const std::filesystem::path& path) {
  write_file_bytes(path, encode_netpbm(img));
}

Image read_netpbm(const std::filesystem::path& path) {
  try {
    return decode_netpbm(read_file_bytes(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("short write to " + path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

}  // namespace hg
