#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hg {

// Interleaved row-major image with values in [0, 1]. One channel for
// sketches and heatmaps, three for garment renders and fabric swatches.
class Image {
 public:
  Image() = default;
  Image(std::size_t width, std::size_t height, std::size_t channels, double fill = 0.0);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t channels() const { return channels_; }
  std::size_t pixel_count() const { return width_ * height_; }
  bool empty() const { return pixels_.empty(); }

  double& at(std::size_t x, std::size_t y, std::size_t c = 0) {
    return pixels_[(y * width_ + x) * channels_ + c];
  }
  double at(std::size_t x, std::size_t y, std::size_t c = 0) const {
    return pixels_[(y * width_ + x) * channels_ + c];
  }
  // Mean over channels.
  double intensity(std::size_t x, std::size_t y) const;

  std::span<double> pixels() { return pixels_; }
  std::span<const double> pixels() const { return pixels_; }

  // Snap every value to the nearest multiple of 1/255, as stored on disk.
  void quantize();
  void clamp01();

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> pixels_;
};

double image_l2_distance(const Image& a, const Image& b);

// Binary Netpbm, maxval 255: P5 for 1 channel, P6 for 3 channels.
std::vector<unsigned char> encode_netpbm(const Image& img);
Image decode_netpbm(std::span<const unsigned char> bytes);
void write_netpbm(const Image& img, const std::filesystem::path& path);
Image read_netpbm(const std::filesystem::path& path);

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const unsigned char> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace hg
