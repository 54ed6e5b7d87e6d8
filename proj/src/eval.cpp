#include "higarment/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "higarment/errors.hpp"

namespace hg {

namespace {

void require_same_size(const Image& a, const Image& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DimensionError("image sizes differ: " + std::to_string(a.width()) + "x" +
                         std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                         std::to_string(b.height()));
  }
}

int level(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<int>(std::lround(c * 255.0));
}

std::array<double, 3> rgb_at(const Image& img, std::size_t x, std::size_t y) {
  if (img.channels() == 1) return {img.at(x, y), img.at(x, y), img.at(x, y)};
  return {img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)};
}

}  // namespace

int otsu_level(const Image& img) {
  std::array<double, 256> hist{};
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x) hist[level(img.intensity(x, y))] += 1.0;
  const double total = static_cast<double>(img.pixel_count());
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += i * hist[i];
  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int best_t = 0;
  for (int t = 0; t < 255; ++t) {
    w0 += hist[t];
    sum0 += t * hist[t];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  return best < 0.0 ? 255 : best_t;
}

Mask foreground_mask(const Image& img) {
  const int t = otsu_level(img);
  const std::size_t w = img.width(), h = img.height();
  Mask high(w * h, 0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) high[y * w + x] = level(img.intensity(x, y)) > t ? 1 : 0;
  std::size_t border = 0, border_high = 0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      if (x != 0 && y != 0 && x + 1 != w && y + 1 != h) continue;
      ++border;
      border_high += high[y * w + x];
    }
  if (2 * border_high <= border) return high;
  for (auto& m : high) m = static_cast<std::uint8_t>(1 - m);
  return high;
}

Mask erode(const Mask& mask, std::size_t width, std::size_t height) {
  Mask out(mask.size(), 0);
  for (std::size_t y = 1; y + 1 < height; ++y)
    for (std::size_t x = 1; x + 1 < width; ++x) {
      bool all = true;
      for (int dy = -1; dy <= 1 && all; ++dy)
        for (int dx = -1; dx <= 1 && all; ++dx) all = mask[(y + dy) * width + (x + dx)] != 0;
      out[y * width + x] = all ? 1 : 0;
    }
  return out;
}

std::size_t mask_count(const Mask& mask) {
  std::size_t n = 0;
  for (auto m : mask) n += m ? 1 : 0;
  return n;
}

double mask_iou(const Mask& a, const Mask& b) {
  if (a.size() != b.size()) throw DimensionError("mask sizes differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    inter += (a[k] && b[k]) ? 1 : 0;
    uni += (a[k] || b[k]) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double silhouette_iou(const Image& generated, const Image& reference) {
  require_same_size(generated, reference);
  return mask_iou(foreground_mask(generated), foreground_mask(reference));
}

double color_err(const Image& img, const std::array<double, 3>& color, const Mask& mask) {
  if (mask.size() != img.pixel_count()) throw DimensionError("mask does not match image");
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x) {
      if (!mask[y * img.width() + x]) continue;
      const auto p = rgb_at(img, x, y);
      double d2 = 0.0;
      for (std::size_t c = 0; c < 3; ++c) d2 += (p[c] - color[c]) * (p[c] - color[c]);
      total += std::sqrt(d2);
      ++n;
    }
  if (n == 0) throw ValidationError("color_err needs a nonempty mask");
  return total / static_cast<double>(n);
}

double color_err(const Image& img, const Image& reference, const Mask& mask) {
  require_same_size(img, reference);
  if (mask.size() != img.pixel_count()) throw DimensionError("mask does not match image");
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x) {
      if (!mask[y * img.width() + x]) continue;
      const auto p = rgb_at(img, x, y), q = rgb_at(reference, x, y);
      double d2 = 0.0;
      for (std::size_t c = 0; c < 3; ++c) d2 += (p[c] - q[c]) * (p[c] - q[c]);
      total += std::sqrt(d2);
      ++n;
    }
  if (n == 0) throw ValidationError("color_err needs a nonempty mask");
  return total / static_cast<double>(n);
}

OrientationHistogram orientation_histogram(const Image& img, const Mask* mask) {
  OrientationHistogram h{};
  const std::size_t w = img.width(), ht = img.height();
  if (mask && mask->size() != w * ht) throw DimensionError("mask does not match image");
  double total = 0.0;
  for (std::size_t y = 1; y + 1 < ht; ++y)
    for (std::size_t x = 1; x + 1 < w; ++x) {
      if (mask && !(*mask)[y * w + x]) continue;
      const double gx = img.intensity(x + 1, y) - img.intensity(x - 1, y);
      const double gy = img.intensity(x, y + 1) - img.intensity(x, y - 1);
      const double mag = std::hypot(gx, gy);
      if (mag == 0.0) continue;
      double theta = std::atan2(gy, gx);
      if (theta < 0.0) theta += std::numbers::pi;
      auto bin = static_cast<std::size_t>(theta / std::numbers::pi * kOrientationBins);
      if (bin >= kOrientationBins) bin = 0;  // theta == pi is the same orientation as 0
      h[bin] += mag;
      total += mag;
    }
  if (total > 0.0)
    for (auto& v : h) v /= total;
  return h;
}

double chi2_distance(const OrientationHistogram& a, const OrientationHistogram& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < kOrientationBins; ++k) {
    const double den = a[k] + b[k];
    if (den > 0.0) s += (a[k] - b[k]) * (a[k] - b[k]) / den;
  }
  return 0.5 * s;
}

double texture_chi2(const Image& img, const Mask& mask, const Image& swatch) {
  if (img.width() < 8 || img.height() < 8 || swatch.width() < 8 || swatch.height() < 8) {
    throw DimensionError("texture regions must be at least 8x8");
  }
  return chi2_distance(orientation_histogram(img, &mask), orientation_histogram(swatch));
}

double texture_chi2(const Image& a, const Image& b) {
  if (a.width() < 8 || a.height() < 8 || b.width() < 8 || b.height() < 8) {
    throw DimensionError("texture regions must be at least 8x8");
  }
  return chi2_distance(orientation_histogram(a), orientation_histogram(b));
}

MetricReport evaluate_against_reference(const Image& generated, const Image& reference) {
  require_same_size(generated, reference);
  MetricReport r;
  const Mask ref = foreground_mask(reference);
  r.silhouette_iou = mask_iou(foreground_mask(generated), ref);
  r.color_err = color_err(generated, reference, ref);
  const Mask inner = erode(ref, reference.width(), reference.height());
  r.texture_chi2 = chi2_distance(orientation_histogram(generated, &inner),
                                 orientation_histogram(reference, &inner));
  return r;
}

std::string report_csv(const std::vector<ReportRow>& rows,
                       const std::vector<std::pair<std::string, std::string>>& metadata) {
  std::string out;
  for (const auto& [k, v] : metadata) out += "# " + k + "=" + v + "\n";
  out += "id,silhouette_iou,color_err,texture_chi2\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, ",%.9g,%.9g,%.9g\n", r.metrics.silhouette_iou, r.metrics.color_err,
                  r.metrics.texture_chi2);
    out += r.id + buf;
  }
  return out;
}

MetricReport mean_report(const std::vector<ReportRow>& rows) {
  MetricReport m;
  if (rows.empty()) return m;
  for (const auto& r : rows) {
    m.silhouette_iou += r.metrics.silhouette_iou;
    m.color_err += r.metrics.color_err;
    m.texture_chi2 += r.metrics.texture_chi2;
  }
  const double n = static_cast<double>(rows.size());
  m.silhouette_iou /= n;
  m.color_err /= n;
  m.texture_chi2 /= n;
  return m;
}

}  // namespace hg
