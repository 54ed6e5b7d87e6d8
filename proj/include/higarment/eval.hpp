#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "higarment/image.hpp"

namespace hg {

// Proxy metrics. None of these is CLIPScore, FID or LPIPS; they only measure
// silhouette agreement, regional colour error and texture statistics.

using Mask = std::vector<std::uint8_t>;

// Otsu threshold on mean-channel intensity quantised to 256 levels. Returns
// the level t such that the classes are {<= t} and {> t}.
int otsu_level(const Image& img);
// Foreground = the Otsu class that holds fewer of the border pixels. A
// constant image has an empty foreground.
Mask foreground_mask(const Image& img);
// Pixels whose whole 3x3 neighbourhood lies inside the mask.
Mask erode(const Mask& mask, std::size_t width, std::size_t height);
std::size_t mask_count(const Mask& mask);

// |a & b| / |a | b|; two empty masks give 1.
double mask_iou(const Mask& a, const Mask& b);
// IoU of the Otsu foregrounds. Throws DimensionError on a size mismatch.
double silhouette_iou(const Image& generated, const Image& reference);

// Mean RGB L2 distance to a flat colour over the mask. Throws
// ValidationError on an empty mask.
double color_err(const Image& img, const std::array<double, 3>& color, const Mask& mask);
// Same against a reference image, pixel by pixel.
double color_err(const Image& img, const Image& reference, const Mask& mask);

inline constexpr std::size_t kOrientationBins = 16;
using OrientationHistogram = std::array<double, kOrientationBins>;

// Magnitude-weighted histogram of unsigned gradient orientations from central
// differences, normalised to sum 1. Only pixels with mask set (all pixels for
// an empty mask pointer) that are not on the image border contribute. All
// zeros when the region has no gradient.
OrientationHistogram orientation_histogram(const Image& img, const Mask* mask = nullptr);
// 0.5 * sum (a - b)^2 / (a + b) over bins with a + b > 0; in [0, 1].
double chi2_distance(const OrientationHistogram& a, const OrientationHistogram& b);
// Region of `img` (under `mask`) against a whole swatch. Regions must span at
// least 8x8 pixels.
double texture_chi2(const Image& img, const Mask& mask, const Image& swatch);
double texture_chi2(const Image& a, const Image& b);

struct MetricReport {
  double silhouette_iou = 0.0;
  double color_err = 0.0;
  double texture_chi2 = 0.0;
};

// Generated image against its reference render: IoU of the Otsu masks, colour
// error and texture distance over the eroded reference foreground.
MetricReport evaluate_against_reference(const Image& generated, const Image& reference);

struct ReportRow {
  std::string id;
  MetricReport metrics;
};

// One "# key=value" line per metadata entry, then the header
// "id,silhouette_iou,color_err,texture_chi2" and one row per sample.
std::string report_csv(const std::vector<ReportRow>& rows,
                       const std::vector<std::pair<std::string, std::string>>& metadata);
MetricReport mean_report(const std::vector<ReportRow>& rows);

}  // namespace hg
