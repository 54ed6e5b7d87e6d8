#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "higarment/gradcheck.hpp"

namespace hg {

// Finite-difference suites over small fixed-seed configurations.
//   mmse      Q-Former and cross-modal enhancement (isolated block)
//   hca       cosine gate, alpha and harmonized attention (isolated block)
//   denoiser  the denoiser alone on an 8x8 image
//   full      sketch + prompt -> encoders -> MMSE -> HCA -> denoiser -> loss
struct SuiteResult {
  std::string name;
  double tolerance = 0.0;
  GradCheckReport report;
  bool passed() const { return report.passed(tolerance); }
};

inline constexpr double kBlockTolerance = 1e-5;
inline constexpr double kChainTolerance = 1e-4;

const std::vector<std::string>& gradcheck_suite_names();
// `module` is one suite name or "all". `corrupt` is forwarded to
// GradCheckOptions. Throws ValidationError on an unknown module.
std::vector<SuiteResult> run_gradcheck_suites(std::string_view module, double corrupt = 0.0);

}  // namespace hg
