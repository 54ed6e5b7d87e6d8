#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "higarment/autograd.hpp"

namespace hg {

struct GradCheckOptions {
  double step = 1e-4;  // central-difference step h
  // Parameters with more elements than this are checked on a seeded random
  // subset of that many elements; smaller ones are checked exhaustively.
  std::size_t max_elements_per_parameter = 64;
  std::uint64_t seed = 0;
  // Test hook: scales analytic gradients by (1 + corrupt) before comparing.
  double corrupt = 0.0;
};

struct ParameterGradError {
  std::string name;
  std::size_t checked = 0;
  double analytic_norm = 0.0;
  double numeric_norm = 0.0;
  // ||analytic - numeric|| / max(||analytic||, ||numeric||) over the checked
  // elements; 0 when both gradients vanish.
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<ParameterGradError> parameters;
  double max_rel_error = 0.0;
  bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

// Builds a scalar loss on the given tape. Must be a pure function of the
// parameter values (no internal RNG draws).
using LossBuilder = std::function<Var(Tape&)>;

// Compares reverse-mode gradients of `loss` against central differences for
// every listed parameter. Parameter values are restored afterwards; their
// grad fields are overwritten with the analytic gradient.
GradCheckReport grad_check(const LossBuilder& loss, const std::vector<Parameter*>& params,
                           const GradCheckOptions& options = {});

}  // namespace hg
