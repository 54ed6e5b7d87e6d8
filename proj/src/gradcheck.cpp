#include "higarment/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "higarment/rng.hpp"

namespace hg {
namespace {

double evaluate(const LossBuilder& loss) {
  Tape tape(/*grad_enabled=*/false);
  return loss(tape).value()[0];
}

std::vector<std::size_t> pick_elements(std::size_t n, std::size_t limit, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n <= limit) return idx;
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < limit; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& loss, const std::vector<Parameter*>& params,
                           const GradCheckOptions& options) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var l = loss(tape);
    tape.backward(l);
  }

  GradCheckReport report;
  Rng rng(options.seed);
  const double h = options.step;
  for (Parameter* p : params) {
    ParameterGradError err;
    err.name = p->name;
    const auto elements = pick_elements(p->value.size(), options.max_elements_per_parameter, rng);
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t k : elements) {
      const double saved = p->value[k];
      p->value[k] = saved + h;
      const double up = evaluate(loss);
      p->value[k] = saved - h;
      const double down = evaluate(loss);
      p->value[k] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad[k] * (1.0 + options.corrupt);
      diff2 += (analytic - numeric) * (analytic - numeric);
      a2 += analytic * analytic;
      n2 += numeric * numeric;
    }
    err.checked = elements.size();
    err.analytic_norm = std::sqrt(a2);
    err.numeric_norm = std::sqrt(n2);
    const double denom = std::max(err.analytic_norm, err.numeric_norm);
    err.rel_error = denom < 1e-12 ? 0.0 : std::sqrt(diff2) / denom;
    report.max_rel_error = std::max(report.max_rel_error, err.rel_error);
    report.parameters.push_back(std::move(err));
  }
  return report;
}

}  // namespace hg
