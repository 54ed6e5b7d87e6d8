#include "higarment/optim.hpp"

#include <cmath>

#include "higarment/errors.hpp"

namespace hg {

void AdamW::init(ParameterStore& store) {
  moments_.clear();
  for (Parameter* p : store.all()) {
    if (p->frozen) continue;
    moments_.emplace(p->name, Moments{Tensor(p->value.shape()), Tensor(p->value.shape())});
  }
  step_ = 0;
  initialized_ = true;
}

void AdamW::step(ParameterStore& store) {
  if (!initialized_) throw ValidationError("AdamW::step called before init()");
  ++step_;
  const auto& c = config_;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step_));
  const double decay = 1.0 - c.lr * c.weight_decay;
  for (auto& [name, mom] : moments_) {
    Parameter& p = store.at(name);
    if (!p.grad.same_shape(p.value) || !mom.m.same_shape(p.value)) {
      throw DimensionError("AdamW: moment/gradient shape mismatch for " + name);
    }
    auto w = p.value.data();
    auto g = p.grad.data();
    auto m = mom.m.data();
    auto v = mom.v.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] *= decay;
      w[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

}  // namespace hg
