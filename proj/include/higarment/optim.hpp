#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "higarment/autograd.hpp"

namespace hg {

struct AdamWConfig {
  double lr = 1e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// AdamW with decoupled weight decay: each step first scales the value by
// (1 - lr * wd), then applies the bias-corrected Adam update. Moments are
// never touched by the decay term.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  // Allocates zero moments for every non-frozen parameter of `store`.
  void init(ParameterStore& store);
  bool initialized() const { return initialized_; }

  // One update over all parameters registered at init(). Throws
  // ValidationError if init() was not called.
  void step(ParameterStore& store);

  std::uint64_t step_count() const { return step_; }
  const AdamWConfig& config() const { return config_; }

 private:
  struct Moments {
    Tensor m;
    Tensor v;
  };

  AdamWConfig config_;
  std::map<std::string, Moments> moments_;
  std::uint64_t step_ = 0;
  bool initialized_ = false;
};

}  // namespace hg
