#pragma once

#include <cstddef>

#include "higarment/rng.hpp"
#include "higarment/tensor.hpp"

namespace hg {

// N(0, std^2) entries.
Tensor normal_tensor(std::size_t rows, std::size_t cols, double std, Rng& rng);
// N(0, 2 / (fan_in + fan_out)).
Tensor xavier_normal(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace hg
