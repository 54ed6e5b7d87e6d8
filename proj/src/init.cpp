#include "higarment/init.hpp"

#include <cmath>

namespace hg {

Tensor normal_tensor(std::size_t rows, std::size_t cols, double std, Rng& rng) {
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.data()) v = std * rng.normal();
  return t;
}

Tensor xavier_normal(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  return normal_tensor(fan_in, fan_out, std::sqrt(2.0 / static_cast<double>(fan_in + fan_out)), rng);
}

}  // namespace hg
