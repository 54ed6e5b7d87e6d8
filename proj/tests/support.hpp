#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "higarment/rng.hpp"
#include "higarment/tensor.hpp"

namespace hg::test {

using Rows = std::vector<std::vector<double>>;

inline Rows to_rows(const Tensor& t) {
  Rows r(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) r[i][j] = t(i, j);
  return r;
}

inline Tensor from_rows(const Rows& r) {
  Tensor t = Tensor::matrix(r.size(), r.empty() ? 0 : r[0].size());
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < r[i].size(); ++j) t(i, j) = r[i][j];
  return t;
}

// Plain loop reference implementations, kept independent of the library.
inline Rows naive_matmul(const Rows& a, const Rows& b) {
  Rows c(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Rows naive_concat(const Rows& a, const Rows& b) {
  Rows c = a;
  c.insert(c.end(), b.begin(), b.end());
  return c;
}

inline Rows naive_attention(const Rows& q, const Rows& k, const Rows& v) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q[0].size()));
  Rows out(q.size(), std::vector<double>(v[0].size(), 0.0));
  for (std::size_t i = 0; i < q.size(); ++i) {
    std::vector<double> s(k.size());
    double mx = -1e300;
    for (std::size_t j = 0; j < k.size(); ++j) {
      double d = 0;
      for (std::size_t c = 0; c < q[i].size(); ++c) d += q[i][c] * k[j][c];
      s[j] = d * scale;
      mx = std::max(mx, s[j]);
    }
    double z = 0;
    for (auto& x : s) z += (x = std::exp(x - mx));
    for (std::size_t j = 0; j < k.size(); ++j)
      for (std::size_t c = 0; c < v[0].size(); ++c) out[i][c] += s[j] / z * v[j][c];
  }
  return out;
}

inline Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor t = Tensor::matrix(r, c);
  for (auto& x : t.data()) x = rng.normal() * scale;
  return t;
}

inline double max_diff(const Rows& a, const Tensor& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) m = std::max(m, std::abs(a[i][j] - b(i, j)));
  return m;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("hg_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace hg::test
