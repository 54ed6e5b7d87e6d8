#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "higarment/autograd.hpp"

namespace hg {

// Differentiable operations on rank-2 tape values. Every op records a
// backward closure on the tape of its first argument.

Var matmul(const Var& a, const Var& b);     // a[m,k] * b[k,n]
Var matmul_nt(const Var& a, const Var& b);  // a[m,k] * b[n,k]^T

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
// a[m,n] + row[1,n] broadcast over rows.
Var add_row(const Var& a, const Var& row);
// a[m,n] * row[1,n] broadcast over rows.
Var mul_row(const Var& a, const Var& row);
Var scale(const Var& a, double factor);
// a * s where s is a 1x1 node.
Var scale(const Var& a, const Var& s);
Var add_scalar(const Var& a, double c);

// Row-wise concatenation; zero-row parts are allowed.
Var concat_rows(std::span<const Var> parts);
Var concat_rows(std::initializer_list<Var> parts);
Var slice_rows(const Var& a, std::size_t begin, std::size_t count);

// out.flat[k] = a.flat[index[k]], or 0 where index[k] < 0. The backward pass
// scatter-adds. Covers patchify, unpatchify, space-to-depth and the inverse.
using GatherIndex = std::shared_ptr<const std::vector<std::int64_t>>;
Var gather(const Var& a, std::size_t rows, std::size_t cols, GatherIndex index);
// Rows of `table` selected by `ids` (embedding lookup).
Var gather_rows(const Var& table, std::span<const std::size_t> ids);

Var softmax_rows(const Var& a);
Var sigmoid(const Var& a);
Var silu(const Var& a);
// Per-row standardisation (x - mean) / sqrt(var + eps), no affine terms.
Var layer_norm_rows(const Var& a, double eps = 1e-5);

Var sum(const Var& a);        // 1x1
Var mean(const Var& a);       // 1x1
Var mean_rows(const Var& a);  // 1xn, mean over rows
// a, b are 1xn; throws NumericError if either has zero norm.
Var cosine_similarity(const Var& a, const Var& b);
// mean((a - b)^2) over all elements.
Var mse(const Var& a, const Var& b);

// 3x3 depthwise convolution over a token grid. x is [h*w, c] in row-major
// grid order, kernel is [9, c] (tap-major), zero padding at the borders.
Var depthwise_conv3x3(const Var& x, const Var& kernel, std::size_t h, std::size_t w);

// Copies the value onto the tape as a constant (stops gradient flow).
Var detach(const Var& a);

}  // namespace hg
