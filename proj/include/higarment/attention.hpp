#pragma once

#include <string>

#include "higarment/autograd.hpp"
#include "higarment/ops.hpp"
#include "higarment/rng.hpp"

namespace hg {

// Ordered sequence of width-d feature vectors: a [L x d] tape value.
struct TokenSeq {
  Var tokens;

  std::size_t length() const { return tokens.rows(); }
  std::size_t width() const { return tokens.cols(); }
};

// Single-head projections. `wo` is optional (nullptr when unused).
struct AttentionParams {
  Parameter* wq = nullptr;
  Parameter* wk = nullptr;
  Parameter* wv = nullptr;
  Parameter* wo = nullptr;
};

// Registers "<prefix>.wq/.wk/.wv" (and ".wo" when requested) as
// [in_q x width], [in_kv x width], [in_kv x width], [width x width] with
// scaled Gaussian init.
AttentionParams make_attention_params(ParameterStore& store, const std::string& prefix,
                                      std::size_t in_q, std::size_t in_kv, std::size_t width,
                                      bool with_output, Rng& rng);

// Softmax(Q K^T / sqrt(width)) V, where width is the column count of Q.
// Throws DimensionError when K has no rows. When `weights` is non-null the
// [Lq x Lk] attention matrix is copied into it.
Var sdpa(const Var& q, const Var& k, const Var& v, Tensor* weights = nullptr);

// sdpa(x_q Wq, ctx Wk, ctx Wv), followed by Wo when configured.
Var attend(const AttentionParams& params, const Var& x_q, const Var& context,
           Tensor* weights = nullptr);

}  // namespace hg
