#include "higarment/attention.hpp"

#include <cmath>

#include "higarment/errors.hpp"
#include "higarment/init.hpp"

namespace hg {

AttentionParams make_attention_params(ParameterStore& store, const std::string& prefix,
                                      std::size_t in_q, std::size_t in_kv, std::size_t width,
                                      bool with_output, Rng& rng) {
  AttentionParams p;
  p.wq = &store.add(prefix + ".wq", xavier_normal(in_q, width, rng));
  p.wk = &store.add(prefix + ".wk", xavier_normal(in_kv, width, rng));
  p.wv = &store.add(prefix + ".wv", xavier_normal(in_kv, width, rng));
  if (with_output) p.wo = &store.add(prefix + ".wo", xavier_normal(width, width, rng));
  return p;
}

Var sdpa(const Var& q, const Var& k, const Var& v, Tensor* weights) {
  if (k.rows() == 0) throw DimensionError("sdpa: empty key/value context");
  if (k.rows() != v.rows()) {
    throw DimensionError("sdpa: " + std::to_string(k.rows()) + " keys but " +
                         std::to_string(v.rows()) + " values");
  }
  if (q.cols() != k.cols()) {
    throw DimensionError("sdpa: query width " + std::to_string(q.cols()) + " vs key width " +
                         std::to_string(k.cols()));
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Var attn = softmax_rows(scale(matmul_nt(q, k), inv_sqrt_d));
  if (weights) *weights = attn.value();
  return matmul(attn, v);
}

Var attend(const AttentionParams& params, const Var& x_q, const Var& context, Tensor* weights) {
  Tape& t = x_q.tape();
  Var q = matmul(x_q, t.parameter(*params.wq));
  Var k = matmul(context, t.parameter(*params.wk));
  Var v = matmul(context, t.parameter(*params.wv));
  Var out = sdpa(q, k, v, weights);
  if (params.wo) out = matmul(out, t.parameter(*params.wo));
  return out;
}

}  // namespace hg
