#include "higarment/hca.hpp"

#include <algorithm>
#include <cmath>

#include "higarment/errors.hpp"
#include "higarment/init.hpp"
#include "higarment/ops.hpp"

namespace hg {

namespace {

void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda < 1.0)) {
    throw ValidationError("lambda must lie in [0, 1), got " + std::to_string(lambda));
  }
}

}  // namespace

double alpha_weight(double s, double lambda) {
  check_lambda(lambda);
  const double sig = s >= 0.0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
  // Rounding saturates sigma for |s| beyond ~37; keep the open bounds at a
  // cost of at most one ulp.
  const double a = lambda + (1.0 - lambda) * sig;
  return std::clamp(a, std::nextafter(lambda, 1.0), std::nextafter(1.0, 0.0));
}

Var alpha_weight(const Var& s, double lambda) {
  check_lambda(lambda);
  return add_scalar(scale(sigmoid(s), 1.0 - lambda), lambda);
}

Var cosine_sim(const Var& v, const Var& t) {
  if (v.rows() == 0 || t.rows() == 0) throw DimensionError("cosine_sim: empty token sequence");
  return cosine_similarity(mean_rows(v), mean_rows(t));
}

HcaParams HcaParams::create(ParameterStore& store, const std::string& prefix, std::size_t d, Rng& rng) {
  HcaParams p;
  p.wq = &store.add(prefix + ".wq", xavier_normal(d, d, rng));
  p.wk = &store.add(prefix + ".wk", xavier_normal(d, d, rng));
  p.wv = &store.add(prefix + ".wv", xavier_normal(d, d, rng));
  return p;
}

Var hca_attention(const Var& v_enh, const Var& t_enh, const HcaParams& p, Tensor* weights) {
  if (v_enh.rows() == 0 || t_enh.rows() == 0) throw DimensionError("hca: empty v' or t'");
  Tape& t = v_enh.tape();
  Var wk = t.parameter(*p.wk);
  Var wv = t.parameter(*p.wv);
  Var q = matmul(v_enh, t.parameter(*p.wq));
  Var k = concat_rows({matmul(v_enh, wk), matmul(t_enh, wk)});
  Var v = concat_rows({matmul(v_enh, wv), matmul(t_enh, wv)});
  return sdpa(q, k, v, weights);
}

Var hca_forward(const Var& v_enh, const Var& t_enh, const Var& alpha, const HcaParams& p,
                Tensor* weights) {
  return scale(hca_attention(v_enh, t_enh, p, weights), alpha);
}

}  // namespace hg
