#pragma once

#include <string>

#include "higarment/attention.hpp"
#include "higarment/autograd.hpp"
#include "higarment/rng.hpp"

namespace hg {

inline constexpr double kDefaultLambda = 0.6;

// alpha = lambda + (1 - lambda) * sigmoid(s). Throws ValidationError unless
// 0 <= lambda < 1. The result stays strictly inside (lambda, 1).
double alpha_weight(double s, double lambda = kDefaultLambda);
// Differentiable form on a 1x1 node.
Var alpha_weight(const Var& s, double lambda = kDefaultLambda);

// Cosine of the mean-pooled token sequences, as a 1x1 node.
Var cosine_sim(const Var& v, const Var& t);

struct HcaParams {
  Parameter* wq = nullptr;
  Parameter* wk = nullptr;
  Parameter* wv = nullptr;

  static HcaParams create(ParameterStore& store, const std::string& prefix, std::size_t d, Rng& rng);
};

// Attention before the alpha factor:
// Softmax(Q K^T / sqrt(d)) V with Q = v'Wq, K = [v'Wk; t'Wk], V = [v'Wv; t'Wv].
Var hca_attention(const Var& v_enh, const Var& t_enh, const HcaParams& p, Tensor* weights = nullptr);
// z = alpha * hca_attention(...); alpha is a 1x1 node.
Var hca_forward(const Var& v_enh, const Var& t_enh, const Var& alpha, const HcaParams& p,
                Tensor* weights = nullptr);

}  // namespace hg
