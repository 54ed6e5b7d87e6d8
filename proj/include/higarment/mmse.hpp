#pragma once

#include <optional>
#include <string>

#include "higarment/attention.hpp"
#include "higarment/autograd.hpp"
#include "higarment/rng.hpp"

namespace hg {

// Learned query tokens plus one self-attention and one cross-attention block.
struct QFormerParams {
  Parameter* queries = nullptr;  // [N_q x d]
  Parameter* wq_s = nullptr;
  Parameter* wk_s = nullptr;
  Parameter* wv_s = nullptr;
  Parameter* wq_c = nullptr;
  Parameter* wk_c = nullptr;
  Parameter* wv_c = nullptr;

  static QFormerParams create(ParameterStore& store, const std::string& prefix, std::size_t num_queries,
                              std::size_t d, Rng& rng);
  std::size_t num_queries() const { return queries->value.rows(); }
};

// Query projections per side; the key and value projections are shared.
struct EnhancerParams {
  Parameter* wq_visual = nullptr;
  Parameter* wq_text = nullptr;
  Parameter* wk = nullptr;
  Parameter* wv = nullptr;

  static EnhancerParams create(ParameterStore& store, const std::string& prefix, std::size_t d, Rng& rng);
};

// f_s = Softmax([q;l]Wq ([q;l]Wk)^T / sqrt(d)) [q;l]Wv, queries first.
// Throws DimensionError when l has no rows.
Var qformer_self(const Var& queries, const Var& label, const QFormerParams& p);
// f = Softmax(f_s Wq (i Wk)^T / sqrt(d)) i Wv. Throws DimensionError when i
// has no rows.
Var qformer_cross(const Var& fs, const Var& image_tokens, const QFormerParams& p);

// v' = v + Attention(v Wq_v, [t; f] Wk, [t; f] Wv); f may be absent.
Var enhance_visual(const Var& v, const Var& t, const std::optional<Var>& f, const EnhancerParams& p);
// t' = t + Attention(t Wq_t, [v; f] Wk, [v; f] Wv).
Var enhance_text(const Var& t, const Var& v, const std::optional<Var>& f, const EnhancerParams& p);

}  // namespace hg
