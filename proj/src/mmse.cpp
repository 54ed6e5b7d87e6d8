#include "higarment/mmse.hpp"

#include "higarment/errors.hpp"
#include "higarment/init.hpp"
#include "higarment/ops.hpp"

namespace hg {

QFormerParams QFormerParams::create(ParameterStore& store, const std::string& prefix,
                                    std::size_t num_queries, std::size_t d, Rng& rng) {
  if (num_queries == 0) throw ValidationError("the Q-Former needs at least one query");
  QFormerParams p;
  p.queries = &store.add(prefix + ".queries", normal_tensor(num_queries, d, 0.5, rng));
  p.wq_s = &store.add(prefix + ".self.wq", xavier_normal(d, d, rng));
  p.wk_s = &store.add(prefix + ".self.wk", xavier_normal(d, d, rng));
  p.wv_s = &store.add(prefix + ".self.wv", xavier_normal(d, d, rng));
  p.wq_c = &store.add(prefix + ".cross.wq", xavier_normal(d, d, rng));
  p.wk_c = &store.add(prefix + ".cross.wk", xavier_normal(d, d, rng));
  p.wv_c = &store.add(prefix + ".cross.wv", xavier_normal(d, d, rng));
  return p;
}

EnhancerParams EnhancerParams::create(ParameterStore& store, const std::string& prefix, std::size_t d,
                                      Rng& rng) {
  EnhancerParams p;
  p.wq_visual = &store.add(prefix + ".wq_visual", xavier_normal(d, d, rng));
  p.wq_text = &store.add(prefix + ".wq_text", xavier_normal(d, d, rng));
  p.wk = &store.add(prefix + ".wk", xavier_normal(d, d, rng));
  p.wv = &store.add(prefix + ".wv", xavier_normal(d, d, rng));
  return p;
}

Var qformer_self(const Var& queries, const Var& label, const QFormerParams& p) {
  if (label.rows() == 0) throw DimensionError("qformer_self: empty label; use the no-fabric path");
  Tape& t = queries.tape();
  Var x = concat_rows({queries, label});
  return sdpa(matmul(x, t.parameter(*p.wq_s)), matmul(x, t.parameter(*p.wk_s)),
              matmul(x, t.parameter(*p.wv_s)));
}

Var qformer_cross(const Var& fs, const Var& image_tokens, const QFormerParams& p) {
  if (image_tokens.rows() == 0) throw DimensionError("qformer_cross: empty sample-image tokens");
  Tape& t = fs.tape();
  return sdpa(matmul(fs, t.parameter(*p.wq_c)), matmul(image_tokens, t.parameter(*p.wk_c)),
              matmul(image_tokens, t.parameter(*p.wv_c)));
}

namespace {

Var enhance(const Var& x, const Var& other, const std::optional<Var>& f, Parameter& wq,
            const EnhancerParams& p) {
  if (other.rows() == 0) throw DimensionError("enhance: empty context sequence");
  Tape& t = x.tape();
  Var ctx = f ? concat_rows({other, *f}) : other;
  Var attn = sdpa(matmul(x, t.parameter(wq)), matmul(ctx, t.parameter(*p.wk)),
                  matmul(ctx, t.parameter(*p.wv)));
  return add(x, attn);
}

}  // namespace

Var enhance_visual(const Var& v, const Var& t, const std::optional<Var>& f, const EnhancerParams& p) {
  return enhance(v, t, f, *p.wq_visual, p);
}

Var enhance_text(const Var& t, const Var& v, const std::optional<Var>& f, const EnhancerParams& p) {
  return enhance(t, v, f, *p.wq_text, p);
}

}  // namespace hg
