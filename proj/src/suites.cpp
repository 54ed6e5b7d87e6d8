#include "higarment/suites.hpp"

#include <algorithm>
#include <memory>

#include "higarment/diffusion.hpp"
#include "higarment/errors.hpp"
#include "higarment/fabric_db.hpp"
#include "higarment/hca.hpp"
#include "higarment/init.hpp"
#include "higarment/mmse.hpp"
#include "higarment/model.hpp"
#include "higarment/ops.hpp"
#include "higarment/synth.hpp"

namespace hg {

namespace {

constexpr std::size_t kWidth = 8;
constexpr std::uint64_t kSeed = 20240611;

// sum(out * probe) for a fixed random probe, so every output element matters.
Var probe_loss(const Var& out, std::uint64_t seed) {
  Rng rng(seed);
  return sum(hadamard(out, out.tape().constant(normal_tensor(out.rows(), out.cols(), 1.0, rng))));
}

GradCheckOptions options(double corrupt) {
  GradCheckOptions o;
  o.corrupt = corrupt;
  o.seed = kSeed;
  return o;
}

SuiteResult mmse_suite(double corrupt) {
  ParameterStore store;
  Rng rng(kSeed);
  QFormerParams q = QFormerParams::create(store, "qformer", 2, kWidth, rng);
  EnhancerParams e = EnhancerParams::create(store, "enhance", kWidth, rng);
  Parameter& v = store.add("input.v", normal_tensor(4, kWidth, 1.0, rng));
  Parameter& t = store.add("input.t", normal_tensor(3, kWidth, 1.0, rng));
  Parameter& l = store.add("input.label", normal_tensor(1, kWidth, 1.0, rng));
  Parameter& i = store.add("input.image", normal_tensor(4, kWidth, 1.0, rng));
  auto loss = [&](Tape& tape) {
    Var vv = tape.parameter(v), tt = tape.parameter(t);
    Var fs = qformer_self(tape.parameter(*q.queries), tape.parameter(l), q);
    Var f = qformer_cross(fs, tape.parameter(i), q);
    Var ve = enhance_visual(vv, tt, f, e);
    Var te = enhance_text(tt, vv, f, e);
    return add(add(probe_loss(ve, 1), probe_loss(te, 2)), probe_loss(f, 3));
  };
  return {"mmse", kBlockTolerance, grad_check(loss, store.all(), options(corrupt))};
}

SuiteResult hca_suite(double corrupt) {
  ParameterStore store;
  Rng rng(kSeed + 1);
  HcaParams h = HcaParams::create(store, "hca", kWidth, rng);
  Parameter& v = store.add("input.v", normal_tensor(4, kWidth, 1.0, rng));
  Parameter& t = store.add("input.t", normal_tensor(3, kWidth, 1.0, rng));
  auto loss = [&](Tape& tape) {
    Var vv = tape.parameter(v), tt = tape.parameter(t);
    Var a = alpha_weight(cosine_sim(vv, tt), kDefaultLambda);
    return probe_loss(hca_forward(vv, tt, a, h), 4);
  };
  return {"hca", kBlockTolerance, grad_check(loss, store.all(), options(corrupt))};
}

SuiteResult denoiser_suite(double corrupt) {
  ParameterStore store;
  Rng rng(kSeed + 2);
  DenoiserConfig cfg;
  cfg.image_size = 8;
  cfg.patch = 2;
  cfg.width1 = 4;
  cfg.width2 = 8;
  cfg.context_dim = kWidth;
  cfg.time_dim = 8;
  Denoiser d = Denoiser::create(store, "denoiser", cfg, rng);
  const Tensor x = normal_tensor(64, 3, 1.0, rng);
  const Tensor ctx = normal_tensor(5, kWidth, 1.0, rng);
  const Tensor target = normal_tensor(64, 3, 1.0, rng);
  auto loss = [&](Tape& tape) {
    Var out = d.forward(tape, tape.constant(x), 37, tape.constant(ctx));
    return mse(out, tape.constant(target));
  };
  return {"denoiser", kBlockTolerance, grad_check(loss, store.all(), options(corrupt))};
}

SuiteResult full_suite(double corrupt) {
  ModelConfig cfg;
  cfg.image_size = 8;
  cfg.d_model = kWidth;
  cfg.patch = 4;
  cfg.num_queries = 2;
  cfg.max_text_len = 12;
  cfg.denoiser_patch = 2;
  cfg.denoiser_width1 = 4;
  cfg.denoiser_width2 = 8;
  cfg.time_dim = 8;
  HiGarment model(cfg, grammar_vocabulary(), grammar_fabric_db(8, kSeed), kSeed);
  synth::GarmentSpec spec;
  spec.color = 0;
  spec.fabric = *synth::find_fabric("denim");
  spec.fabric_term = "jeans";
  spec.components = static_cast<std::uint8_t>(synth::Component::kPocket);
  spec.sketch_color = 5;
  const synth::Sample s = synth::render_sample(spec, 8, kSeed);
  Rng rng(kSeed + 3);
  const Tensor noise = normal_tensor(64, 3, 1.0, rng);
  auto loss = [&](Tape& tape) { return model.item_loss(tape, s.sketch, s.caption, s.target, 500, noise); };
  return {"full", kChainTolerance, grad_check(loss, model.params().all(), options(corrupt))};
}

}  // namespace

const std::vector<std::string>& gradcheck_suite_names() {
  static const std::vector<std::string> names = {"mmse", "hca", "denoiser", "full"};
  return names;
}

std::vector<SuiteResult> run_gradcheck_suites(std::string_view module, double corrupt) {
  std::vector<SuiteResult> out;
  const bool all = module == "all";
  if (!all && std::find(gradcheck_suite_names().begin(), gradcheck_suite_names().end(), module) ==
                  gradcheck_suite_names().end()) {
    throw ValidationError("unknown gradcheck module '" + std::string(module) + "'");
  }
  if (all || module == "mmse") out.push_back(mmse_suite(corrupt));
  if (all || module == "hca") out.push_back(hca_suite(corrupt));
  if (all || module == "denoiser") out.push_back(denoiser_suite(corrupt));
  if (all || module == "full") out.push_back(full_suite(corrupt));
  return out;
}

}  // namespace hg
