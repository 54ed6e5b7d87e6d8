#include "higarment/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "higarment/errors.hpp"
#include "higarment/ops.hpp"
#include "higarment/synth.hpp"

namespace hg {

Tensor image_to_signed(const Image& img) {
  Tensor out = Tensor::matrix(img.pixel_count(), img.channels());
  auto px = img.pixels();
  for (std::size_t k = 0; k < px.size(); ++k) out[k] = 2.0 * px[k] - 1.0;
  return out;
}

Image signed_to_image(const Tensor& x, std::size_t width, std::size_t height, std::size_t channels) {
  if (x.size() != width * height * channels) throw DimensionError("signed_to_image: size mismatch");
  Image img(width, height, channels);
  auto px = img.pixels();
  for (std::size_t k = 0; k < px.size(); ++k) px[k] = 0.5 * (x[k] + 1.0);
  img.clamp01();
  return img;
}

Vocabulary grammar_vocabulary() { return Vocabulary::from_words(synth::grammar_words()); }

HiGarment::HiGarment(ModelConfig cfg, Vocabulary vocab, FabricDb db, std::uint64_t seed)
    : cfg_(cfg),
      vocab_(std::move(vocab)),
      db_(std::move(db)),
      lexicon_(grammar_lexicon()),
      schedule_(cfg.timesteps, cfg.beta_start, cfg.beta_end) {
  const std::size_t d = cfg_.d_model;
  Rng text_rng = Rng::derive(seed, 1);
  text_ = TextEncoder::create(store_, "text", vocab_.size(), cfg_.max_text_len, d, text_rng);
  Rng sketch_rng = Rng::derive(seed, 2);
  sketch_enc_ = ImageEncoder::create(store_, "sketch", cfg_.image_size, cfg_.patch, 1, d, sketch_rng);
  if (cfg_.use_mmse) {
    Rng fabric_rng = Rng::derive(seed, 3);
    fabric_enc_ = ImageEncoder::create(store_, "fabric_image", cfg_.image_size, cfg_.patch, 3, d, fabric_rng);
    Rng q_rng = Rng::derive(seed, 4);
    qformer_ = QFormerParams::create(store_, "qformer", cfg_.num_queries, d, q_rng);
    Rng e_rng = Rng::derive(seed, 5);
    enhancer_ = EnhancerParams::create(store_, "enhance", d, e_rng);
  }
  if (cfg_.use_hca) {
    Rng h_rng = Rng::derive(seed, 6);
    hca_ = HcaParams::create(store_, "hca", d, h_rng);
  }
  DenoiserConfig dc;
  dc.image_size = cfg_.image_size;
  dc.channels = 3;
  dc.patch = cfg_.denoiser_patch;
  dc.width1 = cfg_.denoiser_width1;
  dc.width2 = cfg_.denoiser_width2;
  dc.context_dim = d;
  dc.time_dim = cfg_.time_dim;
  Rng den_rng = Rng::derive(seed, 7);
  denoiser_ = Denoiser::create(store_, "denoiser", dc, den_rng);
  if (cfg_.freeze_denoiser)
    for (Parameter* p : denoiser_.parameters()) p->frozen = true;
}

Tensor HiGarment::embed_term(std::string_view term) const {
  std::vector<std::size_t> ids = tokenize(term, vocab_);
  if (ids.empty()) ids.push_back(Vocabulary::kUnk);
  if (ids.size() > text_.max_length()) ids.resize(text_.max_length());
  Tape tape(false);
  Tensor pooled = mean_rows(text_.encode(tape, ids)).value();
  const double n = l2_norm(pooled);
  if (!(n > 0.0) || !std::isfinite(n)) throw NumericError("term embedding has zero or non-finite norm");
  for (double& x : pooled.data()) x /= n;
  return pooled;
}

void HiGarment::refresh_fabric_keys() {
  db_.refresh_keys([this](std::string_view term) { return embed_term(term); });
}

Conditioning HiGarment::condition(Tape& tape, const Image& sketch, std::string_view prompt,
                                  std::optional<double> alpha_override) {
  if (sketch.channels() != 1 || sketch.width() != cfg_.image_size || sketch.height() != cfg_.image_size) {
    throw DimensionError("sketch must be a 1-channel " + std::to_string(cfg_.image_size) + "x" +
                         std::to_string(cfg_.image_size) + " image");
  }
  Conditioning c;
  const std::vector<std::size_t> ids = tokenize(prompt, vocab_);
  c.t = text_.encode(tape, ids);
  c.v = sketch_enc_.encode(tape, sketch);

  if (cfg_.use_mmse) {
    const auto words = split_words(prompt);
    if (!db_.empty() && !extract_fabric_label(words, db_) &&
        extract_unknown_fabric_term(words, db_, lexicon_)) {
      refresh_fabric_keys();
    }
    c.fabric = resolve_fabric(words, db_, lexicon_, [this](std::string_view term) { return embed_term(term); });
    if (c.fabric.entry) {
      Var label = text_.encode(tape, tokenize(c.fabric.canonical, vocab_));
      Var image_tokens = fabric_enc_.encode(tape, c.fabric.entry->image);
      Var fs = qformer_self(tape.parameter(*qformer_.queries), label, qformer_);
      c.f = qformer_cross(fs, image_tokens, qformer_);
    }
    c.v_enh = enhance_visual(c.v, c.t, c.f, enhancer_);
    c.t_enh = enhance_text(c.t, c.v, c.f, enhancer_);
  } else {
    c.v_enh = c.v;
    c.t_enh = c.t;
  }

  c.s = cfg_.cosine_source == CosineSource::kRaw ? cosine_sim(c.v, c.t) : cosine_sim(c.v_enh, c.t_enh);
  if (cfg_.detach_alpha) c.s = detach(c.s);

  if (cfg_.use_hca) {
    if (alpha_override) {
      if (!(*alpha_override > 0.0 && *alpha_override <= 1.0)) {
        throw ValidationError("alpha override must lie in (0, 1]");
      }
      c.alpha = tape.constant(Tensor::scalar(*alpha_override));
    } else {
      c.alpha = alpha_weight(c.s, cfg_.lambda);
    }
    c.z = hca_forward(c.v_enh, c.t_enh, c.alpha, hca_, &c.hca_weights);
  } else {
    c.alpha = tape.constant(Tensor::scalar(1.0));
    c.z = c.v_enh;
  }
  c.context = concat_rows({c.z, c.t_enh});
  return c;
}

Var HiGarment::predict_noise(Tape& tape, const Var& x_t, std::size_t t, const Var& context,
                             std::vector<Tensor>* attention) const {
  return denoiser_.forward(tape, x_t, t, context, attention);
}

Var HiGarment::item_loss(Tape& tape, const Image& sketch, std::string_view prompt, const Image& target,
                         std::size_t t, const Tensor& noise) {
  if (target.channels() != 3 || target.width() != cfg_.image_size || target.height() != cfg_.image_size) {
    throw DimensionError("target must be a 3-channel " + std::to_string(cfg_.image_size) + "x" +
                         std::to_string(cfg_.image_size) + " image");
  }
  const Tensor x0 = image_to_signed(target);
  const Tensor xt = forward_noise(x0, t, noise, schedule_);
  Conditioning c = condition(tape, sketch, prompt);
  Var pred = predict_noise(tape, tape.constant(xt), t, c.context);
  return mse(pred, tape.constant(noise));
}

Image HiGarment::sample(const Image& sketch, std::string_view prompt, std::uint64_t seed, std::size_t steps,
                        std::optional<double> alpha_override, SampleTrace* trace) {
  Tape ctape(false);
  Conditioning c = condition(ctape, sketch, prompt, alpha_override);
  const Tensor context = c.context.value();
  require_finite(context, "conditioning context");

  const std::size_t n = cfg_.image_size;
  Rng rng(seed);
  Tensor x = Tensor::matrix(n * n, 3);
  for (double& v : x.data()) v = rng.normal();

  const auto ts = ddim_timesteps(schedule_.steps(), steps);
  std::vector<Tensor> maps;
  std::size_t evals = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const bool last = i + 1 == ts.size();
    Tape tape(false);
    Var eps = predict_noise(tape, tape.constant(x), ts[i], tape.constant(context), last ? &maps : nullptr);
    ++evals;
    require_finite(eps.value(), "denoiser output");
    x = ddim_step(x, eps.value(), ts[i], last ? 0 : ts[i + 1], schedule_);
  }

  if (trace) {
    trace->s = c.s.value()[0];
    trace->alpha = c.alpha.value()[0];
    trace->z_norm = l2_norm(c.z.value());
    trace->denoiser_evals = evals;
    trace->context_tokens = context.rows();
    trace->fabric = c.fabric;
    trace->attention = std::move(maps);
    const std::size_t side = n / cfg_.denoiser_patch;
    trace->attention_grid = {side, side / 2};
  }
  return signed_to_image(x, n, n, 3);
}

std::vector<double> train(HiGarment& model, const std::vector<TrainItem>& items, const TrainOptions& opt) {
  if (items.empty()) throw ValidationError("training needs at least one item");
  if (opt.batch == 0) throw ValidationError("batch size must be positive");
  ParameterStore& store = model.params();
  AdamW adam(opt.adam);
  adam.init(store);

  Rng order_rng(Rng::derive_seed(opt.seed, std::string_view("order")));
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  auto next_index = [&]() {
    if (cursor == order.size()) {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
      cursor = 0;
    }
    return order[cursor++];
  };

  const std::size_t T = model.schedule().steps();
  const std::size_t pixels = model.config().image_size * model.config().image_size;
  std::vector<double> losses;
  losses.reserve(opt.steps);
  for (std::size_t step = 0; step < opt.steps; ++step) {
    Rng noise_rng = Rng::derive(Rng::derive_seed(opt.seed, std::string_view("noise")), step);
    Tape tape(true);
    Var total;
    for (std::size_t b = 0; b < opt.batch; ++b) {
      const TrainItem& it = items[next_index()];
      const std::size_t t = 1 + static_cast<std::size_t>(noise_rng.below(T));
      Tensor noise = Tensor::matrix(pixels, 3);
      for (double& v : noise.data()) v = noise_rng.normal();
      Var l = model.item_loss(tape, *it.sketch, it.prompt, *it.target, t, noise);
      total = b == 0 ? l : add(total, l);
    }
    Var loss = scale(total, 1.0 / static_cast<double>(opt.batch));
    const double value = loss.value()[0];
    if (!std::isfinite(value)) {
      throw NumericError("training loss is not finite at step " + std::to_string(step));
    }
    store.zero_grad();
    tape.backward(loss);
    adam.step(store);
    losses.push_back(value);
    if (opt.on_step) opt.on_step(step, value);
  }
  return losses;
}

double evaluation_loss(HiGarment& model, const std::vector<TrainItem>& items, std::size_t per_item,
                       std::uint64_t seed) {
  if (items.empty() || per_item == 0) throw ValidationError("evaluation needs items and timesteps");
  const std::size_t T = model.schedule().steps();
  if (per_item > T) throw ValidationError("more evaluation timesteps than diffusion steps");
  const std::size_t pixels = model.config().image_size * model.config().image_size;
  double total = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t k = 0; k < per_item; ++k) {
      const std::size_t t = 1 + (2 * k + 1) * T / (2 * per_item);
      Rng rng = Rng::derive(seed, i * per_item + k);
      Tensor noise = Tensor::matrix(pixels, 3);
      for (double& v : noise.data()) v = rng.normal();
      Tape tape(false);
      total += model.item_loss(tape, *items[i].sketch, items[i].prompt, *items[i].target, std::min(t, T), noise)
                   .value()[0];
    }
  }
  const double mean = total / static_cast<double>(items.size() * per_item);
  if (!std::isfinite(mean)) throw NumericError("evaluation loss is not finite");
  return mean;
}

}  // namespace hg
