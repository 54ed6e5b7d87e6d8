#include "higarment/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "higarment/errors.hpp"
#include "higarment/grid.hpp"
#include "higarment/init.hpp"
#include "higarment/ops.hpp"

namespace hg {

NoiseSchedule::NoiseSchedule(std::size_t steps, double beta_start, double beta_end) : steps_(steps) {
  if (steps == 0) throw ValidationError("noise schedule needs at least one step");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ValidationError("noise schedule needs 0 < beta_start <= beta_end < 1");
  }
  beta_.assign(steps + 1, 0.0);
  alpha_bar_.assign(steps + 1, 1.0);
  for (std::size_t t = 1; t <= steps; ++t) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(steps - 1);
    beta_[t] = beta_start + (beta_end - beta_start) * frac;
    alpha_bar_[t] = alpha_bar_[t - 1] * (1.0 - beta_[t]);
  }
}

void NoiseSchedule::check(std::size_t t, std::size_t lo) const {
  if (t < lo || t > steps_) {
    throw ValidationError("timestep " + std::to_string(t) + " outside [" + std::to_string(lo) + ", " +
                          std::to_string(steps_) + "]");
  }
}

double NoiseSchedule::beta(std::size_t t) const {
  check(t, 1);
  return beta_[t];
}

double NoiseSchedule::alpha_bar(std::size_t t) const {
  check(t, 0);
  return alpha_bar_[t];
}

double NoiseSchedule::sqrt_alpha_bar(std::size_t t) const { return std::sqrt(alpha_bar(t)); }

double NoiseSchedule::sqrt_one_minus_alpha_bar(std::size_t t) const {
  return std::sqrt(1.0 - alpha_bar(t));
}

Tensor forward_noise(const Tensor& x0, std::size_t t, const Tensor& eps, const NoiseSchedule& schedule) {
  if (!x0.same_shape(eps)) {
    throw DimensionError("forward_noise: x0 " + shape_to_string(x0.shape()) + " vs noise " +
                         shape_to_string(eps.shape()));
  }
  const double a = schedule.sqrt_alpha_bar(t);
  const double b = schedule.sqrt_one_minus_alpha_bar(t);
  Tensor out(x0.shape());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = a * x0[k] + b * eps[k];
  return out;
}

std::vector<std::size_t> ddim_timesteps(std::size_t T, std::size_t n) {
  if (n == 0 || n > T) {
    throw ValidationError("DDIM needs between 1 and " + std::to_string(T) + " steps, got " +
                          std::to_string(n));
  }
  std::vector<std::size_t> ts;
  ts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ts.push_back(T - (i * T) / n);
  return ts;
}

Tensor ddim_step(const Tensor& x_t, const Tensor& eps_hat, std::size_t t, std::size_t t_prev,
                 const NoiseSchedule& schedule) {
  if (!x_t.same_shape(eps_hat)) throw DimensionError("ddim_step: shape mismatch");
  if (t_prev >= t) throw ValidationError("ddim_step: t_prev must be below t");
  const double sa = schedule.sqrt_alpha_bar(t), sb = schedule.sqrt_one_minus_alpha_bar(t);
  const double pa = schedule.sqrt_alpha_bar(t_prev), pb = schedule.sqrt_one_minus_alpha_bar(t_prev);
  Tensor out(x_t.shape());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double x0 = std::clamp((x_t[k] - sb * eps_hat[k]) / sa, -1.0, 1.0);
    out[k] = pa * x0 + pb * eps_hat[k];
  }
  return out;
}

Tensor timestep_features(std::size_t t, std::size_t dim) {
  Tensor out = Tensor::matrix(1, dim);
  const std::size_t half = dim / 2;
  for (std::size_t k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
    const double arg = static_cast<double>(t) * freq;
    out[k] = std::sin(arg);
    out[half + k] = std::cos(arg);
  }
  return out;
}

Parameter* Denoiser::register_param(ParameterStore& store, const std::string& name, Tensor init) {
  Parameter* p = &store.add(name, std::move(init));
  params_.push_back(p);
  return p;
}

Denoiser::Block Denoiser::make_block(ParameterStore& store, const std::string& prefix, std::size_t width,
                                     bool xattn, Rng& rng) {
  const std::size_t hidden = cfg_.width2;
  Block b;
  b.conv = register_param(store, prefix + ".conv", normal_tensor(9, width, 1.0 / 3.0, rng));
  b.film_scale = register_param(store, prefix + ".film_scale", normal_tensor(hidden, width, 0.02, rng));
  b.film_shift = register_param(store, prefix + ".film_shift", normal_tensor(hidden, width, 0.02, rng));
  b.w1 = register_param(store, prefix + ".mlp.w1", xavier_normal(width, 2 * width, rng));
  b.b1 = register_param(store, prefix + ".mlp.b1", Tensor::matrix(1, 2 * width));
  b.w2 = register_param(store, prefix + ".mlp.w2", xavier_normal(2 * width, width, rng));
  b.b2 = register_param(store, prefix + ".mlp.b2", Tensor::matrix(1, width));
  if (xattn) {
    b.xattn = make_attention_params(store, prefix + ".xattn", width, cfg_.context_dim, width, true, rng);
    for (Parameter* p : {b.xattn->wq, b.xattn->wk, b.xattn->wv, b.xattn->wo}) params_.push_back(p);
  }
  return b;
}

Denoiser Denoiser::create(ParameterStore& store, const std::string& prefix, const DenoiserConfig& cfg,
                          Rng& rng) {
  if (cfg.patch == 0 || cfg.image_size % (2 * cfg.patch) != 0) {
    throw ValidationError("denoiser patch size must divide image_size / 2");
  }
  Denoiser d;
  d.cfg_ = cfg;
  const std::size_t side = cfg.image_size / cfg.patch;
  const std::size_t pin = cfg.patch * cfg.patch * cfg.channels;
  const std::size_t w1 = cfg.width1, w2 = cfg.width2;
  d.in_w_ = d.register_param(store, prefix + ".in.w", xavier_normal(pin, w1, rng));
  d.in_b_ = d.register_param(store, prefix + ".in.b", Tensor::matrix(1, w1));
  d.pos_ = d.register_param(store, prefix + ".pos", normal_tensor(side * side, w1, 0.1, rng));
  d.time_w_ = d.register_param(store, prefix + ".time.w", xavier_normal(cfg.time_dim, w2, rng));
  d.time_b_ = d.register_param(store, prefix + ".time.b", Tensor::matrix(1, w2));
  d.level1_ = d.make_block(store, prefix + ".level1", w1, true, rng);
  d.down_w_ = d.register_param(store, prefix + ".down.w", xavier_normal(4 * w1, w2, rng));
  d.down_b_ = d.register_param(store, prefix + ".down.b", Tensor::matrix(1, w2));
  d.level2_ = d.make_block(store, prefix + ".level2", w2, true, rng);
  d.up_w_ = d.register_param(store, prefix + ".up.w", xavier_normal(w2, 4 * w1, rng));
  d.up_b_ = d.register_param(store, prefix + ".up.b", Tensor::matrix(1, 4 * w1));
  d.up1_ = d.make_block(store, prefix + ".up1", w1, false, rng);
  d.out_w_ = d.register_param(store, prefix + ".out.w", xavier_normal(w1, pin, rng));
  d.out_b_ = d.register_param(store, prefix + ".out.b", Tensor::matrix(1, pin));
  d.skip_w_ = d.register_param(store, prefix + ".skip.w", normal_tensor(w2, pin, 0.01, rng));
  d.skip_b_ = d.register_param(store, prefix + ".skip.b", Tensor::matrix(1, pin));
  return d;
}

Var Denoiser::run_block(const Block& b, const Var& h, std::size_t side, const Var& temb,
                        const Var& context, std::vector<Tensor>* attention) const {
  Tape& t = h.tape();
  Var a = depthwise_conv3x3(h, t.parameter(*b.conv), side, side);
  Var gain = add_scalar(matmul(temb, t.parameter(*b.film_scale)), 1.0);
  Var shift = matmul(temb, t.parameter(*b.film_shift));
  a = add_row(mul_row(layer_norm_rows(a), gain), shift);
  a = silu(add_row(matmul(a, t.parameter(*b.w1)), t.parameter(*b.b1)));
  a = add_row(matmul(a, t.parameter(*b.w2)), t.parameter(*b.b2));
  Var out = add(h, a);
  if (b.xattn) {
    Tensor weights;
    out = add(out, attend(*b.xattn, layer_norm_rows(out), context, attention ? &weights : nullptr));
    if (attention) attention->push_back(std::move(weights));
  }
  return out;
}

Var Denoiser::forward(Tape& tape, const Var& x_t, std::size_t t, const Var& context,
                      std::vector<Tensor>* attention) const {
  const std::size_t n = cfg_.image_size;
  if (x_t.rows() != n * n || x_t.cols() != cfg_.channels) {
    throw DimensionError("denoiser input must be [" + std::to_string(n * n) + " x " +
                         std::to_string(cfg_.channels) + "]");
  }
  if (context.cols() != cfg_.context_dim) throw DimensionError("denoiser context width mismatch");
  const std::size_t side = n / cfg_.patch;

  Var temb = tape.constant(timestep_features(t, cfg_.time_dim));
  temb = silu(add_row(matmul(temb, tape.parameter(*time_w_)), tape.parameter(*time_b_)));

  Var xp = patchify(x_t, n, n, cfg_.patch);
  Var h = add(add_row(matmul(xp, tape.parameter(*in_w_)), tape.parameter(*in_b_)), tape.parameter(*pos_));
  Var h1 = run_block(level1_, h, side, temb, context, attention);

  Var h2 = patchify(h1, side, side, 2);
  h2 = add_row(matmul(h2, tape.parameter(*down_w_)), tape.parameter(*down_b_));
  h2 = run_block(level2_, h2, side / 2, temb, context, attention);

  Var u = add_row(matmul(h2, tape.parameter(*up_w_)), tape.parameter(*up_b_));
  u = add(unpatchify(u, side, side, 2), h1);
  u = run_block(up1_, u, side, temb, context, nullptr);

  Var out = add_row(matmul(layer_norm_rows(u), tape.parameter(*out_w_)), tape.parameter(*out_b_));
  Var skip = add(matmul(temb, tape.parameter(*skip_w_)), tape.parameter(*skip_b_));
  out = add(out, mul_row(xp, skip));
  return unpatchify(out, n, n, cfg_.patch);
}

}  // namespace hg
