#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "higarment/attention.hpp"
#include "higarment/autograd.hpp"
#include "higarment/rng.hpp"
#include "higarment/tensor.hpp"

namespace hg {

// Linear beta schedule over t = 1..T with alpha_bar(0) = 1.
class NoiseSchedule {
 public:
  explicit NoiseSchedule(std::size_t steps = 1000, double beta_start = 1e-4, double beta_end = 0.02);

  std::size_t steps() const { return steps_; }
  double beta(std::size_t t) const;       // t in 1..T
  double alpha_bar(std::size_t t) const;  // t in 0..T
  double sqrt_alpha_bar(std::size_t t) const;
  double sqrt_one_minus_alpha_bar(std::size_t t) const;

 private:
  void check(std::size_t t, std::size_t lo) const;

  std::size_t steps_;
  std::vector<double> beta_;       // index t, beta_[0] unused
  std::vector<double> alpha_bar_;  // index t
};

// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps. Throws
// ValidationError for t > T and DimensionError on shape mismatch.
Tensor forward_noise(const Tensor& x0, std::size_t t, const Tensor& eps, const NoiseSchedule& schedule);

// Uniform descending sub-schedule T, T - T/n, ..., T/n. Throws
// ValidationError unless 1 <= n <= T.
std::vector<std::size_t> ddim_timesteps(std::size_t T, std::size_t n);

// One deterministic (eta = 0) DDIM update from t to t_prev. The predicted x0
// is clipped to [-1, 1].
Tensor ddim_step(const Tensor& x_t, const Tensor& eps_hat, std::size_t t, std::size_t t_prev,
                 const NoiseSchedule& schedule);

struct DenoiserConfig {
  std::size_t image_size = 32;
  std::size_t channels = 3;
  std::size_t patch = 2;
  std::size_t width1 = 32;
  std::size_t width2 = 128;
  std::size_t context_dim = 64;
  std::size_t time_dim = 32;
};

// Two-level token network: patch embedding, a residual block with
// cross-attention at each level (2x2 merge in between), one up block with a
// skip from level 1, and a linear unpatchify head. Blocks mix space with a
// depthwise 3x3 convolution and take the timestep through FiLM.
class Denoiser {
 public:
  static Denoiser create(ParameterStore& store, const std::string& prefix, const DenoiserConfig& cfg,
                         Rng& rng);

  const DenoiserConfig& config() const { return cfg_; }
  std::size_t cross_attention_layers() const { return 2; }

  // x_t is [size*size x channels] in row-major pixel order; context is
  // [L x context_dim]. Returns the noise prediction with the shape of x_t.
  // When `attention` is set it receives one [queries x L] map per
  // cross-attention layer.
  Var forward(Tape& tape, const Var& x_t, std::size_t t, const Var& context,
              std::vector<Tensor>* attention = nullptr) const;

  std::vector<Parameter*> parameters() const { return params_; }

 private:
  struct Block {
    Parameter* conv = nullptr;  // [9 x w]
    Parameter* film_scale = nullptr;
    Parameter* film_shift = nullptr;
    Parameter* w1 = nullptr;
    Parameter* b1 = nullptr;
    Parameter* w2 = nullptr;
    Parameter* b2 = nullptr;
    std::optional<AttentionParams> xattn;
  };

  Block make_block(ParameterStore& store, const std::string& prefix, std::size_t width, bool xattn,
                   Rng& rng);
  Var run_block(const Block& b, const Var& h, std::size_t side, const Var& temb, const Var& context,
                std::vector<Tensor>* attention) const;
  Parameter* register_param(ParameterStore& store, const std::string& name, Tensor init);

  DenoiserConfig cfg_;
  Parameter* in_w_ = nullptr;
  Parameter* in_b_ = nullptr;
  Parameter* pos_ = nullptr;
  Parameter* time_w_ = nullptr;
  Parameter* time_b_ = nullptr;
  Parameter* down_w_ = nullptr;
  Parameter* down_b_ = nullptr;
  Parameter* up_w_ = nullptr;
  Parameter* up_b_ = nullptr;
  Parameter* out_w_ = nullptr;
  Parameter* out_b_ = nullptr;
  Parameter* skip_w_ = nullptr;  // time-dependent gain on the noisy input
  Parameter* skip_b_ = nullptr;
  Block level1_, level2_, up1_;
  std::vector<Parameter*> params_;
};

// Sinusoidal features [1 x dim] of the timestep.
Tensor timestep_features(std::size_t t, std::size_t dim);

}  // namespace hg
