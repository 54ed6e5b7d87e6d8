#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "higarment/autograd.hpp"
#include "higarment/config.hpp"
#include "higarment/diffusion.hpp"
#include "higarment/encoders.hpp"
#include "higarment/fabric_db.hpp"
#include "higarment/hca.hpp"
#include "higarment/image.hpp"
#include "higarment/mmse.hpp"
#include "higarment/optim.hpp"

namespace hg {

// Everything produced between the raw inputs and the denoiser.
struct Conditioning {
  Var v;      // sketch tokens
  Var t;      // prompt tokens
  Var v_enh;  // v'
  Var t_enh;  // t'
  std::optional<Var> f;  // fused fabric tokens, absent on the no-fabric path
  Var s;      // 1x1 cosine
  Var alpha;  // 1x1
  Var z;
  Var context;  // [z; t']
  FabricResolution fabric;
  Tensor hca_weights;
};

struct SampleTrace {
  double s = 0.0;
  double alpha = 0.0;
  double z_norm = 0.0;
  std::size_t denoiser_evals = 0;
  std::size_t context_tokens = 0;
  FabricResolution fabric;
  // One [queries x context] map per denoiser cross-attention layer, taken at
  // the last sampling step.
  std::vector<Tensor> attention;
  std::vector<std::size_t> attention_grid;  // side length of each map's query grid
};

class HiGarment {
 public:
  HiGarment(ModelConfig cfg, Vocabulary vocab, FabricDb db, std::uint64_t seed);
  HiGarment(const HiGarment&) = delete;
  HiGarment& operator=(const HiGarment&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }
  const Vocabulary& vocab() const { return vocab_; }
  const FabricDb& db() const { return db_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  const Denoiser& denoiser() const { return denoiser_; }

  // Mean-pooled, L2-normalised text embedding of a term (no gradient).
  Tensor embed_term(std::string_view term) const;
  // Recomputes the fabric keys from the current text encoder.
  void refresh_fabric_keys();

  // Encoders, fabric path, MMSE, cosine gate and HCA on `tape`.
  // `alpha_override` replaces the gated alpha.
  Conditioning condition(Tape& tape, const Image& sketch, std::string_view prompt,
                         std::optional<double> alpha_override = std::nullopt);

  // Noise prediction for pixel grid x_t ([size*size x 3], values in [-1, 1]).
  Var predict_noise(Tape& tape, const Var& x_t, std::size_t t, const Var& context,
                    std::vector<Tensor>* attention = nullptr) const;

  // MSE between predicted and true noise for one item with fixed t and noise.
  Var item_loss(Tape& tape, const Image& sketch, std::string_view prompt, const Image& target,
                std::size_t t, const Tensor& noise);

  // Deterministic DDIM (eta = 0) from seeded Gaussian noise; the result is
  // mapped back to [0, 1] and clamped.
  Image sample(const Image& sketch, std::string_view prompt, std::uint64_t seed, std::size_t steps,
               std::optional<double> alpha_override = std::nullopt, SampleTrace* trace = nullptr);

 private:
  std::optional<std::string> fabric_label_for(const std::vector<std::string>& words);

  ModelConfig cfg_;
  Vocabulary vocab_;
  FabricDb db_;
  PromptLexicon lexicon_;
  NoiseSchedule schedule_;
  ParameterStore store_;
  TextEncoder text_;
  ImageEncoder sketch_enc_;
  ImageEncoder fabric_enc_;
  QFormerParams qformer_;
  EnhancerParams enhancer_;
  HcaParams hca_;
  Denoiser denoiser_;
};

// Pixels in [0, 1] to a [size*size x channels] tensor in [-1, 1].
Tensor image_to_signed(const Image& img);
Image signed_to_image(const Tensor& x, std::size_t width, std::size_t height, std::size_t channels);

// Vocabulary covering the synthetic caption grammar.
Vocabulary grammar_vocabulary();

struct TrainItem {
  const Image* sketch = nullptr;
  const Image* target = nullptr;
  std::string prompt;
};

struct TrainOptions {
  AdamWConfig adam;
  std::size_t batch = 8;
  std::size_t steps = 2000;
  std::uint64_t seed = 0;
  // Called after every step with the step index and its loss.
  std::function<void(std::size_t, double)> on_step;
};

// Minibatch AdamW on the noise-prediction MSE. Batches walk a seeded
// permutation of the items, reshuffled every epoch. Returns per-step losses.
// Throws NumericError when a loss is not finite.
std::vector<double> train(HiGarment& model, const std::vector<TrainItem>& items, const TrainOptions& opt);

// Training objective on a fixed grid: every item at `per_item` evenly spaced
// timesteps with seeded noise. No gradients; deterministic for a given seed.
double evaluation_loss(HiGarment& model, const std::vector<TrainItem>& items, std::size_t per_item = 10,
                       std::uint64_t seed = 0);

}  // namespace hg
