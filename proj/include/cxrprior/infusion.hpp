#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cxrprior/matrix.hpp"

namespace cxrprior {

using Mat = Matrix<double>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ImagePair {
  Mat frontal;
  Mat lateral;
};

// S patch-feature rows of width d.
struct VisualEmbedding {
  Mat values;
};

// T latent rows of width f.
struct LatentRepresentation {
  Mat values;
};

// Comparison prior; 0 for a first exam, 1 for a follow-up.
struct PriorScalar {
  double value = 0.0;
};

template <typename T>
concept InfusableTensor = requires(T t) {
  { t.values } -> std::same_as<Mat&>;
};

// Adds the prior to every element. Shape and identity are preserved; a zero
// prior returns the input bit for bit.
template <InfusableTensor Tensor>
Tensor infuse(Tensor tensor, PriorScalar prior) {
  // x + 0.0 would turn -0.0 into +0.0.
  if (prior.value == 0.0) return tensor;
  for (double& x : tensor.values.data()) x += prior.value;
  return tensor;
}

struct ModelConfig {
  std::size_t image_size = 16;
  std::size_t patch_size = 8;
  std::size_t embed_dim = 16;   // d, and f since the encoder is residual
  std::size_t hidden_dim = 32;  // feed-forward width
  std::size_t vocab_size = 32;

  std::size_t patches_per_view() const {
    return (image_size / patch_size) * (image_size / patch_size);
  }
  std::size_t sequence_length() const { return 2 * patches_per_view(); }  // S = T
};

inline constexpr int kBosToken = 0;
inline constexpr int kEosToken = 1;
inline constexpr std::uint64_t kDefaultSeed = 17;
inline constexpr std::size_t kDefaultMaxLen = 12;

// Every trainable tensor of the toy model. The same layout is instantiated
// with double for inference and with Dual for forward-mode derivatives.
template <typename T>
struct ModelParams {
  Matrix<T> patch_projection;  // patch pixels -> d, no bias

  Matrix<T> enc_query, enc_key, enc_value, enc_out;
  Matrix<T> enc_ff_in, enc_ff_in_bias, enc_ff_out, enc_ff_out_bias;

  Matrix<T> token_embedding;
  Matrix<T> dec_self_query, dec_self_key, dec_self_value, dec_self_out;
  Matrix<T> dec_cross_query, dec_cross_key, dec_cross_value, dec_cross_out;
  Matrix<T> dec_ff_in, dec_ff_in_bias, dec_ff_out, dec_ff_out_bias;
  Matrix<T> vocab_projection, vocab_bias;

  template <typename Self, typename Fn>
  static void visit(Self& self, Fn&& fn) {
    for (auto* m : {&self.patch_projection, &self.enc_query, &self.enc_key, &self.enc_value,
                    &self.enc_out, &self.enc_ff_in, &self.enc_ff_in_bias, &self.enc_ff_out,
                    &self.enc_ff_out_bias, &self.token_embedding, &self.dec_self_query,
                    &self.dec_self_key, &self.dec_self_value, &self.dec_self_out,
                    &self.dec_cross_query, &self.dec_cross_key, &self.dec_cross_value,
                    &self.dec_cross_out, &self.dec_ff_in, &self.dec_ff_in_bias, &self.dec_ff_out,
                    &self.dec_ff_out_bias, &self.vocab_projection, &self.vocab_bias})
      fn(*m);
  }
};

// Desk-scale encoder-decoder: linear patch extractor, one encoder block,
// one decoder block with a greedy head. Weights are a pure function of the
// seed and never depend on the prior.
class ToyModel {
 public:
  explicit ToyModel(std::uint64_t seed = kDefaultSeed, ModelConfig config = {});

  std::uint64_t seed() const { return seed_; }
  const ModelConfig& config() const { return config_; }
  const ModelParams<double>& params() const { return params_; }

  std::size_t parameter_count() const;
  // Flat view in visit order; used by the gradient check to address weights.
  double parameter(std::size_t index) const;
  ToyModel with_parameter(std::size_t index, double value) const;

  // Copy whose decoder ignores the latent (cross-attention values zeroed).
  ToyModel with_latent_path_zeroed() const;

 private:
  std::uint64_t seed_;
  ModelConfig config_;
  ModelParams<double> params_;
};

// Deterministic synthetic frontal/lateral pair.
ImagePair synthetic_images(std::uint64_t seed, std::size_t size = 16);

VisualEmbedding visual_extract(const ImagePair& images, const ToyModel& model);

// Encoder pass: sinusoidal positions added to V, then one attention +
// feed-forward block with residuals.
LatentRepresentation encode(const VisualEmbedding& visual, const ToyModel& model);

struct ForwardOptions {
  bool infuse = true;
};

struct ForwardResult {
  std::vector<int> tokens;            // generated tokens, EOS excluded
  std::vector<int> decoder_inputs;    // BOS plus every token fed back
  VisualEmbedding visual;             // V after infusion
  LatentRepresentation latent_plain;  // L before infusion
  LatentRepresentation latent;        // L after infusion
};

// X -> V -> V (+) P -> L -> L (+) P -> Y, decoding greedily for at most
// max_len tokens. Throws NumericalError when a non-finite value appears and
// std::invalid_argument when max_len is 0.
ForwardResult forward(const ImagePair& images, PriorScalar prior, const ToyModel& model,
                      std::size_t max_len = kDefaultMaxLen, ForwardOptions options = {});

// Which scalar the derivative is taken against.
struct GradTarget {
  enum class Kind { prior, weight } kind = Kind::prior;
  std::size_t weight_index = 0;
};

// Teacher-forced loss: sum of every pre-softmax decoder output while feeding
// `inputs` (starting with BOS) to the decoder, times `scale`.
double sequence_loss(const ImagePair& images, PriorScalar prior, const ToyModel& model,
                     const std::vector<int>& inputs, double scale = 1.0);

struct LossGradient {
  double loss = 0.0;
  double gradient = 0.0;
};

// Loss and its exact derivative with respect to `target`, by forward-mode
// differentiation through the whole network.
LossGradient loss_gradient(const ImagePair& images, PriorScalar prior, const ToyModel& model,
                           const std::vector<int>& inputs, GradTarget target, double scale = 1.0);

struct GradCheckEntry {
  GradTarget target;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;  // entries[0] is d(loss)/dP
  double max_relative_error = 0.0;
};

inline constexpr double kFiniteDifferenceStep = 1e-4;

// |a - n| / max(|a|, |n|), or 0 when both are exactly zero.
double relative_error(double analytic, double numeric);

// Compares forward-mode derivatives with central finite differences for
// the prior and `weight_samples` seeded weight picks.
GradCheckReport grad_check(const ToyModel& model, const ImagePair& images, PriorScalar prior,
                           std::size_t weight_samples = 4, std::size_t max_len = kDefaultMaxLen);

}  // namespace cxrprior
