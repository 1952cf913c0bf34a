#include "cxrprior/infusion.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cxrprior/dual.hpp"

namespace cxrprior {
namespace {

using std::exp;
using std::tanh;

// Uniform in [-scale, scale) from the raw generator output, so weights do
// not depend on the standard library's distribution implementations.
double uniform_symmetric(std::mt19937_64& gen, double scale) {
  const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
  return (2.0 * u - 1.0) * scale;
}

template <typename T>
Matrix<T> to(const Mat& m) {
  Matrix<T> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = T(m.data()[i]);
  return out;
}

template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul shape mismatch");
  Matrix<T> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) = out(i, j) + aik * b(k, j);
    }
  return out;
}

template <typename T>
Matrix<T> add(Matrix<T> a, const Matrix<T>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = a.data()[i] + b.data()[i];
  return a;
}

// Adds a 1 x n bias row to every row.
template <typename T>
Matrix<T> add_row(Matrix<T> a, const Matrix<T>& bias) {
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) a(r, c) = a(r, c) + bias(0, c);
  return a;
}

template <typename T>
Matrix<T> add_scalar(Matrix<T> a, const T& s) {
  for (auto& x : a.data()) x = x + s;
  return a;
}

template <typename T>
Matrix<T> apply_tanh(Matrix<T> a) {
  for (auto& x : a.data()) x = tanh(x);
  return a;
}

template <typename T>
Matrix<T> transpose(const Matrix<T>& a) {
  Matrix<T> out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
  return out;
}

template <typename T>
Matrix<T> softmax_rows(Matrix<T> a) {
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double peak = value_of(a(r, 0));
    for (std::size_t c = 1; c < a.cols(); ++c) peak = std::max(peak, value_of(a(r, c)));
    T total(0.0);
    for (std::size_t c = 0; c < a.cols(); ++c) {
      a(r, c) = exp(a(r, c) - T(peak));
      total = total + a(r, c);
    }
    for (std::size_t c = 0; c < a.cols(); ++c) a(r, c) = a(r, c) / total;
  }
  return a;
}

// Scaled dot-product attention of `queries` over `keys_from` rows.
template <typename T>
Matrix<T> attention(const Matrix<T>& queries_from, const Matrix<T>& keys_from,
                    const Matrix<T>& wq, const Matrix<T>& wk, const Matrix<T>& wv,
                    const Matrix<T>& wo) {
  const Matrix<T> q = matmul(queries_from, wq);
  const Matrix<T> k = matmul(keys_from, wk);
  const Matrix<T> v = matmul(keys_from, wv);
  Matrix<T> scores = matmul(q, transpose(k));
  const T scale(1.0 / std::sqrt(static_cast<double>(wq.cols())));
  for (auto& x : scores.data()) x = x * scale;
  return matmul(matmul(softmax_rows(std::move(scores)), v), wo);
}

Mat positional_encoding(std::size_t rows, std::size_t dim) {
  Mat pe(rows, dim);
  for (std::size_t pos = 0; pos < rows; ++pos)
    for (std::size_t i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, static_cast<double>(i - i % 2) / static_cast<double>(dim));
      const double angle = static_cast<double>(pos) / rate;
      pe(pos, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  return pe;
}

template <typename T>
void require_finite(const Matrix<T>& m, const char* stage) {
  for (const auto& x : m.data()) {
    if (!std::isfinite(value_of(x)))
      throw NumericalError(std::string("non-finite value after ") + stage);
  }
}

void require_shape(const Mat& image, std::size_t size, const char* view) {
  if (image.rows() != size || image.cols() != size)
    throw DimensionError(std::string(view) + " image is " + std::to_string(image.rows()) + "x" +
                         std::to_string(image.cols()) + ", expected " + std::to_string(size) +
                         "x" + std::to_string(size));
}

// Rows: frontal patches in raster order, then lateral patches.
Mat patch_rows(const ImagePair& images, const ModelConfig& config) {
  require_shape(images.frontal, config.image_size, "frontal");
  require_shape(images.lateral, config.image_size, "lateral");
  const std::size_t p = config.patch_size;
  const std::size_t per_side = config.image_size / p;
  Mat rows(config.sequence_length(), p * p);
  std::size_t row = 0;
  for (const Mat* view : {&images.frontal, &images.lateral}) {
    for (std::size_t pr = 0; pr < per_side; ++pr)
      for (std::size_t pc = 0; pc < per_side; ++pc, ++row)
        for (std::size_t y = 0; y < p; ++y)
          for (std::size_t x = 0; x < p; ++x) rows(row, y * p + x) = (*view)(pr * p + y, pc * p + x);
  }
  return rows;
}

template <typename T>
ModelParams<T> convert(const ModelParams<double>& src, std::ptrdiff_t seeded_index) {
  ModelParams<T> out;
  std::vector<const Mat*> sources;
  ModelParams<double>::visit(src, [&](const Mat& m) { sources.push_back(&m); });
  std::size_t tensor = 0;
  std::ptrdiff_t flat = 0;
  ModelParams<T>::visit(out, [&](Matrix<T>& m) {
    const Mat& s = *sources[tensor++];
    m = to<T>(s);
    for (std::size_t i = 0; i < m.size(); ++i, ++flat) {
      if constexpr (std::is_same_v<T, Dual>) {
        if (flat == seeded_index) m.data()[i].deriv = 1.0;
      }
    }
  });
  return out;
}

// Sinusoidal positions, then one self-attention + feed-forward block, both
// residual.
template <typename T>
Matrix<T> encoder_block(const ModelParams<T>& p, const ModelConfig& config, const Matrix<T>& visual) {
  const Matrix<T> x0 = add(visual, to<T>(positional_encoding(visual.rows(), config.embed_dim)));
  const Matrix<T> h = add(x0, attention(x0, x0, p.enc_query, p.enc_key, p.enc_value, p.enc_out));
  const Matrix<T> ff = add_row(
      matmul(apply_tanh(add_row(matmul(h, p.enc_ff_in), p.enc_ff_in_bias)), p.enc_ff_out),
      p.enc_ff_out_bias);
  Matrix<T> latent = add(h, ff);
  require_finite(latent, "encoder");
  return latent;
}

template <typename T>
Matrix<T> encode_impl(const ModelParams<T>& p, const ModelConfig& config, const Mat& patches,
                      const T& prior) {
  Matrix<T> visual = matmul(to<T>(patches), p.patch_projection);
  require_finite(visual, "visual extraction");
  return add_scalar(encoder_block(p, config, add_scalar(std::move(visual), prior)), prior);
}

// Logits for the last position of `inputs`.
template <typename T>
Matrix<T> decoder_logits(const ModelParams<T>& p, const ModelConfig& config,
                         const Matrix<T>& latent, const std::vector<int>& inputs) {
  const std::size_t n = inputs.size();
  const Mat pe = positional_encoding(n, config.embed_dim);
  Matrix<T> embedded(n, config.embed_dim);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t c = 0; c < config.embed_dim; ++c)
      embedded(t, c) = p.token_embedding(static_cast<std::size_t>(inputs[t]), c) + T(pe(t, c));

  Matrix<T> current(1, config.embed_dim);
  for (std::size_t c = 0; c < config.embed_dim; ++c) current(0, c) = embedded(n - 1, c);

  // The last position attends to itself and everything before it.
  const Matrix<T> h1 = add(current, attention(current, embedded, p.dec_self_query, p.dec_self_key,
                                              p.dec_self_value, p.dec_self_out));
  const Matrix<T> h2 = add(h1, attention(h1, latent, p.dec_cross_query, p.dec_cross_key,
                                         p.dec_cross_value, p.dec_cross_out));
  const Matrix<T> out = add(
      h2, add_row(matmul(apply_tanh(add_row(matmul(h2, p.dec_ff_in), p.dec_ff_in_bias)),
                         p.dec_ff_out),
                  p.dec_ff_out_bias));
  Matrix<T> logits = add_row(matmul(out, p.vocab_projection), p.vocab_bias);
  require_finite(logits, "decoder");
  return logits;
}

template <typename T>
T sequence_loss_impl(const ModelParams<T>& p, const ModelConfig& config, const Mat& patches,
                     const T& prior, const std::vector<int>& inputs, double scale) {
  const Matrix<T> latent = encode_impl(p, config, patches, prior);
  T loss(0.0);
  std::vector<int> prefix;
  for (int token : inputs) {
    prefix.push_back(token);
    const Matrix<T> logits = decoder_logits(p, config, latent, prefix);
    for (const T& logit : logits.data()) loss = loss + logit;
  }
  return loss * T(scale);
}

std::vector<int> check_inputs(const std::vector<int>& inputs, const ModelConfig& config) {
  if (inputs.empty() || inputs.front() != kBosToken)
    throw std::invalid_argument("decoder inputs must start with BOS");
  for (int t : inputs)
    if (t < 0 || static_cast<std::size_t>(t) >= config.vocab_size)
      throw std::invalid_argument("decoder input token out of vocabulary");
  return inputs;
}

}  // namespace

ToyModel::ToyModel(std::uint64_t seed, ModelConfig config) : seed_(seed), config_(config) {
  if (config_.patch_size == 0 || config_.image_size % config_.patch_size != 0)
    throw DimensionError("image size must be a multiple of the patch size");
  if (config_.embed_dim == 0 || config_.hidden_dim == 0 || config_.vocab_size < 3)
    throw DimensionError("model widths must be positive and vocabulary at least 3");

  const std::size_t d = config_.embed_dim;
  const std::size_t h = config_.hidden_dim;
  const std::size_t v = config_.vocab_size;
  const std::size_t pix = config_.patch_size * config_.patch_size;
  auto& p = params_;
  p.patch_projection = Mat(pix, d);
  p.enc_query = p.enc_key = p.enc_value = p.enc_out = Mat(d, d);
  p.enc_ff_in = Mat(d, h);
  p.enc_ff_in_bias = Mat(1, h);
  p.enc_ff_out = Mat(h, d);
  p.enc_ff_out_bias = Mat(1, d);
  p.token_embedding = Mat(v, d);
  p.dec_self_query = p.dec_self_key = p.dec_self_value = p.dec_self_out = Mat(d, d);
  p.dec_cross_query = p.dec_cross_key = p.dec_cross_value = p.dec_cross_out = Mat(d, d);
  p.dec_ff_in = Mat(d, h);
  p.dec_ff_in_bias = Mat(1, h);
  p.dec_ff_out = Mat(h, d);
  p.dec_ff_out_bias = Mat(1, d);
  p.vocab_projection = Mat(d, v);
  p.vocab_bias = Mat(1, v);

  std::mt19937_64 gen(seed_);
  ModelParams<double>::visit(p, [&](Mat& m) {
    // Bias rows and the embedding table use a fixed scale; weight matrices
    // are scaled to unit output variance.
    const bool fixed = m.rows() == 1 || &m == &p.token_embedding;
    const double scale = fixed ? 1.0 : std::sqrt(3.0 / static_cast<double>(m.rows()));
    for (double& x : m.data()) x = uniform_symmetric(gen, scale);
  });
}

std::size_t ToyModel::parameter_count() const {
  std::size_t n = 0;
  ModelParams<double>::visit(params_, [&](const Mat& m) { n += m.size(); });
  return n;
}

double ToyModel::parameter(std::size_t index) const {
  std::size_t offset = 0;
  double found = 0.0;
  bool hit = false;
  ModelParams<double>::visit(params_, [&](const Mat& m) {
    if (!hit && index < offset + m.size()) {
      found = m.data()[index - offset];
      hit = true;
    }
    offset += m.size();
  });
  if (!hit) throw std::out_of_range("parameter index out of range");
  return found;
}

ToyModel ToyModel::with_parameter(std::size_t index, double value) const {
  ToyModel copy = *this;
  std::size_t offset = 0;
  bool hit = false;
  ModelParams<double>::visit(copy.params_, [&](Mat& m) {
    if (!hit && index < offset + m.size()) {
      m.data()[index - offset] = value;
      hit = true;
    }
    offset += m.size();
  });
  if (!hit) throw std::out_of_range("parameter index out of range");
  return copy;
}

ToyModel ToyModel::with_latent_path_zeroed() const {
  ToyModel copy = *this;
  std::fill(copy.params_.dec_cross_value.data().begin(), copy.params_.dec_cross_value.data().end(), 0.0);
  return copy;
}

ImagePair synthetic_images(std::uint64_t seed, std::size_t size) {
  std::mt19937_64 gen(seed ^ 0x9e3779b97f4a7c15ULL);
  const double phase_f = uniform_symmetric(gen, 3.14159);
  const double phase_l = uniform_symmetric(gen, 3.14159);
  ImagePair images{Mat(size, size), Mat(size, size)};
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double fy = static_cast<double>(y), fx = static_cast<double>(x);
      images.frontal(y, x) = 0.5 + 0.3 * std::sin(0.4 * fy + 0.25 * fx + phase_f) +
                             0.1 * uniform_symmetric(gen, 1.0);
      images.lateral(y, x) = 0.5 + 0.3 * std::cos(0.2 * fy - 0.5 * fx + phase_l) +
                             0.1 * uniform_symmetric(gen, 1.0);
    }
  return images;
}

VisualEmbedding visual_extract(const ImagePair& images, const ToyModel& model) {
  VisualEmbedding v{matmul(patch_rows(images, model.config()), model.params().patch_projection)};
  require_finite(v.values, "visual extraction");
  return v;
}

LatentRepresentation encode(const VisualEmbedding& visual, const ToyModel& model) {
  if (visual.values.cols() != model.config().embed_dim)
    throw DimensionError("visual embedding width " + std::to_string(visual.values.cols()) +
                         ", expected " + std::to_string(model.config().embed_dim));
  return {encoder_block(model.params(), model.config(), visual.values)};
}

ForwardResult forward(const ImagePair& images, PriorScalar prior, const ToyModel& model,
                      std::size_t max_len, ForwardOptions options) {
  if (max_len == 0) throw std::invalid_argument("max_len must be at least 1");
  if (!std::isfinite(prior.value)) throw NumericalError("prior is not finite");

  ForwardResult result;
  const ModelConfig& config = model.config();
  if (options.infuse) {
    result.visual = infuse(visual_extract(images, model), prior);
    result.latent_plain = encode(result.visual, model);
    result.latent = infuse(result.latent_plain, prior);
  } else {
    result.visual = visual_extract(images, model);
    result.latent_plain = encode(result.visual, model);
    result.latent = result.latent_plain;
  }

  result.decoder_inputs = {kBosToken};
  while (true) {
    const Mat logits = decoder_logits(model.params(), config, result.latent.values, result.decoder_inputs);
    // BOS is never emitted.
    const auto& row = logits.data();
    const int next =
        static_cast<int>(std::max_element(row.begin() + kBosToken + 1, row.end()) - row.begin());
    if (next == kEosToken) break;
    result.tokens.push_back(next);
    if (result.tokens.size() == max_len) break;
    result.decoder_inputs.push_back(next);
  }
  return result;
}

double sequence_loss(const ImagePair& images, PriorScalar prior, const ToyModel& model,
                     const std::vector<int>& inputs, double scale) {
  check_inputs(inputs, model.config());
  return sequence_loss_impl(model.params(), model.config(), patch_rows(images, model.config()),
                            prior.value, inputs, scale);
}

LossGradient loss_gradient(const ImagePair& images, PriorScalar prior, const ToyModel& model,
                           const std::vector<int>& inputs, GradTarget target, double scale) {
  check_inputs(inputs, model.config());
  const bool wrt_prior = target.kind == GradTarget::Kind::prior;
  if (!wrt_prior && target.weight_index >= model.parameter_count())
    throw std::out_of_range("parameter index out of range");
  const ModelParams<Dual> params = convert<Dual>(
      model.params(), wrt_prior ? -1 : static_cast<std::ptrdiff_t>(target.weight_index));
  const Dual p(prior.value, wrt_prior ? 1.0 : 0.0);
  const Dual loss = sequence_loss_impl(params, model.config(), patch_rows(images, model.config()),
                                       p, inputs, scale);
  return {loss.value, loss.deriv};
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max(std::abs(analytic), std::abs(numeric));
  return denom == 0.0 ? 0.0 : std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const ToyModel& model, const ImagePair& images, PriorScalar prior,
                           std::size_t weight_samples, std::size_t max_len) {
  const std::vector<int> inputs = forward(images, prior, model, max_len).decoder_inputs;
  const double h = kFiniteDifferenceStep;

  std::vector<GradTarget> targets{{GradTarget::Kind::prior, 0}};
  std::mt19937_64 gen(model.seed() ^ 0x5851f42d4c957f2dULL);
  for (std::size_t i = 0; i < weight_samples; ++i)
    targets.push_back({GradTarget::Kind::weight,
                       static_cast<std::size_t>(gen() % model.parameter_count())});

  GradCheckReport report;
  for (const auto& target : targets) {
    GradCheckEntry entry;
    entry.target = target;
    entry.analytic = loss_gradient(images, prior, model, inputs, target).gradient;
    double plus = 0.0, minus = 0.0;
    if (target.kind == GradTarget::Kind::prior) {
      plus = sequence_loss(images, {prior.value + h}, model, inputs);
      minus = sequence_loss(images, {prior.value - h}, model, inputs);
    } else {
      const double w = model.parameter(target.weight_index);
      plus = sequence_loss(images, prior, model.with_parameter(target.weight_index, w + h), inputs);
      minus = sequence_loss(images, prior, model.with_parameter(target.weight_index, w - h), inputs);
    }
    entry.numeric = (plus - minus) / (2.0 * h);
    entry.relative_error = relative_error(entry.analytic, entry.numeric);
    report.max_relative_error = std::max(report.max_relative_error, entry.relative_error);
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace cxrprior
