#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "lcasc/error.hpp"
#include "lcasc/parallel.hpp"
#include "lcasc/rng.hpp"
#include "lcasc/tensor.hpp"
#include "lcasc/trainer.hpp"

namespace lcasc {

// Single-layer convolutional autoencoder with the same geometry as the
// sparse coding dictionary: linear encoder a = W * x + b, untied decoder.
struct AutoencoderModel {
  Dictionary encoder;
  std::vector<double> encoder_bias;
  Dictionary decoder;

  const DictShape& shape() const { return encoder.shape(); }

  void validate() const {
    if (!(encoder.shape() == decoder.shape())) {
      throw DimensionError("autoencoder: encoder and decoder shapes differ");
    }
    if (encoder_bias.size() != encoder.num_elements()) {
      throw DimensionError("autoencoder: bias length " + std::to_string(encoder_bias.size()) +
                           " does not match K = " + std::to_string(encoder.num_elements()));
    }
  }

  friend bool operator==(const AutoencoderModel&, const AutoencoderModel&) = default;
};

struct AeTrainConfig {
  double noise_sigma = 0.5;
  double learning_rate = 3e-4;
  std::size_t epochs = 50;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  // Draw fresh noise every epoch; when false each image keeps one noise draw.
  bool resample_noise = true;
  std::size_t threads = 1;

  void validate() const {
    if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise_sigma must be >= 0");
    if (!(learning_rate >= 0.0)) throw InvalidArgument("learning rate must be >= 0");
    if (batch_size == 0) throw InvalidArgument("batch_size must be positive");
  }
};

inline constexpr double kAeInstabilityMse = 1e4;

// Encoder and decoder drawn like a sparse coding dictionary (unit-norm
// uniform noise, decoder optionally rescaled); bias zero.
inline AutoencoderModel init_autoencoder(std::uint64_t seed, std::size_t K, std::size_t patch,
                                         std::size_t channels, std::size_t stride,
                                         double decoder_scale = 1.0) {
  AutoencoderModel m;
  m.encoder = init_dictionary(seed, K, patch, channels, stride);
  m.decoder = init_dictionary(detail::splitmix64(seed ^ 0xdec0deULL), K, patch, channels, stride);
  scale(decoder_scale, m.decoder.values());
  m.encoder_bias.assign(K, 0.0);
  return m;
}

inline ImageTensor add_gaussian_noise(const ImageTensor& image, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InvalidArgument("noise sigma must be >= 0");
  ImageTensor out = image;
  if (sigma == 0.0) return out;
  Rng rng = Rng::stream(seed, 0x0015e);
  for (double& v : out.values()) v += sigma * rng.normal();
  return out;
}

struct AeForward {
  ActivationTensor acts;
  ImageTensor recon;
};

inline ActivationTensor ae_encode(const ImageTensor& input, const AutoencoderModel& model) {
  model.validate();
  ActivationTensor a = correlate(input, model.encoder);
  const std::size_t K = a.depth();
  auto v = a.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += model.encoder_bias[i % K];
  return a;
}

inline AeForward ae_forward(const ImageTensor& noisy, const AutoencoderModel& model) {
  AeForward f;
  f.acts = ae_encode(noisy, model);
  f.recon = conv_transpose(f.acts, model.decoder, noisy.rows(), noisy.cols());
  return f;
}

// Gradients of L = 1/2 ||clean - reconstruction(noisy)||^2.
struct AeGradients {
  Dictionary encoder;
  std::vector<double> bias;
  Dictionary decoder;
  double loss = 0.0;
};

inline AeGradients ae_backward(const ImageTensor& clean, const ImageTensor& noisy,
                               const AutoencoderModel& model) {
  if (!clean.same_shape(noisy)) {
    throw DimensionError("ae_backward: clean " + clean.shape_string() + " vs noisy " +
                         noisy.shape_string());
  }
  const AeForward f = ae_forward(noisy, model);
  const ImageTensor residual = subtract(clean, f.recon);
  AeGradients g;
  g.loss = 0.5 * squared_norm(residual.values());

  // dL/dD_k = -sum_s a[s, k] * residual patch
  g.decoder = patch_coefficient_products(residual, f.acts, model.shape());
  scale(-1.0, g.decoder.values());

  // Back-projected residual: correlate(residual, decoder) = -dL/da.
  const ActivationTensor back = correlate(residual, model.decoder);
  const std::size_t K = back.depth();
  g.bias.assign(K, 0.0);
  const auto bv = back.values();
  for (std::size_t i = 0; i < bv.size(); ++i) g.bias[i % K] -= bv[i];

  g.encoder = patch_coefficient_products(noisy, back, model.shape());
  scale(-1.0, g.encoder.values());
  return g;
}

struct AeEpochResult {
  AutoencoderModel model;
  EpochStats stats;
};

// One SGD pass: fresh noise per presentation, gradient step on encoder,
// decoder and bias averaged over each batch.
inline AeEpochResult ae_train_epoch(std::span<const ImageTensor> corpus,
                                    const AutoencoderModel& model, const AeTrainConfig& cfg,
                                    std::size_t epoch = 0) {
  cfg.validate();
  model.validate();
  if (corpus.empty()) throw InvalidArgument("ae_train_epoch: corpus is empty");

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  {
    Rng rng = Rng::stream(cfg.seed, 0xae0001, epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1],
                order[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i) - 1))]);
    }
  }
  const std::uint64_t noise_epoch = cfg.resample_noise ? epoch : 0;
  const bool updating = cfg.learning_rate > 0.0;

  AutoencoderModel current = model;
  double sum_mse = 0.0, sum_loss = 0.0, sum_active = 0.0;
  const std::size_t B = cfg.batch_size;
  for (std::size_t start = 0; start < order.size(); start += B) {
    const std::size_t n = std::min(B, order.size() - start);
    std::vector<AeGradients> grads(n);
    std::vector<double> active(n);
    parallel_for(n, cfg.threads, [&](std::size_t i) {
      const std::size_t idx = order[start + i];
      const ImageTensor& clean = corpus[idx];
      const std::uint64_t noise_seed =
          detail::splitmix64(cfg.seed ^ detail::splitmix64(noise_epoch * 0x100000001ULL + idx));
      const ImageTensor noisy = add_gaussian_noise(clean, cfg.noise_sigma, noise_seed);
      grads[i] = ae_backward(clean, noisy, current);
      const ActivationTensor a = ae_encode(noisy, current);
      std::size_t nz = 0;
      for (double v : a.values()) nz += (v != 0.0);
      active[i] = static_cast<double>(nz) / static_cast<double>(a.size());
    });

    Dictionary enc_step(current.shape()), dec_step(current.shape());
    std::vector<double> bias_step(current.encoder_bias.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const ImageTensor& clean = corpus[order[start + i]];
      sum_loss += grads[i].loss;
      sum_mse += 2.0 * grads[i].loss / static_cast<double>(clean.size());
      sum_active += active[i];
      add(grads[i].encoder.values(), enc_step.values());
      add(grads[i].decoder.values(), dec_step.values());
      add(grads[i].bias, bias_step);
    }
    if (updating) {
      const double step = -cfg.learning_rate / static_cast<double>(n);
      axpy(step, enc_step.values(), current.encoder.values());
      axpy(step, dec_step.values(), current.decoder.values());
      axpy(step, bias_step, current.encoder_bias);
    }
  }

  AeEpochResult out{std::move(current), {}};
  const double count = static_cast<double>(corpus.size());
  out.stats.epoch = epoch + 1;
  out.stats.mse = sum_mse / count;
  out.stats.energy = sum_loss / count;
  out.stats.percent_active = sum_active / count;
  if (!std::isfinite(out.stats.mse) || out.stats.mse > kAeInstabilityMse) {
    throw InstabilityError("autoencoder epoch " + std::to_string(epoch + 1) + ": MSE " +
                           std::to_string(out.stats.mse) + " exceeds the stable regime");
  }
  double delta = 0.0;
  const auto acc = [&delta](std::span<const double> a, std::span<const double> b) {
    for (std::size_t i = 0; i < a.size(); ++i) delta += (a[i] - b[i]) * (a[i] - b[i]);
  };
  acc(model.encoder.values(), out.model.encoder.values());
  acc(model.decoder.values(), out.model.decoder.values());
  acc(model.encoder_bias, out.model.encoder_bias);
  out.stats.dict_delta = std::sqrt(delta);
  return out;
}

struct AeTrainResult {
  AutoencoderModel model;
  TrainStats stats;
};

inline AeTrainResult train_autoencoder(std::span<const ImageTensor> corpus, AutoencoderModel init,
                                       const AeTrainConfig& cfg,
                                       const std::function<void(const EpochStats&)>& on_epoch = {}) {
  AeTrainResult res{std::move(init), {}};
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    AeEpochResult r = ae_train_epoch(corpus, res.model, cfg, e);
    res.model = std::move(r.model);
    res.stats.push_back(r.stats);
    if (on_epoch) on_epoch(r.stats);
  }
  return res;
}

// Encoder filters scaled to unit L2 norm, bias scaled alongside, so every
// response is (w_k . x + b_k) / |w_k|. Used to put autoencoder and sparse
// coding activations on a comparable scale.
inline AutoencoderModel normalized_for_analysis(const AutoencoderModel& m) {
  AutoencoderModel out = m;
  for (std::size_t k = 0; k < out.encoder.num_elements(); ++k) {
    auto e = out.encoder.element(k);
    const double n = std::sqrt(squared_norm(e));
    if (n > 0.0) {
      scale(1.0 / n, e);
      out.encoder_bias[k] /= n;
    }
  }
  return out;
}

}  // namespace lcasc
