#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "lcasc/error.hpp"
#include "lcasc/lca.hpp"
#include "lcasc/parallel.hpp"
#include "lcasc/rng.hpp"
#include "lcasc/tensor.hpp"

namespace lcasc {

struct TrainConfig {
  LcaConfig lca;
  double dict_learning_rate = 0.01;
  std::size_t epochs = 20;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  bool normalize_every_update = true;
  // Re-draw elements that were never active during an epoch.
  bool resample_unused = true;
  std::size_t threads = 1;

  void validate() const {
    lca.validate();
    if (!(dict_learning_rate >= 0.0)) throw InvalidArgument("learning rate must be >= 0");
    if (batch_size == 0) throw InvalidArgument("batch_size must be positive");
  }
};

// One row of training statistics. For the autoencoder, `energy` holds the mean
// denoising loss and `dict_delta` the change of all weights.
struct EpochStats {
  std::size_t epoch = 0;
  double mse = 0.0;
  double energy = 0.0;
  double percent_active = 0.0;
  double dict_delta = 0.0;
};

using TrainStats = std::vector<EpochStats>;

namespace detail {
inline void fill_unit_noise(Rng& rng, std::span<double> e) {
  for (double& v : e) v = rng.uniform(-1.0, 1.0);
  const double n = std::sqrt(squared_norm(e));
  if (n > 0.0) scale(1.0 / n, e);
}
}  // namespace detail

// Uniform noise in [-1, 1), each element scaled to unit norm.
inline Dictionary init_dictionary(std::uint64_t seed, std::size_t K, std::size_t patch,
                                  std::size_t channels, std::size_t stride) {
  Dictionary d(DictShape{K, patch, channels, stride});
  Rng rng(seed);
  for (std::size_t k = 0; k < K; ++k) detail::fill_unit_noise(rng, d.element(k));
  return d;
}

// Hebbian update: block k = sum over sites of acts[r, c, k] * residual patch.
// This is the negative gradient of 1/2 ||x - Phi a||^2 with respect to Phi.
inline Dictionary dict_gradient(const ImageTensor& image, const ImageTensor& recon,
                                const ActivationTensor& acts, const DictShape& shape) {
  return patch_coefficient_products(subtract(image, recon), acts, shape);
}

// Compares dict_gradient with centered finite differences of the
// reconstruction term, activations held fixed. Returns the largest relative
// error over all dictionary entries.
inline double finite_difference_check(const ImageTensor& image, const Dictionary& dict,
                                      const ActivationTensor& acts, double epsilon) {
  const auto recon_term = [&](const Dictionary& d) {
    const ImageTensor r = subtract(image, conv_transpose(acts, d, image.rows(), image.cols()));
    return 0.5 * squared_norm(r.values());
  };
  const Dictionary update =
      dict_gradient(image, conv_transpose(acts, dict, image.rows(), image.cols()), acts,
                    dict.shape());
  Dictionary probe = dict;
  double worst = 0.0;
  auto p = probe.values();
  const auto upd = update.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + epsilon;
    const double plus = recon_term(probe);
    p[i] = saved - epsilon;
    const double minus = recon_term(probe);
    p[i] = saved;
    const double numeric = (plus - minus) / (2.0 * epsilon);
    const double analytic = -upd[i];
    worst = std::max(worst, relative_error(analytic, numeric));
  }
  return worst;
}

struct EpochResult {
  Dictionary dict;
  EpochStats stats;
};

// One pass over the corpus: per batch, encode each image against the fixed
// dictionary, then take a gradient step averaged over the batch and project
// elements back to unit norm.
inline EpochResult train_epoch(std::span<const ImageTensor> corpus, const Dictionary& dict,
                               const TrainConfig& cfg, std::size_t epoch = 0) {
  cfg.validate();
  if (corpus.empty()) throw InvalidArgument("train_epoch: corpus is empty");

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  {
    Rng rng = Rng::stream(cfg.seed, 0x5eed0001, epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i) - 1))]);
    }
  }

  const bool updating = cfg.dict_learning_rate > 0.0;
  Dictionary current = dict;
  std::vector<std::size_t> usage(dict.num_elements(), 0);
  double sum_mse = 0.0, sum_energy = 0.0, sum_active = 0.0;

  struct Sample {
    ActivationTensor a;
    ImageTensor recon;
    double mse = 0.0;
    double energy = 0.0;
    double active = 0.0;
  };

  const std::size_t B = cfg.batch_size;
  for (std::size_t start = 0, batch = 0; start < order.size(); start += B, ++batch) {
    const std::size_t n = std::min(B, order.size() - start);
    std::vector<Sample> samples(n);
    try {
      const LcaSolver solver(current, cfg.lca);
      parallel_for(n, cfg.threads, [&](std::size_t i) {
        const ImageTensor& x = corpus[order[start + i]];
        LcaState st = solver.encode(x);
        Sample& s = samples[i];
        s.recon = conv_transpose(st.a, current, x.rows(), x.cols());
        const double r2 = squared_norm(subtract(x, s.recon).values());
        s.mse = r2 / static_cast<double>(x.size());
        s.energy = 0.5 * r2 + cfg.lca.lambda * l1_norm(st.a.values());
        std::size_t nz = 0;
        for (double v : st.a.values()) nz += (v != 0.0);
        s.active = static_cast<double>(nz) / static_cast<double>(st.a.size());
        s.a = std::move(st.a);
      });
    } catch (const DivergenceError& e) {
      throw DivergenceError("batch " + std::to_string(batch) + ": " + e.what());
    }

    Dictionary step(current.shape());
    for (std::size_t i = 0; i < n; ++i) {
      const Sample& s = samples[i];
      sum_mse += s.mse;
      sum_energy += s.energy;
      sum_active += s.active;
      for (std::size_t site = 0; site < s.a.rows() * s.a.cols(); ++site) {
        const auto fib = s.a.fiber(site / s.a.cols(), site % s.a.cols());
        for (std::size_t k = 0; k < fib.size(); ++k) usage[k] += (fib[k] != 0.0);
      }
      if (updating) {
        const Dictionary g =
            dict_gradient(corpus[order[start + i]], s.recon, s.a, current.shape());
        add(g.values(), step.values());
      }
    }
    if (updating) {
      axpy(cfg.dict_learning_rate / static_cast<double>(n), step.values(), current.values());
      if (cfg.normalize_every_update) current.normalize_elements();
    }
  }

  if (updating && cfg.resample_unused) {
    Rng rng = Rng::stream(cfg.seed, 0x5eed0002, epoch);
    for (std::size_t k = 0; k < usage.size(); ++k) {
      if (usage[k] == 0) detail::fill_unit_noise(rng, current.element(k));
    }
  }

  EpochResult out{std::move(current), {}};
  const double count = static_cast<double>(corpus.size());
  out.stats.epoch = epoch + 1;
  out.stats.mse = sum_mse / count;
  out.stats.energy = sum_energy / count;
  out.stats.percent_active = sum_active / count;
  double delta = 0.0;
  const auto before = dict.values();
  const auto after = out.dict.values();
  for (std::size_t i = 0; i < before.size(); ++i) {
    const double d = after[i] - before[i];
    delta += d * d;
  }
  out.stats.dict_delta = std::sqrt(delta);
  return out;
}

struct TrainResult {
  Dictionary dict;
  TrainStats stats;
};

inline TrainResult train_dictionary(std::span<const ImageTensor> corpus, Dictionary init,
                                    const TrainConfig& cfg,
                                    const std::function<void(const EpochStats&)>& on_epoch = {}) {
  TrainResult res{std::move(init), {}};
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    EpochResult r = train_epoch(corpus, res.dict, cfg, e);
    res.dict = std::move(r.dict);
    res.stats.push_back(r.stats);
    if (on_epoch) on_epoch(r.stats);
  }
  return res;
}

}  // namespace lcasc
