#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lcasc/error.hpp"
#include "lcasc/tensor.hpp"

namespace lcasc {

enum class ModelKind : std::uint8_t { sparse_coding = 0, autoencoder = 1 };

inline const char* to_string(ModelKind k) {
  return k == ModelKind::sparse_coding ? "sparse_coding" : "autoencoder";
}

// Fraction of entries with |value| > epsilon. With epsilon 0 this is the exact
// nonzero test used for thresholded codes.
inline double percent_active(const ActivationTensor& acts, double epsilon = 0.0) {
  if (acts.empty()) return 0.0;
  std::size_t n = 0;
  for (double v : acts.values()) n += (std::abs(v) > epsilon);
  return static_cast<double>(n) / static_cast<double>(acts.size());
}

inline std::size_t count_nonzero(const ActivationTensor& acts) {
  std::size_t n = 0;
  for (double v : acts.values()) n += (v != 0.0);
  return n;
}

namespace detail {
inline void check_consistent_k(std::span<const ActivationTensor> codes) {
  if (codes.empty()) throw InvalidArgument("no activation tensors given");
  for (std::size_t i = 1; i < codes.size(); ++i) {
    if (codes[i].depth() != codes[0].depth()) {
      throw DimensionError("elements: code " + std::to_string(i) + " has K = " +
                           std::to_string(codes[i].depth()) + ", code 0 has K = " +
                           std::to_string(codes[0].depth()));
    }
  }
}

inline double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Population standard deviation.
inline double std_of(std::span<const double> v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}
}  // namespace detail

// Per-element count of (image, site) occasions with a nonzero coefficient,
// divided by images x sites.
inline std::vector<double> usage_frequency(std::span<const ActivationTensor> codes) {
  detail::check_consistent_k(codes);
  const std::size_t K = codes[0].depth();
  std::vector<std::uint64_t> counts(K, 0);
  std::uint64_t occasions = 0;
  for (const auto& a : codes) {
    const std::size_t sites = a.rows() * a.cols();
    occasions += sites;
    const auto v = a.values();
    for (std::size_t i = 0; i < v.size(); ++i) counts[i % K] += (v[i] != 0.0);
  }
  std::vector<double> out(K);
  for (std::size_t k = 0; k < K; ++k) {
    out[k] = static_cast<double>(counts[k]) / static_cast<double>(occasions);
  }
  return out;
}

// |<map_i, map_j>| for every unordered pair i < j, in row-major pair order.
inline std::vector<double> crosscorr_pairs(const ActivationTensor& acts) {
  const std::size_t K = acts.depth();
  std::vector<double> gram(K * K, 0.0);
  const std::size_t sites = acts.rows() * acts.cols();
  for (std::size_t s = 0; s < sites; ++s) {
    const double* f = acts.data() + s * K;
    for (std::size_t i = 0; i < K; ++i) {
      const double vi = f[i];
      if (vi == 0.0) continue;
      double* row = gram.data() + i * K;
      for (std::size_t j = i + 1; j < K; ++j) row[j] += vi * f[j];
    }
  }
  std::vector<double> pairs;
  pairs.reserve(K * (K - 1) / 2);
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t j = i + 1; j < K; ++j) pairs.push_back(std::abs(gram[i * K + j]));
  }
  return pairs;
}

struct PairStats {
  double mean = 0.0;
  double std = 0.0;
};

// Zero-lag cross-correlation between activation maps of distinct elements on
// one image: mean and standard deviation over the K(K-1)/2 pair values.
inline PairStats intra_image_crosscorr(const ActivationTensor& acts) {
  if (acts.depth() < 2) throw InvalidArgument("cross-correlation needs K >= 2");
  const std::vector<double> pairs = crosscorr_pairs(acts);
  PairStats s;
  s.mean = detail::mean_of(pairs);
  s.std = detail::std_of(pairs, s.mean);
  return s;
}

// How the codes were produced; cross-correlation magnitudes are only
// comparable between models whose elements were unit-normalized first.
struct EncodingInfo {
  ModelKind kind = ModelKind::sparse_coding;
  bool unit_norm_weights = false;
};

struct CrossCorrStats {
  double mean = 0.0;        // grand mean over all pair values
  double intra_std = 0.0;   // mean over images of the within-image std
  double inter_std = 0.0;   // std over images of the per-image mean
  double pooled_std = 0.0;  // std over all pair values of all images
  std::vector<double> per_image_mean;
};

inline CrossCorrStats corpus_crosscorr(std::span<const ActivationTensor> codes,
                                       const EncodingInfo& info) {
  if (codes.empty()) throw InvalidArgument("corpus_crosscorr: empty corpus");
  if (!info.unit_norm_weights) {
    throw InvalidArgument("corpus_crosscorr: codes must come from unit-normalized weights");
  }
  detail::check_consistent_k(codes);
  CrossCorrStats out;
  std::vector<double> intra_stds;
  double pooled_sum = 0.0, pooled_sq = 0.0;
  std::size_t pooled_n = 0;
  for (const auto& a : codes) {
    const std::vector<double> pairs = crosscorr_pairs(a);
    const double m = detail::mean_of(pairs);
    out.per_image_mean.push_back(m);
    intra_stds.push_back(detail::std_of(pairs, m));
    for (double v : pairs) pooled_sum += v;
    pooled_n += pairs.size();
  }
  out.mean = pooled_n == 0 ? 0.0 : pooled_sum / static_cast<double>(pooled_n);
  for (const auto& a : codes) {
    for (double v : crosscorr_pairs(a)) pooled_sq += (v - out.mean) * (v - out.mean);
  }
  out.pooled_std = pooled_n == 0 ? 0.0 : std::sqrt(pooled_sq / static_cast<double>(pooled_n));
  out.intra_std = detail::mean_of(intra_stds);
  out.inter_std = detail::std_of(out.per_image_mean, detail::mean_of(out.per_image_mean));
  return out;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct MetricsReport {
  ModelKind model_kind = ModelKind::sparse_coding;
  std::vector<double> percent_active_per_image;      // exact nonzero
  std::vector<double> percent_active_eps_per_image;  // |a| > 1e-12
  std::vector<double> usage_frequency_per_element;
  std::vector<double> intra_mean_per_image;
  double crosscorr_mean = 0.0;
  double crosscorr_intra_std = 0.0;
  double crosscorr_inter_std = 0.0;
  double crosscorr_pooled_std = 0.0;
  // Totals behind the usage/percent-active accounting identity.
  std::uint64_t nonzero_total = 0;
  std::uint64_t sites_per_image = 0;
};

inline constexpr double kActiveEpsilon = 1e-12;

inline MetricsReport analyze_codes(std::span<const ActivationTensor> codes,
                                   const EncodingInfo& info) {
  MetricsReport r;
  r.model_kind = info.kind;
  const CrossCorrStats cc = corpus_crosscorr(codes, info);
  r.crosscorr_mean = cc.mean;
  r.crosscorr_intra_std = cc.intra_std;
  r.crosscorr_inter_std = cc.inter_std;
  r.crosscorr_pooled_std = cc.pooled_std;
  r.intra_mean_per_image = cc.per_image_mean;
  r.usage_frequency_per_element = usage_frequency(codes);
  r.sites_per_image = codes[0].rows() * codes[0].cols();
  for (const auto& a : codes) {
    if (a.rows() * a.cols() != r.sites_per_image) {
      throw DimensionError("map size differs between images");
    }
    r.percent_active_per_image.push_back(percent_active(a));
    r.percent_active_eps_per_image.push_back(percent_active(a, kActiveEpsilon));
    r.nonzero_total += count_nonzero(a);
  }
  return r;
}

// Recovers the nonzero total twice, once from usage frequencies and once from
// per-image percent-active, and reports whether both equal the direct count.
struct AccountingCheck {
  std::uint64_t from_usage = 0;
  std::uint64_t from_percent_active = 0;
  std::uint64_t direct = 0;
  bool holds() const { return from_usage == direct && from_percent_active == direct; }
};

inline AccountingCheck accounting_identity(const MetricsReport& r) {
  AccountingCheck c;
  c.direct = r.nonzero_total;
  const double images = static_cast<double>(r.percent_active_per_image.size());
  const double sites = static_cast<double>(r.sites_per_image);
  const double K = static_cast<double>(r.usage_frequency_per_element.size());
  for (double u : r.usage_frequency_per_element) {
    c.from_usage += static_cast<std::uint64_t>(std::llround(u * images * sites));
  }
  for (double p : r.percent_active_per_image) {
    c.from_percent_active += static_cast<std::uint64_t>(std::llround(p * sites * K));
  }
  return c;
}

}  // namespace lcasc
