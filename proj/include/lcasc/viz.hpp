#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "lcasc/error.hpp"
#include "lcasc/tensor.hpp"

namespace lcasc {

enum class Colormap { grayscale, signed_diverging };

struct RenderConfig {
  // Pixels per dictionary element side in montages; 0 means one pixel per tap.
  std::size_t cell_size = 0;
  Colormap colormap = Colormap::grayscale;
  double overlay_alpha = 0.6;

  void validate() const {
    if (!(overlay_alpha >= 0.0 && overlay_alpha <= 1.0)) {
      throw InvalidArgument("overlay alpha must lie in [0, 1]");
    }
  }
};

using Rgb = std::array<double, 3>;

// t in [-1, 1]: blue through white to red.
inline Rgb diverging_color(double t) {
  t = std::clamp(t, -1.0, 1.0);
  if (t >= 0.0) return {1.0, 1.0 - t, 1.0 - t};
  return {1.0 + t, 1.0 + t, 1.0};
}

// t in [0, 1]; positive activations run red to yellow, negative ones blue to cyan.
inline Rgb heat_color(double t, bool negative) {
  t = std::clamp(t, 0.0, 1.0);
  return negative ? Rgb{0.0, t, 1.0} : Rgb{1.0, t, 0.0};
}

// ---------------------------------------------------------------------------
// Montage
// ---------------------------------------------------------------------------

struct MontageLayout {
  std::size_t grid = 0;  // cells per row and per column
  std::size_t cell = 0;  // cell side in pixels
  std::size_t side = 0;  // image side: grid cells plus 1-pixel separators between them

  std::size_t origin(std::size_t index) const { return index * (cell + 1); }
  std::size_t row_of(std::size_t k) const { return origin(k / grid); }
  std::size_t col_of(std::size_t k) const { return origin(k % grid); }
};

inline constexpr double kSeparatorValue = 1.0;

inline MontageLayout montage_layout(const DictShape& d, const RenderConfig& cfg) {
  MontageLayout l;
  l.grid = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d.num_elements))));
  while (l.grid * l.grid < d.num_elements) ++l.grid;
  while (l.grid > 1 && (l.grid - 1) * (l.grid - 1) >= d.num_elements) --l.grid;
  l.cell = cfg.cell_size == 0 ? d.patch : cfg.cell_size;
  l.side = l.grid * l.cell + (l.grid - 1);
  return l;
}

// Output has one channel for single-channel grayscale dictionaries and three
// otherwise. Each element is scaled independently: min-max to [0, 1] for
// grayscale, by its largest magnitude around zero for the diverging map.
// Cells past K and the separators are white.
inline ImageTensor montage(const Dictionary& dict, const RenderConfig& cfg = {}) {
  cfg.validate();
  const DictShape& d = dict.shape();
  const MontageLayout l = montage_layout(d, cfg);
  const bool rgb_out = d.channels != 1 || cfg.colormap == Colormap::signed_diverging;
  const std::size_t C = rgb_out ? 3 : 1;
  ImageTensor out(l.side, l.side, C, kSeparatorValue);

  for (std::size_t k = 0; k < d.num_elements; ++k) {
    const auto e = dict.element(k);
    const auto [mn, mx] = std::minmax_element(e.begin(), e.end());
    const double lo = *mn, hi = *mx;
    const double amax = std::max(std::abs(lo), std::abs(hi));
    const std::size_t y0 = l.row_of(k), x0 = l.col_of(k);
    for (std::size_t y = 0; y < l.cell; ++y) {
      const std::size_t py = y * d.patch / l.cell;
      for (std::size_t x = 0; x < l.cell; ++x) {
        const std::size_t px = x * d.patch / l.cell;
        const double* tap = e.data() + (py * d.patch + px) * d.channels;
        if (cfg.colormap == Colormap::grayscale) {
          for (std::size_t c = 0; c < C; ++c) {
            const double v = tap[d.channels == 1 ? 0 : c];
            out(y0 + y, x0 + x, c) = hi > lo ? (v - lo) / (hi - lo) : 0.5;
          }
        } else if (d.channels == 1) {
          const Rgb col = diverging_color(amax > 0.0 ? tap[0] / amax : 0.0);
          for (std::size_t c = 0; c < 3; ++c) out(y0 + y, x0 + x, c) = col[c];
        } else {
          for (std::size_t c = 0; c < 3; ++c) {
            out(y0 + y, x0 + x, c) = amax > 0.0 ? 0.5 + 0.5 * tap[c] / amax : 0.5;
          }
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Activation maps
// ---------------------------------------------------------------------------

inline ImageTensor as_rgb(const ImageTensor& image) {
  if (image.depth() == 3) return image;
  if (image.depth() != 1) {
    throw DimensionError("channels: expected 1 or 3, got " + std::to_string(image.depth()));
  }
  ImageTensor out(image.rows(), image.cols(), 3);
  for (std::size_t y = 0; y < image.rows(); ++y) {
    for (std::size_t x = 0; x < image.cols(); ++x) {
      for (std::size_t c = 0; c < 3; ++c) out(y, x, c) = image(y, x, 0);
    }
  }
  return out;
}

// Min-max stretch of the whole image to [0, 1]; constant images map to 0.5.
inline ImageTensor to_display(const ImageTensor& image) {
  ImageTensor out = image;
  if (image.empty()) return out;
  const auto v = image.values();
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  const double lo = *mn, hi = *mx;
  for (double& x : out.values()) x = hi > lo ? (x - lo) / (hi - lo) : 0.5;
  return out;
}

inline void check_element_index(const ActivationTensor& acts, std::size_t k) {
  if (k >= acts.depth()) {
    throw InvalidArgument("element index " + std::to_string(k) + " out of range (K = " +
                          std::to_string(acts.depth()) + ")");
  }
}

// Alpha-blends a heat colour over every pixel inside the receptive field of a
// site where element k is active. Where fields overlap, the strongest
// response wins. Pixels outside all active fields are copied unchanged.
inline ImageTensor overlay(const ImageTensor& image, const ActivationTensor& acts, std::size_t k,
                           std::size_t patch, std::size_t stride, const RenderConfig& cfg = {}) {
  cfg.validate();
  check_element_index(acts, k);
  const std::size_t H = image.rows(), W = image.cols();
  if (map_extent(H, patch, stride, "height") != acts.rows() ||
      map_extent(W, patch, stride, "width") != acts.cols()) {
    throw DimensionError("overlay: activation map " + acts.shape_string() +
                         " does not match image " + image.shape_string());
  }
  ImageTensor out = as_rgb(image);
  if (cfg.overlay_alpha == 0.0) return out;

  double amax = 0.0;
  for (std::size_t r = 0; r < acts.rows(); ++r) {
    for (std::size_t c = 0; c < acts.cols(); ++c) amax = std::max(amax, std::abs(acts(r, c, k)));
  }
  if (amax == 0.0) return out;

  std::vector<double> strongest(H * W, 0.0);
  for (std::size_t r = 0; r < acts.rows(); ++r) {
    for (std::size_t c = 0; c < acts.cols(); ++c) {
      const double v = acts(r, c, k);
      if (v == 0.0) continue;
      for (std::size_t y = r * stride; y < r * stride + patch; ++y) {
        for (std::size_t x = c * stride; x < c * stride + patch; ++x) {
          double& s = strongest[y * W + x];
          if (std::abs(v) > std::abs(s)) s = v;
        }
      }
    }
  }
  const double alpha = cfg.overlay_alpha;
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const double s = strongest[y * W + x];
      if (s == 0.0) continue;
      const Rgb heat = heat_color(std::abs(s) / amax, s < 0.0);
      for (std::size_t c = 0; c < 3; ++c) {
        out(y, x, c) = (1.0 - alpha) * out(y, x, c) + alpha * heat[c];
      }
    }
  }
  return out;
}

// Map k alone, each site drawn as a scale x scale block.
inline ImageTensor heatmap(const ActivationTensor& acts, std::size_t k, std::size_t scale,
                           const RenderConfig& cfg = {}) {
  check_element_index(acts, k);
  if (scale == 0) throw InvalidArgument("heatmap scale must be positive");
  double amax = 0.0;
  for (std::size_t r = 0; r < acts.rows(); ++r) {
    for (std::size_t c = 0; c < acts.cols(); ++c) amax = std::max(amax, std::abs(acts(r, c, k)));
  }
  ImageTensor out(acts.rows() * scale, acts.cols() * scale, 3);
  for (std::size_t y = 0; y < out.rows(); ++y) {
    for (std::size_t x = 0; x < out.cols(); ++x) {
      const double t = amax > 0.0 ? acts(y / scale, x / scale, k) / amax : 0.0;
      const Rgb col = cfg.colormap == Colormap::signed_diverging ? diverging_color(t)
                                                                  : Rgb{std::abs(t), std::abs(t), std::abs(t)};
      for (std::size_t c = 0; c < 3; ++c) out(y, x, c) = col[c];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bar charts
// ---------------------------------------------------------------------------

struct ChartConfig {
  bool omit_zero = true;
  std::size_t bar_width = 6;
  std::size_t gap = 2;
  std::size_t plot_height = 120;
  std::size_t margin = 4;
};

struct BarLayout {
  std::size_t index = 0;   // position in the input sequence
  std::size_t x = 0;       // left column
  std::size_t height = 0;  // pixels above or below the baseline
  bool negative = false;
};

struct ChartResult {
  ImageTensor image;
  std::vector<BarLayout> bars;
  std::size_t baseline = 0;  // row of the zero axis
  std::size_t scale = 0;     // pixels corresponding to the largest magnitude
};

inline constexpr Rgb kPositiveBar{0.15, 0.35, 0.75};
inline constexpr Rgb kNegativeBar{0.8, 0.2, 0.15};

inline ChartResult bar_chart(std::span<const double> values, const ChartConfig& cfg) {
  if (cfg.bar_width == 0 || cfg.plot_height < 2) throw InvalidArgument("chart too small");
  double amax = 0.0;
  bool any_neg = false, any_pos = false;
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidArgument("chart values must be finite");
    amax = std::max(amax, std::abs(v));
    any_neg |= v < 0.0;
    any_pos |= v > 0.0;
  }
  std::vector<std::size_t> shown;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!cfg.omit_zero || values[i] != 0.0) shown.push_back(i);
  }

  ChartResult res;
  const std::size_t m = cfg.margin;
  const std::size_t slot = cfg.bar_width + cfg.gap;
  const std::size_t width = 2 * m + std::max<std::size_t>(shown.size(), 1) * slot + 1;
  const std::size_t height = 2 * m + cfg.plot_height + 1;
  const bool split = any_neg && any_pos;
  res.scale = split ? cfg.plot_height / 2 : cfg.plot_height;
  res.baseline = m + (split ? cfg.plot_height / 2 : (any_neg ? 0 : cfg.plot_height));
  res.image = ImageTensor(height, width, 3, 1.0);

  for (std::size_t x = m; x < width - m; ++x) {
    for (std::size_t c = 0; c < 3; ++c) res.image(res.baseline, x, c) = 0.0;
  }
  for (std::size_t y = m; y <= m + cfg.plot_height; ++y) {
    for (std::size_t c = 0; c < 3; ++c) res.image(y, m, c) = 0.0;
  }

  for (std::size_t j = 0; j < shown.size(); ++j) {
    const double v = values[shown[j]];
    BarLayout b;
    b.index = shown[j];
    b.x = m + 1 + j * slot + cfg.gap / 2;
    b.negative = v < 0.0;
    b.height = amax > 0.0
                   ? static_cast<std::size_t>(std::lround(std::abs(v) / amax * static_cast<double>(res.scale)))
                   : 0;
    const Rgb col = b.negative ? kNegativeBar : kPositiveBar;
    for (std::size_t h = 1; h <= b.height; ++h) {
      const std::size_t y = b.negative ? res.baseline + h : res.baseline - h;
      for (std::size_t x = b.x; x < b.x + cfg.bar_width; ++x) {
        for (std::size_t c = 0; c < 3; ++c) res.image(y, x, c) = col[c];
      }
    }
    res.bars.push_back(b);
  }
  return res;
}

// Coefficients of all K elements at one site.
inline ChartResult coeff_chart(const ActivationTensor& acts, std::size_t row, std::size_t col,
                               const ChartConfig& cfg = {}) {
  if (row >= acts.rows() || col >= acts.cols()) {
    throw InvalidArgument("site (" + std::to_string(row) + ", " + std::to_string(col) +
                          ") outside map " + acts.shape_string());
  }
  return bar_chart(acts.fiber(row, col), cfg);
}

// ---------------------------------------------------------------------------
// Histograms
// ---------------------------------------------------------------------------

struct Histogram {
  std::vector<double> edges;  // bins + 1 values
  std::vector<std::uint64_t> counts;
  std::uint64_t outside = 0;  // values beyond an explicit range
};

// Equal-width bins over [lo, hi]; the last bin is closed. Without an explicit
// range the data span is used, widened to [v, v + 1] when all values are equal.
inline Histogram histogram(std::span<const double> values, std::size_t bins,
                           std::optional<std::pair<double, double>> range = std::nullopt) {
  if (bins == 0) throw InvalidArgument("histogram needs at least one bin");
  if (values.empty()) throw InvalidArgument("histogram of an empty sequence");
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidArgument("histogram values must be finite");
  }
  double lo, hi;
  if (range) {
    std::tie(lo, hi) = *range;
    if (!(hi > lo)) throw InvalidArgument("histogram range must satisfy lo < hi");
  } else {
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    lo = *mn;
    hi = *mx > *mn ? *mx : *mn + 1.0;
  }
  Histogram h;
  h.counts.assign(bins, 0);
  h.edges.resize(bins + 1);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = lo + width * static_cast<double>(i);
  h.edges[bins] = hi;
  for (double v : values) {
    if (v < lo || v > hi) {
      ++h.outside;
      continue;
    }
    auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
    h.counts[std::min(b, bins - 1)]++;
  }
  return h;
}

inline ChartResult render_histogram(const Histogram& h, ChartConfig cfg = {}) {
  cfg.omit_zero = false;
  std::vector<double> heights(h.counts.begin(), h.counts.end());
  return bar_chart(heights, cfg);
}

}  // namespace lcasc
