#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lcasc/error.hpp"
#include "lcasc/tensor.hpp"

namespace lcasc {

enum class ThresholdMode { signed_soft, nonneg_soft };

struct LcaConfig {
  double lambda = 0.5;
  // Euler step as a fraction of the leak time constant.
  double step_size = 0.05;
  std::size_t max_steps = 600;
  // Stop once the mean |delta u| of a step falls below this.
  double tolerance = 1e-6;
  ThresholdMode mode = ThresholdMode::signed_soft;
  // Deterministic perturbation of the initial potentials; breaks ties between
  // duplicate elements.
  std::uint64_t jitter_seed = 0;
  double jitter = 1e-9;

  void validate() const {
    if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be >= 0");
    if (!(step_size > 0.0 && step_size <= 1.0)) {
      throw InvalidArgument("step_size must lie in (0, 1]");
    }
    if (max_steps == 0) throw InvalidArgument("max_steps must be positive");
    if (!(tolerance >= 0.0)) throw InvalidArgument("tolerance must be >= 0");
  }
};

struct LcaState {
  ActivationTensor u;  // membrane potentials
  ActivationTensor a;  // threshold(u, lambda)
  std::vector<double> energy_trace;
  std::size_t steps_taken = 0;
  bool converged = false;
};

inline constexpr double kDivergenceLimit = 1e6;

inline double threshold(double u, double lambda, ThresholdMode mode) {
  if (mode == ThresholdMode::nonneg_soft) return u > lambda ? u - lambda : 0.0;
  if (u > lambda) return u - lambda;
  if (u < -lambda) return u + lambda;
  return 0.0;
}

inline ActivationTensor threshold(const ActivationTensor& u, double lambda, ThresholdMode mode) {
  ActivationTensor out(u.rows(), u.cols(), u.depth());
  const auto in = u.values();
  auto o = out.values();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = threshold(in[i], lambda, mode);
  return out;
}

// 1/2 ||x - Phi a||^2 + lambda ||a||_1
inline double energy(const ImageTensor& image, const Dictionary& dict, const ActivationTensor& acts,
                     double lambda) {
  const ImageTensor recon = conv_transpose(acts, dict, image.rows(), image.cols());
  const ImageTensor residual = subtract(image, recon);
  return 0.5 * squared_norm(residual.values()) + lambda * l1_norm(acts.values());
}

// Lateral inhibition Phi^T Phi a - a, evaluated through the two strided maps.
inline ActivationTensor inhibition(const ActivationTensor& a, const Dictionary& dict,
                                   std::size_t height, std::size_t width) {
  ActivationTensor out = correlate(conv_transpose(a, dict, height, width), dict);
  auto o = out.values();
  const auto av = a.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= av[i];
  return out;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in [-1, 1), a pure function of (seed, index).
inline double unit_jitter(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t h = splitmix64(splitmix64(seed) ^ index);
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

inline void check_potentials(std::span<const double> u) {
  for (double v : u) {
    if (!(std::abs(v) <= kDivergenceLimit)) {
      throw DivergenceError("LCA potentials exceeded 1e6; reduce step_size");
    }
  }
}

}  // namespace detail

// Initial state of a solve: jittered potentials, thresholded activations.
inline LcaState initial_state(std::size_t rows, std::size_t cols, std::size_t K,
                              const LcaConfig& cfg) {
  LcaState st;
  st.u = ActivationTensor(rows, cols, K);
  auto u = st.u.values();
  if (cfg.jitter != 0.0) {
    for (std::size_t i = 0; i < u.size(); ++i) {
      u[i] = cfg.jitter * detail::unit_jitter(cfg.jitter_seed, i);
    }
  }
  st.a = threshold(st.u, cfg.lambda, cfg.mode);
  return st;
}

// One explicit Euler step of
//   du/dt = -u + Phi^T x - (Phi^T Phi a - a),   a = T_lambda(u)
// using the reference inhibition route. `drive` must be correlate(image, dict).
inline LcaState lca_step(const LcaState& state, const ActivationTensor& drive,
                         const Dictionary& dict, const ImageTensor& image, const LcaConfig& cfg) {
  if (!state.u.same_shape(drive) || !state.a.same_shape(drive)) {
    throw DimensionError("lca_step: state shape " + state.u.shape_string() +
                         " does not match drive " + drive.shape_string());
  }
  const ActivationTensor inh = inhibition(state.a, dict, image.rows(), image.cols());
  LcaState next;
  next.u = state.u;
  auto u = next.u.values();
  const auto b = drive.values();
  const auto g = inh.values();
  for (std::size_t i = 0; i < u.size(); ++i) u[i] += cfg.step_size * (-u[i] + b[i] - g[i]);
  detail::check_potentials(u);
  next.a = threshold(next.u, cfg.lambda, cfg.mode);
  next.energy_trace = state.energy_trace;
  next.energy_trace.push_back(energy(image, dict, next.a, cfg.lambda));
  next.steps_taken = state.steps_taken + 1;
  return next;
}

// Inner products between every pair of elements at every relative placement
// where their footprints overlap. Inhibition of a sparse code then costs
// O(nnz * offsets * K) instead of two dense strided passes.
class LocalGram {
 public:
  explicit LocalGram(const Dictionary& dict)
      : K_(dict.num_elements()),
        reach_((dict.patch() - 1) / dict.stride()),
        span_(2 * reach_ + 1),
        values_(span_ * span_ * K_ * K_, 0.0) {
    const std::size_t p = dict.patch();
    const std::size_t s = dict.stride();
    const std::size_t C = dict.channels();
    const auto R = static_cast<std::ptrdiff_t>(reach_);
    for (std::ptrdiff_t dy = -R; dy <= R; ++dy) {
      for (std::ptrdiff_t dx = -R; dx <= R; ++dx) {
        // Element j sits at (dy*s, dx*s) relative to element k.
        const std::ptrdiff_t oy = dy * static_cast<std::ptrdiff_t>(s);
        const std::ptrdiff_t ox = dx * static_cast<std::ptrdiff_t>(s);
        const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, oy);
        const std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(p, oy + static_cast<std::ptrdiff_t>(p));
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, ox);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(p, ox + static_cast<std::ptrdiff_t>(p));
        double* block = values_.data() + offset_index(dy, dx) * K_ * K_;
        for (std::size_t j = 0; j < K_; ++j) {
          const auto ej = dict.element(j);
          for (std::size_t k = 0; k < K_; ++k) {
            const auto ek = dict.element(k);
            double acc = 0.0;
            for (std::ptrdiff_t y = y0; y < y1; ++y) {
              const std::size_t rk = static_cast<std::size_t>(y) * p;
              const std::size_t rj = static_cast<std::size_t>(y - oy) * p;
              for (std::ptrdiff_t x = x0; x < x1; ++x) {
                const std::size_t ik = (rk + static_cast<std::size_t>(x)) * C;
                const std::size_t ij = (rj + static_cast<std::size_t>(x - ox)) * C;
                for (std::size_t ch = 0; ch < C; ++ch) acc += ek[ik + ch] * ej[ij + ch];
              }
            }
            block[j * K_ + k] = acc;
          }
        }
      }
    }
  }

  std::size_t reach() const { return reach_; }

  // <element k at the origin, element j displaced by (dy, dx) sites>.
  double at(std::ptrdiff_t dy, std::ptrdiff_t dx, std::size_t j, std::size_t k) const {
    return values_[(offset_index(dy, dx) * K_ + j) * K_ + k];
  }

  // out <- Phi^T Phi a - a
  void inhibit(const ActivationTensor& a, ActivationTensor& out) const {
    out.fill(0.0);
    const auto R = static_cast<std::ptrdiff_t>(reach_);
    const auto rows = static_cast<std::ptrdiff_t>(a.rows());
    const auto cols = static_cast<std::ptrdiff_t>(a.cols());
    const auto span = static_cast<std::ptrdiff_t>(span_);
    const std::size_t K = K_;
    const double* av = a.data();
    double* const o = out.data();
    for (std::ptrdiff_t r2 = 0; r2 < rows; ++r2) {
      // Target rows r = r2 - dy must stay inside the map.
      const std::ptrdiff_t dy_lo = std::max(-R, r2 - rows + 1);
      const std::ptrdiff_t dy_hi = std::min(R, r2);
      for (std::ptrdiff_t c2 = 0; c2 < cols; ++c2) {
        const std::ptrdiff_t dx_lo = std::max(-R, c2 - cols + 1);
        const std::ptrdiff_t dx_hi = std::min(R, c2);
        const double* fib = av + static_cast<std::size_t>(r2 * cols + c2) * K;
        for (std::size_t j = 0; j < K; ++j) {
          const double v = fib[j];
          if (v == 0.0) continue;
          for (std::ptrdiff_t dy = dy_lo; dy <= dy_hi; ++dy) {
            for (std::ptrdiff_t dx = dx_lo; dx <= dx_hi; ++dx) {
              const double* g =
                  values_.data() +
                  (static_cast<std::size_t>((dy + R) * span + (dx + R)) * K + j) * K;
              double* dst = o + static_cast<std::size_t>((r2 - dy) * cols + (c2 - dx)) * K;
              detail::axpy_restrict(K, v, g, dst);
            }
          }
        }
      }
    }
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) o[i] -= av[i];
  }

 private:
  std::size_t offset_index(std::ptrdiff_t dy, std::ptrdiff_t dx) const {
    const auto R = static_cast<std::ptrdiff_t>(reach_);
    return static_cast<std::size_t>((dy + R) * static_cast<std::ptrdiff_t>(span_) + (dx + R));
  }

  std::size_t K_;
  std::size_t reach_;
  std::size_t span_;
  std::vector<double> values_;  // [offset][j][k]
};

// Sparse coder bound to one dictionary. Construction precomputes the local
// Gram tensor; encode() may then be called concurrently on distinct images.
class LcaSolver {
 public:
  LcaSolver(Dictionary dict, LcaConfig cfg)
      : dict_(std::move(dict)), cfg_(cfg), gram_(dict_) {
    cfg_.validate();
  }

  const LcaConfig& config() const { return cfg_; }
  const Dictionary& dictionary() const { return dict_; }
  const LocalGram& gram() const { return gram_; }

  // Integrates from (jittered) zero potentials until the mean |delta u| drops
  // below the tolerance or max_steps is reached. Non-convergence is reported
  // through LcaState::converged, not thrown.
  LcaState encode(const ImageTensor& image) const {
    const ActivationTensor drive = correlate(image, dict_);
    LcaState st = initial_state(drive.rows(), drive.cols(), drive.depth(), cfg_);
    const double half_xx = 0.5 * squared_norm(image.values());
    const double eta = cfg_.step_size;
    const double lambda = cfg_.lambda;

    ActivationTensor inh(drive.rows(), drive.cols(), drive.depth());
    gram_.inhibit(st.a, inh);

    auto u = st.u.values();
    auto a = st.a.values();
    const auto b = drive.values();
    const auto g = inh.values();
    const double n = static_cast<double>(u.size());
    st.energy_trace.reserve(cfg_.max_steps);

    for (std::size_t t = 0; t < cfg_.max_steps; ++t) {
      double moved = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double du = eta * (-u[i] + b[i] - g[i]);
        u[i] += du;
        moved += std::abs(du);
        a[i] = threshold(u[i], lambda, cfg_.mode);
      }
      detail::check_potentials(u);
      gram_.inhibit(st.a, inh);

      // E = 1/2|x|^2 - <a, b> + 1/2 <a, (G - I) a + a> + lambda |a|_1
      double ab = 0.0, aga = 0.0, l1 = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0.0) continue;
        ab += a[i] * b[i];
        aga += a[i] * (g[i] + a[i]);
        l1 += std::abs(a[i]);
      }
      st.energy_trace.push_back(half_xx - ab + 0.5 * aga + lambda * l1);
      st.steps_taken = t + 1;
      if (moved / n < cfg_.tolerance) {
        st.converged = true;
        break;
      }
    }
    return st;
  }

 private:
  Dictionary dict_;
  LcaConfig cfg_;
  LocalGram gram_;
};

inline LcaState encode(const ImageTensor& image, const Dictionary& dict, const LcaConfig& cfg) {
  return LcaSolver(dict, cfg).encode(image);
}

}  // namespace lcasc
