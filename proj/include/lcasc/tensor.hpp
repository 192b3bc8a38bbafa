#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lcasc/error.hpp"

namespace lcasc {

// ---------------------------------------------------------------------------
// Flat vector helpers. Reductions run strictly left to right so a given build
// always produces the same bits.
// ---------------------------------------------------------------------------

namespace detail {
inline void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": length mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
  }
}
}  // namespace detail

inline double dot(std::span<const double> a, std::span<const double> b) {
  detail::require_same_length(a.size(), b.size(), "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// y <- alpha * x + y
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  detail::require_same_length(x.size(), y.size(), "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(double alpha, std::span<double> x) {
  for (double& v : x) v *= alpha;
}

// y <- x + y
inline void add(std::span<const double> x, std::span<double> y) {
  detail::require_same_length(x.size(), y.size(), "add");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += x[i];
}

inline double squared_norm(std::span<const double> x) { return dot(x, x); }

inline double l1_norm(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += std::abs(v);
  return acc;
}

// |a - b| / max(|a|, |b|, floor). The floor keeps entries that are zero up to
// rounding from dominating gradient checks.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline bool all_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Rank-3 dense tensors, row-major by (row, col, depth).
// ---------------------------------------------------------------------------

template <class Tag>
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t rows, std::size_t cols, std::size_t depth, double fill = 0.0)
      : rows_(rows), cols_(cols), depth_(depth), data_(rows * cols * depth, fill) {}
  Tensor3(std::size_t rows, std::size_t cols, std::size_t depth, std::vector<double> data)
      : rows_(rows), cols_(cols), depth_(depth), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_ * depth_) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string());
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t depth() const { return depth_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c, std::size_t d) {
    return data_[(r * cols_ + c) * depth_ + d];
  }
  const double& operator()(std::size_t r, std::size_t c, std::size_t d) const {
    return data_[(r * cols_ + c) * depth_ + d];
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  // The depth vector at one (row, col) site.
  std::span<double> fiber(std::size_t r, std::size_t c) {
    return {data_.data() + (r * cols_ + c) * depth_, depth_};
  }
  std::span<const double> fiber(std::size_t r, std::size_t c) const {
    return {data_.data() + (r * cols_ + c) * depth_, depth_};
  }

  bool same_shape(const Tensor3& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && depth_ == o.depth_;
  }

  std::string shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_) + "x" + std::to_string(depth_);
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t depth_ = 0;
  std::vector<double> data_;
};

struct ImageTag {};
struct ActivationTag {};

// Signal x: height x width x channels.
using ImageTensor = Tensor3<ImageTag>;
// Code a: map_height x map_width x K.
using ActivationTensor = Tensor3<ActivationTag>;

// ---------------------------------------------------------------------------
// Convolutional dictionary: K square elements of patch x patch x channels,
// stored element-major, each element row-major by (row, col, channel).
// ---------------------------------------------------------------------------

struct DictShape {
  std::size_t num_elements = 0;
  std::size_t patch = 0;
  std::size_t channels = 0;
  std::size_t stride = 0;

  std::size_t element_size() const { return patch * patch * channels; }
  std::size_t total_size() const { return num_elements * element_size(); }
  friend bool operator==(const DictShape&, const DictShape&) = default;
};

class Dictionary {
 public:
  Dictionary() = default;
  explicit Dictionary(DictShape shape) : shape_(shape), data_(shape.total_size(), 0.0) {
    validate_shape();
  }
  Dictionary(DictShape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    validate_shape();
    if (data_.size() != shape_.total_size()) {
      throw DimensionError("dictionary data length " + std::to_string(data_.size()) +
                           " does not match " + std::to_string(shape_.total_size()));
    }
  }

  const DictShape& shape() const { return shape_; }
  std::size_t num_elements() const { return shape_.num_elements; }
  std::size_t patch() const { return shape_.patch; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t stride() const { return shape_.stride; }
  std::size_t element_size() const { return shape_.element_size(); }

  std::span<double> element(std::size_t k) {
    return {data_.data() + k * element_size(), element_size()};
  }
  std::span<const double> element(std::size_t k) const {
    return {data_.data() + k * element_size(), element_size()};
  }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  // Scale every element to unit L2 norm. Zero elements are left untouched.
  void normalize_elements() {
    for (std::size_t k = 0; k < num_elements(); ++k) {
      auto e = element(k);
      const double n = std::sqrt(squared_norm(e));
      if (n > 0.0) scale(1.0 / n, e);
    }
  }

  friend bool operator==(const Dictionary&, const Dictionary&) = default;

 private:
  void validate_shape() const {
    if (shape_.num_elements == 0 || shape_.patch == 0 || shape_.channels == 0 ||
        shape_.stride == 0) {
      throw InvalidArgument("dictionary dimensions must be positive");
    }
  }

  DictShape shape_;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

// Number of valid patch placements along one axis.
inline std::size_t map_extent(std::size_t image_side, std::size_t patch, std::size_t stride,
                              const char* axis) {
  if (image_side < patch) {
    throw DimensionError(std::string(axis) + ": image extent " + std::to_string(image_side) +
                         " is smaller than patch " + std::to_string(patch));
  }
  if ((image_side - patch) % stride != 0) {
    throw DimensionError(std::string(axis) + ": stride " + std::to_string(stride) +
                         " does not divide (extent " + std::to_string(image_side) + " - patch " +
                         std::to_string(patch) + ")");
  }
  return (image_side - patch) / stride + 1;
}

inline std::size_t image_extent(std::size_t map_side, std::size_t patch, std::size_t stride) {
  return (map_side - 1) * stride + patch;
}

struct MapShape {
  std::size_t rows = 0;
  std::size_t cols = 0;
};

inline MapShape code_shape(std::size_t height, std::size_t width, const DictShape& d) {
  return {map_extent(height, d.patch, d.stride, "height"),
          map_extent(width, d.patch, d.stride, "width")};
}

inline void check_image_against(const ImageTensor& image, const DictShape& d) {
  if (image.depth() != d.channels) {
    throw DimensionError("channels: image has " + std::to_string(image.depth()) +
                         ", dictionary has " + std::to_string(d.channels));
  }
  (void)code_shape(image.rows(), image.cols(), d);
}

inline void check_code_against(const ActivationTensor& acts, const DictShape& d, std::size_t height,
                               std::size_t width) {
  const MapShape m = code_shape(height, width, d);
  if (acts.depth() != d.num_elements) {
    throw DimensionError("elements: code has " + std::to_string(acts.depth()) +
                         ", dictionary has " + std::to_string(d.num_elements));
  }
  if (acts.rows() != m.rows) {
    throw DimensionError("map height: code has " + std::to_string(acts.rows()) + ", expected " +
                         std::to_string(m.rows));
  }
  if (acts.cols() != m.cols) {
    throw DimensionError("map width: code has " + std::to_string(acts.cols()) + ", expected " +
                         std::to_string(m.cols));
  }
}

namespace detail {

// Element-interleaved copy of the dictionary: out[i * K + k] = element k, entry i.
inline std::vector<double> interleave(const Dictionary& dict) {
  const std::size_t K = dict.num_elements();
  const std::size_t P = dict.element_size();
  std::vector<double> out(P * K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto e = dict.element(k);
    for (std::size_t i = 0; i < P; ++i) out[i * K + k] = e[i];
  }
  return out;
}

inline void axpy_raw(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// Same as axpy_raw for buffers known not to overlap.
inline void axpy_restrict(std::size_t n, double alpha, const double* __restrict x,
                          double* __restrict y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace detail

// Analysis map: out[r, c, k] = <element k, image patch at (r*stride, c*stride)>.
inline ActivationTensor correlate(const ImageTensor& image, const Dictionary& dict) {
  check_image_against(image, dict.shape());
  const MapShape m = code_shape(image.rows(), image.cols(), dict.shape());
  const std::size_t K = dict.num_elements();
  const std::size_t p = dict.patch();
  const std::size_t s = dict.stride();
  const std::size_t row_len = p * image.depth();
  const std::vector<double> wt = detail::interleave(dict);

  ActivationTensor out(m.rows, m.cols, K);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      double* acc = out.fiber(r, c).data();
      for (std::size_t py = 0; py < p; ++py) {
        const double* src = &image(r * s + py, c * s, 0);
        const double* w = wt.data() + py * row_len * K;
        for (std::size_t q = 0; q < row_len; ++q) {
          detail::axpy_raw(K, src[q], w + q * K, acc);
        }
      }
    }
  }
  return out;
}

// Synthesis map: overlap-add of every coefficient times its element placed at
// (r*stride, c*stride). Adjoint of correlate.
inline ImageTensor conv_transpose(const ActivationTensor& acts, const Dictionary& dict,
                                  std::size_t out_h, std::size_t out_w) {
  check_code_against(acts, dict.shape(), out_h, out_w);
  const std::size_t K = dict.num_elements();
  const std::size_t p = dict.patch();
  const std::size_t s = dict.stride();
  const std::size_t C = dict.channels();
  const std::size_t row_len = p * C;

  ImageTensor out(out_h, out_w, C);
  for (std::size_t r = 0; r < acts.rows(); ++r) {
    for (std::size_t c = 0; c < acts.cols(); ++c) {
      const auto a = acts.fiber(r, c);
      for (std::size_t k = 0; k < K; ++k) {
        const double v = a[k];
        if (v == 0.0) continue;
        const double* e = dict.element(k).data();
        for (std::size_t py = 0; py < p; ++py) {
          detail::axpy_raw(row_len, v, e + py * row_len, &out(r * s + py, c * s, 0));
        }
      }
    }
  }
  return out;
}

// blocks[k] = sum over sites of coeffs[r, c, k] * (image patch at that site).
// Shared by the dictionary gradient and the autoencoder encoder gradient.
inline Dictionary patch_coefficient_products(const ImageTensor& image,
                                             const ActivationTensor& coeffs,
                                             const DictShape& shape) {
  check_image_against(image, shape);
  check_code_against(coeffs, shape, image.rows(), image.cols());
  const std::size_t p = shape.patch;
  const std::size_t s = shape.stride;
  const std::size_t row_len = p * shape.channels;

  Dictionary out(shape);
  for (std::size_t r = 0; r < coeffs.rows(); ++r) {
    for (std::size_t c = 0; c < coeffs.cols(); ++c) {
      const auto a = coeffs.fiber(r, c);
      for (std::size_t k = 0; k < shape.num_elements; ++k) {
        const double v = a[k];
        if (v == 0.0) continue;
        double* blk = out.element(k).data();
        for (std::size_t py = 0; py < p; ++py) {
          detail::axpy_raw(row_len, v, &image(r * s + py, c * s, 0), blk + py * row_len);
        }
      }
    }
  }
  return out;
}

inline ImageTensor subtract(const ImageTensor& a, const ImageTensor& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("subtract: shape " + a.shape_string() + " vs " + b.shape_string());
  }
  ImageTensor out = a;
  auto o = out.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return out;
}

}  // namespace lcasc
