#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace logitcal {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// Dense row-major float tensor (last axis fastest).
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, float fill = 0.0f)
      : shape_(std::move(shape)), data_(checked_numel(shape_), fill) {}

  Tensor(Shape shape, std::vector<float> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_numel(shape_) != data_.size()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
    }
  }

  static Tensor vector(std::initializer_list<float> values) {
    return Tensor({values.size()}, std::vector<float>(values));
  }

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<float> values) {
    return Tensor({rows, cols}, std::vector<float>(values));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> span() { return data_; }
  std::span<const float> span() const { return data_; }
  const std::vector<float>& values() const { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  float& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  float at(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }

  float& at(std::size_t c, std::size_t h, std::size_t w) {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  float at(std::size_t c, std::size_t h, std::size_t w) const {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }

  /// Same data viewed under a new shape with equal element count.
  Tensor reshaped(Shape shape) const {
    return Tensor(std::move(shape), data_);
  }

  void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (float v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  /// Throws NonFiniteError naming `what` if any element is NaN or Inf.
  const Tensor& require_finite(const std::string& what) const {
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(data_[i])) {
        throw NonFiniteError(what + ": non-finite value at flat index " +
                             std::to_string(i));
      }
    }
    return *this;
  }

  Tensor& operator+=(const Tensor& o) {
    require_same_shape(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  Tensor& operator-=(const Tensor& o) {
    require_same_shape(o, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }

  Tensor& operator*=(float s) {
    for (float& v : data_) v *= s;
    return *this;
  }

  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
  friend Tensor operator*(Tensor a, float s) { return a *= s; }
  friend Tensor operator*(float s, Tensor a) { return a *= s; }

  bool operator==(const Tensor& o) const = default;

  void require_same_shape(const Tensor& o, const char* op) const {
    if (shape_ != o.shape_) {
      throw ShapeError(std::string("shape mismatch in ") + op + ": " +
                       shape_str(shape_) + " vs " + shape_str(o.shape_));
    }
  }

 private:
  static std::size_t checked_numel(const Shape& shape) {
    for (std::size_t e : shape) {
      if (e == 0) {
        throw ShapeError("tensor extents must be positive, got " +
                         shape_str(shape));
      }
    }
    return shape_numel(shape);
  }

  Shape shape_;
  std::vector<float> data_;
};

inline float dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  float s = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline float l2_norm(std::span<const float> a) {
  double s = 0.0;
  for (float v : a) s += static_cast<double>(v) * v;
  return static_cast<float>(std::sqrt(s));
}

inline float l1_norm(std::span<const float> a) {
  double s = 0.0;
  for (float v : a) s += std::fabs(v);
  return static_cast<float>(s);
}

inline float linf_distance(const Tensor& a, const Tensor& b) {
  a.require_same_shape(b, "linf_distance");
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::fabs(a[i] - b[i]));
  }
  return m;
}

/// Index of the largest element; ties resolve to the lowest index.
inline std::size_t argmax(std::span<const float> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

/// Zero-padded, per-channel 2-D convolution (true convolution, so an impulse
/// reproduces the kernel) of a CxHxW image with an odd kernel; output shape
/// equals input shape.
inline Tensor depthwise_convolve(const Tensor& image, const Tensor& kernel) {
  if (image.rank() != 3) {
    throw ShapeError("depthwise_convolve: image must be CxHxW, got " +
                     shape_str(image.shape()));
  }
  if (kernel.rank() != 2) {
    throw ShapeError("depthwise_convolve: kernel must be 2-D, got " +
                     shape_str(kernel.shape()));
  }
  const std::size_t kh = kernel.dim(0), kw = kernel.dim(1);
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw ShapeError("depthwise_convolve: kernel extents must be odd, got " +
                     shape_str(kernel.shape()));
  }
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  const long ry = static_cast<long>(kh / 2), rx = static_cast<long>(kw / 2);
  Tensor out(image.shape());
  for (std::size_t c = 0; c < C; ++c) {
    for (long y = 0; y < static_cast<long>(H); ++y) {
      for (long x = 0; x < static_cast<long>(W); ++x) {
        float acc = 0.0f;
        for (long i = -ry; i <= ry; ++i) {
          const long sy = y - i;
          if (sy < 0 || sy >= static_cast<long>(H)) continue;
          for (long j = -rx; j <= rx; ++j) {
            const long sx = x - j;
            if (sx < 0 || sx >= static_cast<long>(W)) continue;
            acc += kernel.at(static_cast<std::size_t>(i + ry),
                             static_cast<std::size_t>(j + rx)) *
                   image.at(c, static_cast<std::size_t>(sy),
                            static_cast<std::size_t>(sx));
          }
        }
        out.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
            acc;
      }
    }
  }
  return out;
}

}  // namespace logitcal
