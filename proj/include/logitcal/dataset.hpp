#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "logitcal/tensor.hpp"

namespace logitcal {

/// Malformed or unreadable file (IDX, weights, plans).
class FormatError : public Error {
 public:
  enum class Code { io, bad_magic, version_mismatch, truncated, inconsistent };

  FormatError(Code code, const std::string& what) : Error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

enum class DataSource { synthetic_shapes, idx_files };

struct DatasetSpec {
  DataSource source = DataSource::synthetic_shapes;
  std::size_t class_count = 10;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t train_per_class = 500;
  std::size_t test_per_class = 50;
  std::uint64_t seed = 0;
  float noise_sigma = 12.0f;
  // idx_files only
  std::string train_images, train_labels, test_images, test_labels;
};

/// Images are 1 x H x W tensors with pixel values in [0, 255].
struct Dataset {
  std::vector<Tensor> images;
  std::vector<std::uint32_t> labels;
  std::size_t class_count = 0;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }

  /// FNV-1a over labels and pixel bytes.
  std::uint64_t checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    const auto mix = [&](const void* p, std::size_t n) {
      const auto* b = static_cast<const unsigned char*>(p);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 1099511628211ull;
      }
    };
    for (std::size_t i = 0; i < images.size(); ++i) {
      mix(&labels[i], sizeof(labels[i]));
      mix(images[i].data(), images[i].size() * sizeof(float));
    }
    return h;
  }
};

struct DataSplits {
  Dataset train;
  Dataset test;
};

inline constexpr std::size_t kSyntheticClassLimit = 10;

namespace detail {

struct Canvas {
  std::size_t h, w;
  std::vector<float> mask;  // 1 where the shape covers the pixel

  Canvas(std::size_t h_, std::size_t w_) : h(h_), w(w_), mask(h_ * w_, 0.0f) {}

  template <class Inside>
  void paint(Inside&& inside) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        if (inside(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5)) {
          mask[y * w + x] = 1.0f;
        }
      }
    }
  }
};

inline double seg_distance(double px, double py, double ax, double ay,
                           double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double t = std::clamp(((px - ax) * vx + (py - ay) * vy) /
                                  (vx * vx + vy * vy),
                              0.0, 1.0);
  const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

/// Draws one primitive of class `cls` centred at (cx, cy) with scale s.
inline void draw_primitive(Canvas& cv, std::size_t cls, double cx, double cy,
                           double s) {
  switch (cls) {
    case 0:  // horizontal bar
      cv.paint([&](double x, double y) {
        return std::fabs(x - cx) <= 8 * s && std::fabs(y - cy) <= 2 * s;
      });
      break;
    case 1:  // vertical bar
      cv.paint([&](double x, double y) {
        return std::fabs(x - cx) <= 2 * s && std::fabs(y - cy) <= 8 * s;
      });
      break;
    case 2:  // filled disk
      cv.paint([&](double x, double y) {
        return std::hypot(x - cx, y - cy) <= 6 * s;
      });
      break;
    case 3:  // ring
      cv.paint([&](double x, double y) {
        const double r = std::hypot(x - cx, y - cy);
        return r <= 8 * s && r >= 8 * s - 2.2;
      });
      break;
    case 4:  // plus cross
      cv.paint([&](double x, double y) {
        const double dx = std::fabs(x - cx), dy = std::fabs(y - cy);
        return (dx <= 1.6 * s && dy <= 8 * s) || (dy <= 1.6 * s && dx <= 8 * s);
      });
      break;
    case 5:  // diagonal cross
      cv.paint([&](double x, double y) {
        const double a = 6 * s;
        return seg_distance(x, y, cx - a, cy - a, cx + a, cy + a) <= 1.4 * s ||
               seg_distance(x, y, cx - a, cy + a, cx + a, cy - a) <= 1.4 * s;
      });
      break;
    case 6:  // checker tiles
      cv.paint([&](double x, double y) {
        const double a = 7 * s;
        if (std::fabs(x - cx) > a || std::fabs(y - cy) > a) return false;
        const auto tx = static_cast<long>(std::floor((x - cx + a) / (3.5 * s)));
        const auto ty = static_cast<long>(std::floor((y - cy + a) / (3.5 * s)));
        return (tx + ty) % 2 == 0;
      });
      break;
    case 7:  // square outline
      cv.paint([&](double x, double y) {
        const double m = std::max(std::fabs(x - cx), std::fabs(y - cy));
        return m <= 7 * s && m >= 7 * s - 2.0;
      });
      break;
    case 8:  // filled triangle, apex up
      cv.paint([&](double x, double y) {
        const double top = cy - 7 * s, bottom = cy + 6 * s;
        if (y < top || y > bottom) return false;
        const double half = 7 * s * (y - top) / (bottom - top);
        return std::fabs(x - cx) <= half;
      });
      break;
    case 9:  // single diagonal bar
      cv.paint([&](double x, double y) {
        const double a = 7 * s;
        return seg_distance(x, y, cx - a, cy + a, cx + a, cy - a) <= 1.8 * s;
      });
      break;
    default:
      break;
  }
}

inline Tensor render_sample(std::size_t cls, const DatasetSpec& spec,
                            std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-5.0, 5.0);
  std::uniform_real_distribution<double> scale(0.75, 1.25);
  std::uniform_real_distribution<float> bg_level(0.0f, 40.0f);
  std::uniform_real_distribution<float> contrast(40.0f, 80.0f);
  std::normal_distribution<float> noise(0.0f, spec.noise_sigma);

  const double cx = spec.width / 2.0 + jitter(rng);
  const double cy = spec.height / 2.0 + jitter(rng);
  const double s = scale(rng) * static_cast<double>(spec.height) / 32.0;
  const float bg = bg_level(rng), fg = bg + contrast(rng);

  Canvas cv(spec.height, spec.width);
  draw_primitive(cv, cls, cx, cy, s);

  Tensor img({1, spec.height, spec.width});
  for (std::size_t i = 0; i < img.size(); ++i) {
    const float base = cv.mask[i] > 0.0f ? fg : bg;
    const float v = base + (spec.noise_sigma > 0.0f ? noise(rng) : 0.0f);
    img[i] = std::round(std::clamp(v, 0.0f, 255.0f));
  }
  return img;
}

}  // namespace detail

/// Procedural shape dataset. Classes cycle 0..N-1 so label histograms are
/// uniform; the same spec (including seed) always yields identical data.
inline DataSplits generate_synthetic_dataset(const DatasetSpec& spec) {
  if (spec.source != DataSource::synthetic_shapes) {
    throw Error("generate_synthetic_dataset: spec source is not synthetic");
  }
  if (spec.class_count < 2 || spec.class_count > kSyntheticClassLimit) {
    throw Error("synthetic-shapes supports 2.." +
                std::to_string(kSyntheticClassLimit) + " classes, got " +
                std::to_string(spec.class_count));
  }
  if (spec.height < 8 || spec.width < 8) {
    throw Error("synthetic-shapes images must be at least 8x8");
  }
  std::mt19937_64 rng(spec.seed);
  const auto make = [&](std::size_t per_class) {
    Dataset d;
    d.class_count = spec.class_count;
    const std::size_t n = per_class * spec.class_count;
    d.images.reserve(n);
    d.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t cls = i % spec.class_count;
      d.images.push_back(detail::render_sample(cls, spec, rng));
      d.labels.push_back(static_cast<std::uint32_t>(cls));
    }
    return d;
  };
  DataSplits out;
  out.train = make(spec.train_per_class);
  out.test = make(spec.test_per_class);
  return out;
}

// --------------------------------------------------------------------------
// IDX files (big-endian header; unsigned byte payload).

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Code::io, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path,
                       const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatError::Code::io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatError::Code::io, "write failed: " + path);
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& b,
                               std::size_t off, const std::string& path) {
  if (off + 4 > b.size()) {
    throw FormatError(FormatError::Code::truncated,
                      path + ": truncated IDX header");
  }
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

inline void put_be32(std::vector<unsigned char>& b, std::uint32_t v) {
  b.push_back(static_cast<unsigned char>(v >> 24));
  b.push_back(static_cast<unsigned char>(v >> 16));
  b.push_back(static_cast<unsigned char>(v >> 8));
  b.push_back(static_cast<unsigned char>(v));
}

inline std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

}  // namespace detail

/// Reads an IDX image file and its label file into a dataset.
inline Dataset ingest_idx(const std::string& images_path,
                          const std::string& labels_path,
                          std::size_t class_count = 10) {
  const auto img = detail::read_file(images_path);
  const auto lab = detail::read_file(labels_path);

  const std::uint32_t im = detail::read_be32(img, 0, images_path);
  if (im != kIdxImageMagic) {
    throw FormatError(FormatError::Code::bad_magic,
                      images_path + ": bad IDX image magic, expected " +
                          detail::hex32(kIdxImageMagic) + ", got " +
                          detail::hex32(im));
  }
  const std::uint32_t lm = detail::read_be32(lab, 0, labels_path);
  if (lm != kIdxLabelMagic) {
    throw FormatError(FormatError::Code::bad_magic,
                      labels_path + ": bad IDX label magic, expected " +
                          detail::hex32(kIdxLabelMagic) + ", got " +
                          detail::hex32(lm));
  }
  const std::uint32_t n = detail::read_be32(img, 4, images_path);
  const std::uint32_t rows = detail::read_be32(img, 8, images_path);
  const std::uint32_t cols = detail::read_be32(img, 12, images_path);
  const std::uint32_t nl = detail::read_be32(lab, 4, labels_path);
  if (n != nl) {
    throw FormatError(FormatError::Code::inconsistent,
                      "IDX count mismatch: " + std::to_string(n) +
                          " images vs " + std::to_string(nl) + " labels");
  }
  if (rows == 0 || cols == 0) {
    throw FormatError(FormatError::Code::inconsistent,
                      images_path + ": zero image extent");
  }
  const std::size_t px = std::size_t{rows} * cols;
  if (img.size() < 16 + std::size_t{n} * px) {
    throw FormatError(FormatError::Code::truncated,
                      images_path + ": truncated payload, expected " +
                          std::to_string(16 + std::size_t{n} * px) +
                          " bytes, got " + std::to_string(img.size()));
  }
  if (lab.size() < 8 + std::size_t{n}) {
    throw FormatError(FormatError::Code::truncated,
                      labels_path + ": truncated payload");
  }

  Dataset d;
  d.class_count = class_count;
  d.images.reserve(n);
  d.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor t({1, rows, cols});
    for (std::size_t k = 0; k < px; ++k) {
      t[k] = static_cast<float>(img[16 + i * px + k]);
    }
    const std::uint32_t label = lab[8 + i];
    if (label >= class_count) {
      throw FormatError(FormatError::Code::inconsistent,
                        labels_path + ": label " + std::to_string(label) +
                            " out of range");
    }
    d.images.push_back(std::move(t));
    d.labels.push_back(label);
  }
  return d;
}

/// Writes a single-channel dataset as IDX (pixels rounded and clamped to
/// [0, 255]).
inline void export_idx(const Dataset& d, const std::string& images_path,
                       const std::string& labels_path) {
  std::vector<unsigned char> img, lab;
  detail::put_be32(img, kIdxImageMagic);
  detail::put_be32(img, static_cast<std::uint32_t>(d.size()));
  std::size_t rows = 0, cols = 0;
  if (!d.empty()) {
    const Shape& s = d.images.front().shape();
    if (s.size() != 3 || s[0] != 1) {
      throw ShapeError("export_idx: images must be 1xHxW");
    }
    rows = s[1];
    cols = s[2];
  }
  detail::put_be32(img, static_cast<std::uint32_t>(rows));
  detail::put_be32(img, static_cast<std::uint32_t>(cols));
  detail::put_be32(lab, kIdxLabelMagic);
  detail::put_be32(lab, static_cast<std::uint32_t>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.images[i].shape() != Shape{1, rows, cols}) {
      throw ShapeError("export_idx: image " + std::to_string(i) +
                       " has a different shape");
    }
    for (float v : d.images[i].span()) {
      img.push_back(
          static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 255.0f))));
    }
    lab.push_back(static_cast<unsigned char>(d.labels[i]));
  }
  detail::write_file(images_path, img);
  detail::write_file(labels_path, lab);
}

/// Loads train/test splits for either source.
inline DataSplits load_dataset(const DatasetSpec& spec) {
  if (spec.source == DataSource::synthetic_shapes) {
    return generate_synthetic_dataset(spec);
  }
  DataSplits s;
  s.train = ingest_idx(spec.train_images, spec.train_labels, spec.class_count);
  s.test = ingest_idx(spec.test_images, spec.test_labels, spec.class_count);
  return s;
}

}  // namespace logitcal
