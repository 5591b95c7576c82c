#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "logitcal/dataset.hpp"
#include "logitcal/network.hpp"

// NNWT weight files (all integers little-endian):
//
//   "NNWT" | u32 version (1) | u16 len + arch id bytes
//   | u8 ndim + u32 extents[]            (model input shape)
//   | u32 layer count
//   per layer: u8 kind tag | hyperparameters | parameter tensors
//     conv2d    u32 stride, pad, kh, kw  + weight, bias
//     dense     (none)                   + weight, bias
//     max/avg   u32 kernel, stride
//     relu/flat (none)
//   tensor: u8 ndim | u32 extents[] | f32 data[]

namespace logitcal {

inline constexpr std::uint32_t kNnwtVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f32(float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    u32(bits);
  }
  void raw(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void tensor(const Tensor& t) {
    u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t e : t.shape()) u32(static_cast<std::uint32_t>(e));
    for (float v : t.span()) f32(v);
  }
  const std::vector<unsigned char>& bytes() const { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<unsigned char>& b, std::string path)
      : b_(b), path_(std::move(path)) {}

  std::uint8_t u8() { need(1); return b_[pos_++]; }
  std::uint16_t u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(b_[pos_] | (b_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{b_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(b_.begin() + static_cast<long>(pos_),
                  b_.begin() + static_cast<long>(pos_ + n));
    pos_ += n;
    return s;
  }
  Shape shape() {
    const std::uint8_t nd = u8();
    if (nd == 0) {
      throw FormatError(FormatError::Code::inconsistent,
                        path_ + ": tensor with zero dimensions");
    }
    Shape s(nd);
    for (auto& e : s) {
      e = u32();
      if (e == 0) {
        throw FormatError(FormatError::Code::inconsistent,
                          path_ + ": zero tensor extent");
      }
    }
    return s;
  }
  Tensor tensor() {
    Shape s = shape();
    const std::size_t n = shape_numel(s);
    need(n * 4);
    std::vector<float> data(n);
    for (auto& v : data) v = f32();
    return Tensor(std::move(s), std::move(data));
  }
  bool at_end() const { return pos_ == b_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) {
      throw FormatError(FormatError::Code::truncated,
                        path_ + ": truncated at byte " + std::to_string(pos_) +
                            " (need " + std::to_string(n) + " more)");
    }
  }

  const std::vector<unsigned char>& b_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<unsigned char> encode_weights(const ClassifierModel& model) {
  detail::ByteWriter w;
  w.raw("NNWT");
  w.u32(kNnwtVersion);
  w.u16(static_cast<std::uint16_t>(model.arch_id().size()));
  w.raw(model.arch_id());
  w.u8(static_cast<std::uint8_t>(model.input_shape().size()));
  for (std::size_t e : model.input_shape()) w.u32(static_cast<std::uint32_t>(e));
  w.u32(static_cast<std::uint32_t>(model.layer_count()));
  for (const Layer& l : model.layers()) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    switch (l.kind) {
      case LayerKind::conv2d:
        w.u32(l.stride);
        w.u32(l.pad);
        w.u32(static_cast<std::uint32_t>(l.weight.dim(2)));
        w.u32(static_cast<std::uint32_t>(l.weight.dim(3)));
        break;
      case LayerKind::maxpool2d:
      case LayerKind::avgpool2d:
        w.u32(l.kernel);
        w.u32(l.stride);
        break;
      default:
        break;
    }
    if (l.has_params()) {
      w.tensor(l.weight);
      w.tensor(l.bias);
    }
  }
  return w.bytes();
}

inline ClassifierModel decode_weights(const std::vector<unsigned char>& bytes,
                                      const std::string& path = "<memory>") {
  detail::ByteReader r(bytes, path);
  if (bytes.size() < 4 || r.raw(4) != "NNWT") {
    throw FormatError(FormatError::Code::bad_magic,
                      path + ": bad magic, expected \"NNWT\"");
  }
  const std::uint32_t version = r.u32();
  if (version != kNnwtVersion) {
    throw FormatError(FormatError::Code::version_mismatch,
                      path + ": unsupported NNWT version " +
                          std::to_string(version) + " (expected " +
                          std::to_string(kNnwtVersion) + ")");
  }
  const std::uint16_t id_len = r.u16();
  std::string arch_id = r.raw(id_len);
  Shape input = r.shape();
  const std::uint32_t n_layers = r.u32();
  std::vector<Layer> layers;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const std::uint8_t tag = r.u8();
    const auto inconsistent = [&](const std::string& msg) {
      return FormatError(FormatError::Code::inconsistent,
                         path + ": layer " + std::to_string(i) + ": " + msg);
    };
    if (tag < 1 || tag > 6) throw inconsistent("unknown kind tag " + std::to_string(tag));
    Layer l;
    l.kind = static_cast<LayerKind>(tag);
    std::uint32_t kh = 0, kw = 0;
    switch (l.kind) {
      case LayerKind::conv2d:
        l.stride = r.u32();
        l.pad = r.u32();
        kh = r.u32();
        kw = r.u32();
        break;
      case LayerKind::maxpool2d:
      case LayerKind::avgpool2d:
        l.kernel = r.u32();
        l.stride = r.u32();
        break;
      default:
        break;
    }
    if (l.has_params()) {
      l.weight = r.tensor();
      l.bias = r.tensor();
      if (l.kind == LayerKind::conv2d &&
          (l.weight.rank() != 4 || l.weight.dim(2) != kh || l.weight.dim(3) != kw)) {
        throw inconsistent("conv kernel extents in descriptor do not match weight shape " +
                           shape_str(l.weight.shape()));
      }
    }
    layers.push_back(std::move(l));
  }
  if (!r.at_end()) {
    throw FormatError(FormatError::Code::inconsistent,
                      path + ": " + std::to_string(bytes.size() - r.pos()) +
                          " trailing bytes after last layer");
  }
  try {
    return ClassifierModel(std::move(arch_id), std::move(input), std::move(layers));
  } catch (const ShapeError& e) {
    throw FormatError(FormatError::Code::inconsistent, path + ": " + e.what());
  }
}

inline void save_weights(const ClassifierModel& model, const std::string& path) {
  detail::write_file(path, encode_weights(model));
}

inline ClassifierModel load_weights(const std::string& path) {
  return decode_weights(detail::read_file(path), path);
}

}  // namespace logitcal
