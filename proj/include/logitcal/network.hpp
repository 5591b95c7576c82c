#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "logitcal/tensor.hpp"

namespace logitcal {

enum class LayerKind : std::uint8_t {
  dense = 1,
  conv2d = 2,
  relu = 3,
  maxpool2d = 4,
  avgpool2d = 5,
  flatten = 6,
};

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::avgpool2d: return "avgpool2d";
    case LayerKind::flatten: return "flatten";
  }
  return "unknown";
}

/// One layer of a feed-forward classifier.
///
/// dense:   weight [out, in], bias [out]; input must be 1-D.
/// conv2d:  weight [Cout, Cin, kh, kw], bias [Cout]; zero padding `pad`.
/// pooling: square window `kernel` with `stride`; windows must tile the
///          input exactly, i.e. (H - kernel) % stride == 0.
struct Layer {
  LayerKind kind = LayerKind::relu;
  Tensor weight;
  Tensor bias;
  std::uint32_t stride = 1;
  std::uint32_t pad = 0;
  std::uint32_t kernel = 0;  // pooling window side

  static Layer dense(Tensor w, Tensor b) {
    return Layer{LayerKind::dense, std::move(w), std::move(b)};
  }
  static Layer conv2d(Tensor w, Tensor b, std::uint32_t stride,
                      std::uint32_t pad) {
    return Layer{LayerKind::conv2d, std::move(w), std::move(b), stride, pad};
  }
  static Layer relu() {
    Layer l;
    l.kind = LayerKind::relu;
    return l;
  }
  static Layer flatten() {
    Layer l;
    l.kind = LayerKind::flatten;
    return l;
  }
  static Layer maxpool2d(std::uint32_t kernel, std::uint32_t stride) {
    return Layer{LayerKind::maxpool2d, {}, {}, stride, 0, kernel};
  }
  static Layer avgpool2d(std::uint32_t kernel, std::uint32_t stride) {
    return Layer{LayerKind::avgpool2d, {}, {}, stride, 0, kernel};
  }

  bool has_params() const {
    return kind == LayerKind::dense || kind == LayerKind::conv2d;
  }

  bool operator==(const Layer&) const = default;
};

namespace detail {

inline std::string layer_name(std::size_t index, const Layer& layer) {
  return "layer " + std::to_string(index) + " (" +
         std::string(to_string(layer.kind)) + ")";
}

/// Output shape of `layer` for `in`; throws ShapeError naming the layer.
inline Shape infer_shape(std::size_t index, const Layer& layer,
                         const Shape& in) {
  const auto fail = [&](const std::string& msg) -> ShapeError {
    return ShapeError(layer_name(index, layer) + ": " + msg + " (input " +
                      shape_str(in) + ")");
  };
  switch (layer.kind) {
    case LayerKind::dense: {
      if (in.size() != 1) throw fail("dense expects a 1-D input");
      if (layer.weight.rank() != 2 || layer.weight.dim(1) != in[0]) {
        throw fail("weight shape " + shape_str(layer.weight.shape()) +
                   " incompatible");
      }
      if (layer.bias.shape() != Shape{layer.weight.dim(0)}) {
        throw fail("bias shape " + shape_str(layer.bias.shape()) +
                   " incompatible");
      }
      return {layer.weight.dim(0)};
    }
    case LayerKind::conv2d: {
      if (in.size() != 3) throw fail("conv2d expects CxHxW");
      if (layer.weight.rank() != 4 || layer.weight.dim(1) != in[0]) {
        throw fail("weight shape " + shape_str(layer.weight.shape()) +
                   " incompatible");
      }
      if (layer.bias.shape() != Shape{layer.weight.dim(0)}) {
        throw fail("bias shape " + shape_str(layer.bias.shape()) +
                   " incompatible");
      }
      if (layer.stride == 0) throw fail("stride must be positive");
      const std::size_t kh = layer.weight.dim(2), kw = layer.weight.dim(3);
      const std::size_t ph = in[1] + 2 * layer.pad, pw = in[2] + 2 * layer.pad;
      if (kh > ph || kw > pw) throw fail("kernel larger than padded input");
      return {layer.weight.dim(0), (ph - kh) / layer.stride + 1,
              (pw - kw) / layer.stride + 1};
    }
    case LayerKind::relu:
      return in;
    case LayerKind::maxpool2d:
    case LayerKind::avgpool2d: {
      if (in.size() != 3) throw fail("pooling expects CxHxW");
      if (layer.kernel == 0 || layer.stride == 0) {
        throw fail("pool kernel and stride must be positive");
      }
      if (layer.kernel > in[1] || layer.kernel > in[2] ||
          (in[1] - layer.kernel) % layer.stride != 0 ||
          (in[2] - layer.kernel) % layer.stride != 0) {
        throw fail("pool window " + std::to_string(layer.kernel) + "/" +
                   std::to_string(layer.stride) + " does not tile the input");
      }
      return {in[0], (in[1] - layer.kernel) / layer.stride + 1,
              (in[2] - layer.kernel) / layer.stride + 1};
    }
    case LayerKind::flatten:
      return {shape_numel(in)};
  }
  throw fail("unknown layer kind");
}

// Forward kernels are templated on the scalar so that test oracles can run
// the same network in double precision.
/// Output columns [lo, hi) whose source column x * s - p + j lies inside
/// [0, W).
inline std::pair<std::size_t, std::size_t> valid_range(std::size_t out_len,
                                                       std::size_t in_len,
                                                       long s, long p, long j) {
  long lo = p - j > 0 ? (p - j + s - 1) / s : 0;
  long hi = (static_cast<long>(in_len) - 1 + p - j);
  hi = hi < 0 ? 0 : hi / s + 1;
  hi = std::min<long>(hi, static_cast<long>(out_len));
  lo = std::min(lo, hi);
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

template <class T>
void conv_forward(const Layer& L, const Shape& in_s, const Shape& out_s,
                  const T* in, T* out) {
  const std::size_t Cin = in_s[0], H = in_s[1], W = in_s[2];
  const std::size_t Cout = out_s[0], OH = out_s[1], OW = out_s[2];
  const std::size_t kh = L.weight.dim(2), kw = L.weight.dim(3);
  const long s = L.stride, p = L.pad;
  const float* w = L.weight.data();
  for (std::size_t o = 0; o < Cout; ++o) {
    T* plane = out + o * OH * OW;
    for (std::size_t k = 0; k < OH * OW; ++k) plane[k] = T(L.bias[o]);
    for (std::size_t c = 0; c < Cin; ++c) {
      const T* src = in + c * H * W;
      for (std::size_t i = 0; i < kh; ++i) {
        const auto [y0, y1] = valid_range(OH, H, s, p, static_cast<long>(i));
        for (std::size_t j = 0; j < kw; ++j) {
          const T wv = T(w[((o * Cin + c) * kh + i) * kw + j]);
          const auto [x0, x1] = valid_range(OW, W, s, p, static_cast<long>(j));
          for (std::size_t y = y0; y < y1; ++y) {
            const long base = (static_cast<long>(y) * s - p + static_cast<long>(i)) *
                                  static_cast<long>(W) - p + static_cast<long>(j);
            T* orow = plane + y * OW;
            if (s == 1) {
              for (std::size_t x = x0; x < x1; ++x) orow[x] += wv * src[base + static_cast<long>(x)];
            } else {
              for (std::size_t x = x0; x < x1; ++x) orow[x] += wv * src[base + static_cast<long>(x) * s];
            }
          }
        }
      }
    }
  }
}

template <class T>
void pool_forward(const Layer& L, const Shape& in_s, const Shape& out_s,
                  const T* in, T* out) {
  const std::size_t C = in_s[0], H = in_s[1], W = in_s[2];
  const std::size_t OH = out_s[1], OW = out_s[2];
  const std::size_t k = L.kernel, s = L.stride;
  const bool is_max = L.kind == LayerKind::maxpool2d;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < OH; ++y) {
      for (std::size_t x = 0; x < OW; ++x) {
        T acc = is_max ? in[(c * H + y * s) * W + x * s] : T(0);
        for (std::size_t i = 0; i < k; ++i) {
          for (std::size_t j = 0; j < k; ++j) {
            const T v = in[(c * H + y * s + i) * W + x * s + j];
            if (is_max) {
              if (v > acc) acc = v;
            } else {
              acc += v;
            }
          }
        }
        out[(c * OH + y) * OW + x] = is_max ? acc : acc / T(k * k);
      }
    }
  }
}

template <class T>
void layer_forward(const Layer& L, const Shape& in_s, const Shape& out_s,
                   const T* in, T* out) {
  switch (L.kind) {
    case LayerKind::dense: {
      const std::size_t n_out = out_s[0], n_in = in_s[0];
      const float* w = L.weight.data();
      for (std::size_t r = 0; r < n_out; ++r) {
        T acc = T(0);
        const float* wr = w + r * n_in;
        for (std::size_t c = 0; c < n_in; ++c) acc += T(wr[c]) * in[c];
        out[r] = acc + T(L.bias[r]);
      }
      return;
    }
    case LayerKind::conv2d:
      conv_forward(L, in_s, out_s, in, out);
      return;
    case LayerKind::relu: {
      const std::size_t n = shape_numel(in_s);
      for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
      return;
    }
    case LayerKind::maxpool2d:
    case LayerKind::avgpool2d:
      pool_forward(L, in_s, out_s, in, out);
      return;
    case LayerKind::flatten: {
      const std::size_t n = shape_numel(in_s);
      for (std::size_t i = 0; i < n; ++i) out[i] = in[i];
      return;
    }
  }
}

}  // namespace detail

/// Immutable feed-forward classifier whose last layer is dense. The input to
/// that last layer is the penultimate feature; its parameters are the final
/// class weights W (N x D) and bias b (N).
class ClassifierModel {
 public:
  ClassifierModel() = default;

  ClassifierModel(std::string arch_id, Shape input_shape,
                  std::vector<Layer> layers)
      : arch_id_(std::move(arch_id)),
        input_shape_(std::move(input_shape)),
        layers_(std::move(layers)) {
    if (layers_.empty()) throw ShapeError("model has no layers");
    shapes_.push_back(input_shape_);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      shapes_.push_back(detail::infer_shape(i, layers_[i], shapes_.back()));
    }
    const Layer& last = layers_.back();
    if (last.kind != LayerKind::dense) {
      throw ShapeError("last layer must be dense, got " +
                       std::string(to_string(last.kind)));
    }
    if (class_count() < 2) throw ShapeError("class count must be >= 2");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (!layers_[i].has_params()) continue;
      layers_[i].weight.require_finite(detail::layer_name(i, layers_[i]) +
                                       " weight");
      layers_[i].bias.require_finite(detail::layer_name(i, layers_[i]) +
                                     " bias");
    }
  }

  const std::string& arch_id() const { return arch_id_; }
  const Shape& input_shape() const { return input_shape_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t layer_count() const { return layers_.size(); }

  /// Shape entering layer i (i == layer_count() gives the logits shape).
  const Shape& shape_at(std::size_t i) const { return shapes_.at(i); }

  std::size_t class_count() const { return layers_.back().weight.dim(0); }
  std::size_t feature_dim() const { return layers_.back().weight.dim(1); }
  const Tensor& final_weights() const { return layers_.back().weight; }
  const Tensor& final_bias() const { return layers_.back().bias; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) {
      if (l.has_params()) n += l.weight.size() + l.bias.size();
    }
    return n;
  }

  bool operator==(const ClassifierModel& o) const {
    return arch_id_ == o.arch_id_ && input_shape_ == o.input_shape_ &&
           layers_ == o.layers_;
  }

 private:
  std::string arch_id_;
  Shape input_shape_;
  std::vector<Layer> layers_;
  std::vector<Shape> shapes_;
};

/// Activations recorded by one forward pass. activations[0] is the input and
/// activations[i + 1] the output of layer i. The model must outlive the tape.
struct Tape {
  const ClassifierModel* model = nullptr;
  std::vector<Tensor> activations;

  const Tensor& input() const { return activations.front(); }
  const Tensor& logits() const { return activations.back(); }
  const Tensor& feature() const {
    return activations[activations.size() - 2];
  }
};

struct ForwardResult {
  Tensor logits;
  Tensor feature;
  Tape tape;
};

inline Tape record_forward(const ClassifierModel& model, Tensor x) {
  if (x.shape() != model.input_shape()) {
    throw ShapeError("layer 0 (" +
                     std::string(to_string(model.layers()[0].kind)) +
                     "): input shape " + shape_str(x.shape()) +
                     " does not match model input " +
                     shape_str(model.input_shape()));
  }
  Tape tape{&model, {}};
  tape.activations.reserve(model.layer_count() + 1);
  tape.activations.push_back(std::move(x));
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    Tensor out(model.shape_at(i + 1));
    detail::layer_forward(model.layers()[i], model.shape_at(i),
                          model.shape_at(i + 1),
                          tape.activations.back().data(), out.data());
    tape.activations.push_back(std::move(out));
  }
  return tape;
}

/// Runs the model on x, returning logits, the penultimate feature, and the
/// tape needed for the backward passes.
inline ForwardResult forward(const ClassifierModel& model, const Tensor& x) {
  Tape tape = record_forward(model, x);
  Tensor logits = tape.logits();
  Tensor feature = tape.feature();
  return {std::move(logits), std::move(feature), std::move(tape)};
}

/// Logits only.
inline Tensor predict_logits(const ClassifierModel& model, const Tensor& x) {
  return record_forward(model, x).logits();
}

/// Double-precision forward pass for test oracles.
inline std::vector<double> forward_f64(const ClassifierModel& model,
                                       const std::vector<double>& x,
                                       std::vector<double>* feature = nullptr) {
  if (x.size() != shape_numel(model.input_shape())) {
    throw ShapeError("forward_f64: input length mismatch");
  }
  std::vector<double> cur = x;
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    if (feature && i + 1 == model.layer_count()) *feature = cur;
    std::vector<double> out(shape_numel(model.shape_at(i + 1)));
    detail::layer_forward(model.layers()[i], model.shape_at(i),
                          model.shape_at(i + 1), cur.data(), out.data());
    cur = std::move(out);
  }
  return cur;
}

/// Parameter gradients of one layer; empty tensors for parameterless layers.
struct LayerGrad {
  Tensor weight;
  Tensor bias;
};

namespace detail {

inline void check_backward_inputs(const Tape& tape,
                                  std::span<const float> d_logits,
                                  std::span<const float> d_feature) {
  if (tape.model == nullptr ||
      tape.activations.size() != tape.model->layer_count() + 1) {
    throw ShapeError("tape does not belong to a completed forward pass");
  }
  if (!d_logits.empty() && d_logits.size() != tape.model->class_count()) {
    throw ShapeError("gradient length " + std::to_string(d_logits.size()) +
                     " does not match class count " +
                     std::to_string(tape.model->class_count()));
  }
  if (!d_feature.empty() && d_feature.size() != tape.model->feature_dim()) {
    throw ShapeError("feature gradient length " +
                     std::to_string(d_feature.size()) +
                     " does not match feature dim " +
                     std::to_string(tape.model->feature_dim()));
  }
}

inline void conv_backward(const Layer& L, const Shape& in_s,
                          const Shape& out_s, const float* in,
                          const float* dout, float* din, LayerGrad* grad) {
  const std::size_t Cin = in_s[0], H = in_s[1], W = in_s[2];
  const std::size_t Cout = out_s[0], OH = out_s[1], OW = out_s[2];
  const std::size_t kh = L.weight.dim(2), kw = L.weight.dim(3);
  const long s = L.stride, p = L.pad;
  const float* w = L.weight.data();
  for (std::size_t o = 0; o < Cout; ++o) {
    const float* gplane = dout + o * OH * OW;
    if (grad) {
      float db = 0.0f;
      for (std::size_t k = 0; k < OH * OW; ++k) db += gplane[k];
      grad->bias[o] += db;
    }
    for (std::size_t c = 0; c < Cin; ++c) {
      const float* src = in + c * H * W;
      float* dsrc = din ? din + c * H * W : nullptr;
      for (std::size_t i = 0; i < kh; ++i) {
        const auto [y0, y1] = valid_range(OH, H, s, p, static_cast<long>(i));
        for (std::size_t j = 0; j < kw; ++j) {
          const std::size_t widx = ((o * Cin + c) * kh + i) * kw + j;
          const float wv = w[widx];
          const auto [x0, x1] = valid_range(OW, W, s, p, static_cast<long>(j));
          const long offset = -p * static_cast<long>(W) - p + static_cast<long>(j) +
                              static_cast<long>(i) * static_cast<long>(W);
          float dw = 0.0f;
          for (std::size_t y = y0; y < y1; ++y) {
            const float* grow = gplane + y * OW;
            const long base = static_cast<long>(y) * s * static_cast<long>(W) + offset;
            if (dsrc) {
              if (s == 1) {
                for (std::size_t x = x0; x < x1; ++x) dsrc[base + static_cast<long>(x)] += wv * grow[x];
              } else {
                for (std::size_t x = x0; x < x1; ++x) dsrc[base + static_cast<long>(x) * s] += wv * grow[x];
              }
            }
            if (grad) {
              if (s == 1) {
                for (std::size_t x = x0; x < x1; ++x) dw += grow[x] * src[base + static_cast<long>(x)];
              } else {
                for (std::size_t x = x0; x < x1; ++x) dw += grow[x] * src[base + static_cast<long>(x) * s];
              }
            }
          }
          if (grad) grad->weight[widx] += dw;
        }
      }
    }
  }
}

inline void pool_backward(const Layer& L, const Shape& in_s,
                          const Shape& out_s, const float* in,
                          const float* dout, float* din) {
  const std::size_t C = in_s[0], H = in_s[1], W = in_s[2];
  const std::size_t OH = out_s[1], OW = out_s[2];
  const std::size_t k = L.kernel, s = L.stride;
  const float inv = 1.0f / static_cast<float>(k * k);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < OH; ++y) {
      for (std::size_t x = 0; x < OW; ++x) {
        const float g = dout[(c * OH + y) * OW + x];
        if (L.kind == LayerKind::maxpool2d) {
          // First maximum in scan order receives the gradient.
          std::size_t best = (c * H + y * s) * W + x * s;
          for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
              const std::size_t idx = (c * H + y * s + i) * W + x * s + j;
              if (in[idx] > in[best]) best = idx;
            }
          }
          din[best] += g;
        } else {
          for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
              din[(c * H + y * s + i) * W + x * s + j] += g * inv;
            }
          }
        }
      }
    }
  }
}

/// Reverse pass. d_logits and/or d_feature may be empty (treated as zero).
/// Fills the input gradient when `input_grad` is set and per-layer parameter
/// gradients when `layer_grads` is set.
inline void backprop(const Tape& tape, std::span<const float> d_logits,
                     std::span<const float> d_feature, Tensor* input_grad,
                     std::vector<LayerGrad>* layer_grads) {
  check_backward_inputs(tape, d_logits, d_feature);
  const ClassifierModel& model = *tape.model;
  const std::size_t n_layers = model.layer_count();
  if (layer_grads) {
    layer_grads->assign(n_layers, {});
    for (std::size_t i = 0; i < n_layers; ++i) {
      const Layer& L = model.layers()[i];
      if (L.has_params()) {
        (*layer_grads)[i] = {Tensor(L.weight.shape()), Tensor(L.bias.shape())};
      }
    }
  }

  Tensor grad(model.shape_at(n_layers));
  if (!d_logits.empty()) std::copy(d_logits.begin(), d_logits.end(), grad.data());

  for (std::size_t li = n_layers; li-- > 0;) {
    const Layer& L = model.layers()[li];
    const Shape& in_s = model.shape_at(li);
    const Shape& out_s = model.shape_at(li + 1);
    const Tensor& in = tape.activations[li];
    LayerGrad* lg = layer_grads ? &(*layer_grads)[li] : nullptr;
    const bool need_din = li > 0 || input_grad != nullptr;
    Tensor din(in_s);

    switch (L.kind) {
      case LayerKind::dense: {
        const std::size_t n_out = out_s[0], n_in = in_s[0];
        const float* w = L.weight.data();
        for (std::size_t r = 0; r < n_out; ++r) {
          const float g = grad[r];
          if (g == 0.0f) continue;
          const float* wr = w + r * n_in;
          if (need_din) {
            for (std::size_t c = 0; c < n_in; ++c) din[c] += wr[c] * g;
          }
          if (lg) {
            float* dwr = lg->weight.data() + r * n_in;
            for (std::size_t c = 0; c < n_in; ++c) dwr[c] += g * in[c];
          }
        }
        if (lg) {
          for (std::size_t r = 0; r < n_out; ++r) lg->bias[r] += grad[r];
        }
        break;
      }
      case LayerKind::conv2d:
        conv_backward(L, in_s, out_s, in.data(), grad.data(),
                      need_din ? din.data() : nullptr, lg);
        break;
      case LayerKind::relu:
        for (std::size_t i = 0; i < din.size(); ++i) {
          din[i] = in[i] > 0.0f ? grad[i] : 0.0f;
        }
        break;
      case LayerKind::maxpool2d:
      case LayerKind::avgpool2d:
        pool_backward(L, in_s, out_s, in.data(), grad.data(), din.data());
        break;
      case LayerKind::flatten:
        std::copy(grad.data(), grad.data() + grad.size(), din.data());
        break;
    }

    // The feature gradient enters at the input of the final dense layer.
    if (li == n_layers - 1 && !d_feature.empty()) {
      for (std::size_t i = 0; i < din.size(); ++i) din[i] += d_feature[i];
    }
    if (li == 0) {
      if (input_grad) *input_grad = std::move(din);
      break;
    }
    grad = std::move(din);
  }
}

}  // namespace detail

/// dLoss/dx for a loss whose gradient w.r.t. logits is d_logits and, when
/// non-empty, w.r.t. the penultimate feature is d_feature.
inline Tensor backward_to_input(const Tape& tape,
                                std::span<const float> d_logits,
                                std::span<const float> d_feature = {}) {
  Tensor out;
  detail::backprop(tape, d_logits, d_feature, &out, nullptr);
  return out;
}

inline Tensor backward_to_input(const Tape& tape, const Tensor& d_logits) {
  return backward_to_input(tape, d_logits.span());
}

/// Per-layer parameter gradients.
inline std::vector<LayerGrad> backward_to_weights(
    const Tape& tape, std::span<const float> d_logits,
    std::span<const float> d_feature = {}) {
  std::vector<LayerGrad> grads;
  detail::backprop(tape, d_logits, d_feature, nullptr, &grads);
  return grads;
}

inline std::vector<LayerGrad> backward_to_weights(const Tape& tape,
                                                  const Tensor& d_logits) {
  return backward_to_weights(tape, d_logits.span());
}

/// Central-difference estimate of d f / d x, evaluated in double precision.
/// `f` maps a point (as doubles, same layout as x) to a scalar.
template <class F>
std::vector<double> finite_difference_gradient(F&& f,
                                               const std::vector<double>& x,
                                               double h) {
  if (!(h > 0.0)) throw Error("finite_difference_gradient: h must be > 0");
  std::vector<double> grad(x.size());
  std::vector<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// Finite-difference input gradient of loss_fn(logits) through the model,
/// with the network evaluated in double precision.
template <class LossFn>
std::vector<double> finite_difference_gradient(const ClassifierModel& model,
                                               const Tensor& x,
                                               LossFn&& loss_fn, double h) {
  std::vector<double> x64(x.values().begin(), x.values().end());
  return finite_difference_gradient(
      [&](const std::vector<double>& p) { return loss_fn(forward_f64(model, p)); },
      x64, h);
}

}  // namespace logitcal
