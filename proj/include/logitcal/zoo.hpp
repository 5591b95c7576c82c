#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "logitcal/dataset.hpp"
#include "logitcal/losses.hpp"
#include "logitcal/network.hpp"

namespace logitcal {

inline const std::array<std::string, 4> kZooArchitectures = {"cnn-a", "cnn-b",
                                                             "cnn-c", "mlp-d"};

namespace detail {

// Weights consume raw [0, 255] pixels, so the first layer's initial scale
// carries an extra 1/255.
inline Tensor he_init(Shape shape, std::size_t fan_in, float extra_scale,
                      std::mt19937_64& rng) {
  std::normal_distribution<float> dist(
      0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)) * extra_scale);
  Tensor t(std::move(shape));
  for (float& v : t.span()) v = dist(rng);
  return t;
}

struct ArchBuilder {
  std::mt19937_64& rng;
  Shape shape;
  std::vector<Layer> layers;
  bool first = true;

  float scale() {
    const float s = first ? 1.0f / 255.0f : 1.0f;
    first = false;
    return s;
  }

  ArchBuilder& conv(std::size_t out, std::size_t k, std::uint32_t stride,
                    std::uint32_t pad) {
    const std::size_t in = shape[0];
    Layer l = Layer::conv2d(he_init({out, in, k, k}, in * k * k, scale(), rng),
                            Tensor({out}), stride, pad);
    push(std::move(l));
    return *this;
  }
  ArchBuilder& dense(std::size_t out) {
    const std::size_t in = shape[0];
    push(Layer::dense(he_init({out, in}, in, scale(), rng), Tensor({out})));
    return *this;
  }
  ArchBuilder& relu() { push(Layer::relu()); return *this; }
  ArchBuilder& flatten() { push(Layer::flatten()); return *this; }
  ArchBuilder& maxpool(std::uint32_t k, std::uint32_t s) {
    push(Layer::maxpool2d(k, s));
    return *this;
  }
  ArchBuilder& avgpool(std::uint32_t k, std::uint32_t s) {
    push(Layer::avgpool2d(k, s));
    return *this;
  }

  void push(Layer l) {
    shape = infer_shape(layers.size(), l, shape);
    layers.push_back(std::move(l));
  }
};

}  // namespace detail

/// Untrained zoo model with He-initialised weights drawn from `seed`.
///
///   cnn-a  5x5 conv, max-pool, 3x3 conv, max-pool, linear head
///   cnn-b  strided 3x3 convs, three conv stages, avg-pool, two dense layers
///   cnn-c  strided 7x7 conv, avg-pool, 5x5 conv, max-pool, linear head
///   mlp-d  three dense layers, no convolutions
inline ClassifierModel build_architecture(const std::string& arch_id,
                                          std::uint64_t seed,
                                          Shape input_shape = {1, 32, 32},
                                          std::size_t class_count = 10) {
  if (input_shape.size() != 3) throw ShapeError("zoo models take CxHxW input");
  std::mt19937_64 rng(seed);
  detail::ArchBuilder b{rng, input_shape, {}};
  if (arch_id == "cnn-a") {
    b.conv(4, 5, 1, 2).relu().maxpool(2, 2).conv(8, 3, 1, 1).relu()
        .maxpool(2, 2).flatten().dense(class_count);
  } else if (arch_id == "cnn-b") {
    b.conv(8, 3, 2, 1).relu().conv(16, 3, 2, 1).relu().conv(16, 3, 1, 1)
        .relu().avgpool(2, 2).flatten().dense(32).relu().dense(class_count);
  } else if (arch_id == "cnn-c") {
    b.conv(6, 7, 2, 3).relu().avgpool(2, 2).conv(12, 5, 1, 2).relu()
        .maxpool(2, 2).flatten().dense(class_count);
  } else if (arch_id == "mlp-d") {
    b.flatten().dense(64).relu().dense(32).relu().dense(class_count);
  } else {
    throw Error("unknown architecture '" + arch_id +
                "' (expected cnn-a, cnn-b, cnn-c or mlp-d)");
  }
  return ClassifierModel(arch_id, std::move(input_shape), std::move(b.layers));
}

/// Fraction of samples whose argmax prediction equals the label.
inline double accuracy(const ClassifierModel& model, const Dataset& data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Tensor z = predict_logits(model, data.images[i]);
    if (argmax(z.span()) == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

struct TrainConfig {
  std::size_t epochs = 8;
  std::size_t batch_size = 32;
  float learning_rate = 0.05f;
  float momentum = 0.9f;
  std::uint64_t seed = 0;
  std::size_t max_steps = 0;  // 0 = no cap

  void validate() const {
    if (epochs == 0 || batch_size == 0 || !(learning_rate > 0.0f) ||
        !(momentum >= 0.0f)) {
      throw Error("train config: epochs, batch size and learning rate must be "
                  "positive, momentum non-negative");
    }
  }
};

/// Per-architecture defaults that land every zoo model above 90% held-out
/// accuracy on the default synthetic-shapes data.
inline TrainConfig default_train_config(const std::string& arch_id,
                                        std::uint64_t seed = 0) {
  TrainConfig cfg;
  cfg.seed = seed;
  if (arch_id == "mlp-d") {
    cfg.epochs = 20;
    cfg.learning_rate = 0.02f;
  } else {
    cfg.epochs = 6;
    cfg.learning_rate = 0.05f;
  }
  return cfg;
}

class TrainingDivergedError : public Error {
 public:
  using Error::Error;
};

/// Mini-batch SGD with momentum on cross-entropy. Training runs on pixels
/// scaled to [0, 1]; the 1/255 factor is folded into the first layer's
/// weights on return so the model keeps consuming raw pixels.
inline ClassifierModel train_classifier(const ClassifierModel& model,
                                        const Dataset& data,
                                        const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw Error("train_classifier: empty dataset");

  std::vector<Layer> layers = model.layers();
  std::size_t first_param = layers.size();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].has_params()) {
      first_param = i;
      break;
    }
  }
  // Only valid while everything before the first parametric layer is linear
  // and scale-equivariant (flatten in every zoo model).
  for (std::size_t i = 0; i < first_param; ++i) {
    if (layers[i].kind != LayerKind::flatten) {
      throw Error("train_classifier: first parametric layer must be preceded "
                  "only by flatten");
    }
  }
  layers[first_param].weight *= 255.0f;
  ClassifierModel work(model.arch_id(), model.input_shape(), layers);

  std::vector<Tensor> inputs;
  inputs.reserve(data.size());
  for (const Tensor& img : data.images) {
    if (img.shape() != model.input_shape()) {
      throw ShapeError("train_classifier: image shape " +
                       shape_str(img.shape()) + " != model input " +
                       shape_str(model.input_shape()));
    }
    inputs.push_back(img * (1.0f / 255.0f));
  }

  std::vector<LayerGrad> velocity(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].has_params()) {
      velocity[i] = {Tensor(layers[i].weight.shape()),
                     Tensor(layers[i].bias.shape())};
    }
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t steps = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<LayerGrad> acc;
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        const Tape tape = record_forward(work, inputs[idx]);
        const LossResult loss = ce_loss(tape.logits(), data.labels[idx]);
        batch_loss += loss.value;
        auto g = backward_to_weights(tape, *loss.d_logits);
        if (acc.empty()) {
          acc = std::move(g);
        } else {
          for (std::size_t i = 0; i < acc.size(); ++i) {
            if (!layers[i].has_params()) continue;
            acc[i].weight += g[i].weight;
            acc[i].bias += g[i].bias;
          }
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainingDivergedError(
            "training diverged (non-finite loss at epoch " +
            std::to_string(epoch) + "); try a smaller learning rate");
      }
      const float inv = 1.0f / static_cast<float>(end - start);
      std::vector<Layer> next = work.layers();
      for (std::size_t i = 0; i < next.size(); ++i) {
        if (!next[i].has_params()) continue;
        for (auto [param, grad, vel] :
             {std::tuple{&next[i].weight, &acc[i].weight, &velocity[i].weight},
              std::tuple{&next[i].bias, &acc[i].bias, &velocity[i].bias}}) {
          for (std::size_t j = 0; j < param->size(); ++j) {
            (*vel)[j] = cfg.momentum * (*vel)[j] + (*grad)[j] * inv;
            (*param)[j] -= cfg.learning_rate * (*vel)[j];
          }
        }
        if (!next[i].weight.all_finite() || !next[i].bias.all_finite()) {
          throw TrainingDivergedError(
              "training diverged (non-finite weights); try a smaller "
              "learning rate");
        }
      }
      work = ClassifierModel(work.arch_id(), work.input_shape(),
                             std::move(next));
      if (cfg.max_steps && ++steps >= cfg.max_steps) break;
    }
    if (cfg.max_steps && steps >= cfg.max_steps) break;
  }

  std::vector<Layer> out = work.layers();
  out[first_param].weight *= 1.0f / 255.0f;
  return ClassifierModel(work.arch_id(), work.input_shape(), std::move(out));
}

}  // namespace logitcal
