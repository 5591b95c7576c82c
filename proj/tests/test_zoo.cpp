#include <set>

#include "test_util.hpp"

using namespace logitcal;

namespace {

Dataset tiny_dataset(std::size_t per_class, std::uint64_t seed) {
  DatasetSpec s;
  s.train_per_class = per_class;
  s.test_per_class = 1;
  s.seed = seed;
  return generate_synthetic_dataset(s).train;
}

std::size_t count_kind(const ClassifierModel& m, LayerKind k) {
  std::size_t n = 0;
  for (const auto& l : m.layers()) n += l.kind == k;
  return n;
}

}  // namespace

TEST(Zoo, ArchitecturesAreDistinct) {
  std::set<std::vector<LayerKind>> topologies;
  for (const auto& id : kZooArchitectures) {
    const auto m = build_architecture(id, 0);
    EXPECT_EQ(m.arch_id(), id);
    EXPECT_EQ(m.class_count(), 10u);
    EXPECT_EQ(m.input_shape(), (Shape{1, 32, 32}));
    std::vector<LayerKind> kinds;
    for (const auto& l : m.layers()) kinds.push_back(l.kind);
    topologies.insert(kinds);
  }
  EXPECT_EQ(topologies.size(), kZooArchitectures.size());
  EXPECT_NE(build_architecture("cnn-a", 0).layer_count(),
            build_architecture("cnn-b", 0).layer_count());
  EXPECT_EQ(count_kind(build_architecture("mlp-d", 0), LayerKind::conv2d), 0u);
  for (const char* id : {"cnn-a", "cnn-b", "cnn-c"}) {
    EXPECT_GT(count_kind(build_architecture(id, 0), LayerKind::conv2d), 0u) << id;
  }
}

TEST(Zoo, UnknownArchitecture) {
  EXPECT_THROW(build_architecture("resnet", 0), Error);
}

TEST(Zoo, SeededInitIsReproducible) {
  const auto a = build_architecture("cnn-b", 7), b = build_architecture("cnn-b", 7);
  const auto c = build_architecture("cnn-b", 8);
  EXPECT_EQ(a.final_weights(), b.final_weights());
  EXPECT_FALSE(a.final_weights() == c.final_weights());
}

TEST(Zoo, UntrainedNearChance) {
  const auto data = tiny_dataset(30, 3);
  for (const auto& id : kZooArchitectures) {
    const double acc = accuracy(build_architecture(id, 11), data);
    EXPECT_LE(acc, 0.35) << id;
  }
}

TEST(Training, OverfitsEightImages) {
  Dataset d = tiny_dataset(1, 4);
  d.images.resize(8);
  d.labels.resize(8);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.05f;
  cfg.max_steps = 200;
  for (const char* id : {"cnn-a", "mlp-d"}) {
    const auto m = train_classifier(build_architecture(id, 1), d, cfg);
    EXPECT_EQ(accuracy(m, d), 1.0) << id;
  }
}

TEST(Training, SameSeedSameWeights) {
  const Dataset d = tiny_dataset(4, 5);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 9;
  const auto a = train_classifier(build_architecture("cnn-c", 2), d, cfg);
  const auto b = train_classifier(build_architecture("cnn-c", 2), d, cfg);
  for (std::size_t i = 0; i < a.layer_count(); ++i) {
    EXPECT_EQ(a.layers()[i].weight, b.layers()[i].weight);
    EXPECT_EQ(a.layers()[i].bias, b.layers()[i].bias);
  }
}

TEST(Training, DivergenceIsReported) {
  const Dataset d = tiny_dataset(4, 6);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 1e6f;
  EXPECT_THROW(train_classifier(build_architecture("mlp-d", 3), d, cfg), TrainingDivergedError);
}

TEST(Training, FeatureLogitConsistencyAfterTraining) {
  const Dataset d = tiny_dataset(3, 7);
  TrainConfig cfg;
  cfg.epochs = 2;
  const auto m = train_classifier(build_architecture("cnn-a", 4), d, cfg);
  const auto r = forward(m, d.images[0]);
  const Tensor& W = m.final_weights();
  for (std::size_t i = 0; i < m.class_count(); ++i) {
    double s = m.final_bias()[i];
    for (std::size_t j = 0; j < W.dim(1); ++j) s += double(W.at(i, j)) * r.feature[j];
    EXPECT_NEAR(r.logits[i], s, 1e-5 * std::max(1.0, std::fabs(s)));
  }
}
