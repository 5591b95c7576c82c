#include "test_util.hpp"

using namespace logitcal;

namespace {

const char* kPlan = R"(schema = 1
seed = 7
repetitions = 2
images = 12

[dataset]
source = synthetic
classes = 6
train_per_class = 40

[zoo]
architectures = cnn-a, mlp-d

[campaign]
; comment line
losses = ce, T=5, margin, ce+angle
targets = rank-3
ranks = 2, 6

[attack]
epsilon = 8
alpha = 1
iterations = 40
checkpoints = 10, 40
ti = false
di_probability = 0.5
)";

}  // namespace

TEST(Plan, ParsesEverySection) {
  const auto p = parse_plan(kPlan);
  EXPECT_EQ(p.seed, 7u);
  EXPECT_EQ(p.repetitions, 2u);
  EXPECT_EQ(p.images, 12u);
  EXPECT_EQ(p.dataset.class_count, 6u);
  EXPECT_EQ(p.dataset.train_per_class, 40u);
  EXPECT_EQ(p.architectures, (std::vector<std::string>{"cnn-a", "mlp-d"}));
  EXPECT_EQ(p.resolved_victims(), p.architectures);
  ASSERT_EQ(p.losses.size(), 4u);
  EXPECT_EQ(p.losses[1].label(), "T=5");
  EXPECT_EQ(p.losses[3].kind, LossKind::combo);
  EXPECT_EQ(p.targets, TargetSpec::ranked(3));
  EXPECT_EQ(p.ranks, (std::vector<std::size_t>{2, 6}));
  EXPECT_EQ(p.attack.epsilon, 8.0f);
  EXPECT_EQ(p.attack.max_iters, 40u);
  EXPECT_FALSE(p.attack.ti.enabled);
  EXPECT_TRUE(p.attack.mi.enabled);
  EXPECT_EQ(p.attack.di.probability, 0.5f);
}

TEST(Plan, DefaultsWhenOnlySchemaGiven) {
  const auto p = parse_plan("schema = 1\n");
  EXPECT_EQ(p.images, 100u);
  EXPECT_EQ(p.repetitions, 5u);
  EXPECT_EQ(p.attack.epsilon, 16.0f);
  EXPECT_EQ(p.attack.max_iters, 300u);
  EXPECT_EQ(p.architectures.size(), 4u);
}

TEST(Plan, Rejections) {
  EXPECT_THROW(parse_plan("seed = 1\n"), ConfigError);
  EXPECT_THROW(parse_plan("schema = 2\n"), ConfigError);
  EXPECT_THROW(parse_plan("schema = 1\nsed = 4\n"), ConfigError);
  EXPECT_THROW(parse_plan("schema = 1\n[attack]\nepsilon = lots\n"), ConfigError);
  EXPECT_THROW(parse_plan("schema = 1\n[attack]\nalpha = 20\n"), ConfigError);
  EXPECT_THROW(parse_plan("schema = 1\n[campaign]\nlosses = T=0\n"), ConfigError);
  EXPECT_THROW(parse_plan("schema = 1\n[campaign]\nlosses = hinge\n"), ConfigError);
  EXPECT_THROW(parse_plan("schema = 1\n[campaign]\nranks = 1\n"), ConfigError);
  EXPECT_THROW(parse_plan("schema = 1\n[campaign]\nranks = 11\n"), ConfigError);
  EXPECT_THROW(parse_plan("schema = 1\n[campaign]\ntargets = worst\n"), ConfigError);
  EXPECT_THROW(parse_plan("schema = 1\n[campaign]\nvictims = vgg\n"), ConfigError);
  EXPECT_THROW(parse_plan("schema = 1\n[zoo]\narchitectures = cnn-a, cnn-a\n"), ConfigError);
  EXPECT_THROW(parse_plan("schema = 1\n[attack]\nti = maybe\n"), ConfigError);
  EXPECT_THROW(load_plan("/nonexistent/plan.ini"), ConfigError);
}

TEST(Plan, UnknownKeyIsNamed) {
  try {
    parse_plan("schema = 1\n[attack]\nepsilom = 4\n", "p.ini");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("epsilom"), std::string::npos) << e.what();
  }
}

TEST(Plan, CanonicalFormRoundTrips) {
  const auto p = parse_plan(kPlan);
  const std::string c = canonical_plan(p);
  EXPECT_EQ(canonical_plan(parse_plan(c)), c);
  EXPECT_EQ(config_hash(parse_plan(c)), config_hash(p));
  EXPECT_EQ(config_hash(p).size(), 16u);
  EXPECT_NE(config_hash(p), config_hash(parse_plan("schema = 1\n")));
}

TEST(Plan, HashIgnoresFormattingButNotValues) {
  const auto a = parse_plan("schema = 1\n[attack]\nepsilon = 8\n");
  const auto b = parse_plan("schema=1\n\n[attack]\n  epsilon   =   8.0\n");
  const auto c = parse_plan("schema = 1\n[attack]\nepsilon = 9\n");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_NE(config_hash(a), config_hash(c));
}

TEST(Plan, RelativePathsResolveAgainstPlanDirectory) {
  const auto p = parse_plan(
      "schema = 1\n[dataset]\nsource = idx\ntrain_images = a.idx\ntrain_labels = b.idx\n"
      "test_images = /abs/c.idx\ntest_labels = d.idx\n[zoo]\nweights_dir = w\n",
      "p.ini", "/data/plans");
  EXPECT_EQ(p.dataset.train_images, "/data/plans/a.idx");
  EXPECT_EQ(p.dataset.test_images, "/abs/c.idx");
  EXPECT_EQ(p.weights_dir, "/data/plans/w");
}

TEST(TargetSpec, Parsing) {
  EXPECT_EQ(parse_target_spec("random"), TargetSpec::random());
  EXPECT_EQ(parse_target_spec("rank-10").rank, 10u);
  EXPECT_EQ(TargetSpec::ranked(4).label(), "rank-4");
  EXPECT_THROW(parse_target_spec("rank-"), ConfigError);
  EXPECT_THROW(parse_target_spec("rank-2x"), ConfigError);
}
