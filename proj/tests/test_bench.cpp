#include "test_util.hpp"

using namespace logitcal;

namespace {

struct MiniWorld {
  ExperimentPlan plan;
  Zoo zoo;
  Dataset test;
};

// Untrained zoo models and a small test split keep campaigns fast.
MiniWorld mini_world() {
  MiniWorld w;
  w.plan = parse_plan(
      "schema = 1\nseed = 3\nrepetitions = 2\nimages = 3\n"
      "[zoo]\narchitectures = cnn-a, cnn-c, mlp-d\n"
      "[campaign]\nlosses = ce, T=5, margin\n"
      "[attack]\niterations = 6\ncheckpoints = 3, 6\n");
  DatasetSpec ds;
  ds.train_per_class = 1;
  ds.test_per_class = 1;
  w.test = generate_synthetic_dataset(ds).test;
  for (const auto& id : w.plan.architectures) {
    w.zoo.models.push_back(build_architecture(id, zoo_model_seed(0, id)));
    w.zoo.test_accuracy.push_back(accuracy(w.zoo.models.back(), w.test));
  }
  return w;
}

}  // namespace

TEST(SelectTarget, RankMode) {
  std::mt19937_64 rng(0);
  const std::vector<float> z{0.1f, 3.0f, 2.0f, 2.0f, -1.0f};
  EXPECT_EQ(select_target(z, TargetSpec::ranked(2), rng), 2u);
  EXPECT_EQ(select_target(z, TargetSpec::ranked(3), rng), 3u);
  EXPECT_EQ(select_target(z, TargetSpec::ranked(5), rng), 4u);
  EXPECT_THROW(select_target(z, TargetSpec::ranked(1), rng), ConfigError);
  EXPECT_THROW(select_target(z, TargetSpec::ranked(6), rng), ConfigError);
}

TEST(SelectTarget, RandomNeverPicksArgmaxAndCoversTheRest) {
  std::mt19937_64 rng(1);
  const std::vector<float> z{0.0f, 1.0f, 5.0f, 2.0f};
  std::vector<std::size_t> hist(4);
  for (int i = 0; i < 10000; ++i) ++hist[select_target(z, TargetSpec::random(), rng)];
  EXPECT_EQ(hist[2], 0u);
  for (std::size_t c : {0u, 1u, 3u}) EXPECT_GT(hist[c], 3000u);
}

TEST(EvaluateSuccess, TieGoesToLowerIndex) {
  const ClassifierModel m("zero", {2}, {Layer::dense(Tensor({3, 2}), Tensor({3}))});
  EXPECT_TRUE(evaluate_success(m, Tensor::vector({1, 1}), 0));
  EXPECT_FALSE(evaluate_success(m, Tensor::vector({1, 1}), 1));
  EXPECT_THROW(evaluate_success(m, Tensor::vector({1, 1, 1}), 0), ShapeError);
}

TEST(Seeds, SamplingIsDeterministicAndDistinct) {
  const auto a = sample_images(500, 100, 7), b = sample_images(500, 100, 7);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, sample_images(500, 100, 8));
  std::set<std::size_t> uniq(a.begin(), a.end());
  EXPECT_EQ(uniq.size(), 100u);
  EXPECT_THROW(sample_images(10, 11, 0), ConfigError);
  EXPECT_NE(target_seed(1, 0, 0), attack_seed(1, 0, 0));
  EXPECT_NE(target_seed(1, 0, 1), target_seed(1, 1, 0));
}

TEST(ParallelFor, EveryJobOnceAndLowestErrorWins) {
  for (std::size_t workers : {1u, 4u}) {
    std::vector<int> seen(200, 0);
    parallel_for(seen.size(), workers, [&](std::size_t i) { seen[i] += 1; });
    EXPECT_EQ(std::count(seen.begin(), seen.end(), 1), 200);
  }
  try {
    parallel_for(50, 1, [](std::size_t i) {
      if (i == 7 || i == 30) throw Error("job " + std::to_string(i));
    });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()), "job 7");
  }
}

TEST(Report, EmptyWhenNoImages) {
  auto w = mini_world();
  w.plan.images = 0;
  const auto r = run_single_model_transfer(w.plan, w.zoo, w.test);
  EXPECT_TRUE(r.empty());
  EXPECT_EQ(cells_csv(r), std::string(kCellsCsvHeader) + "\n");
  EXPECT_EQ(summary_csv(r), std::string(kSummaryCsvHeader) + "\n");
}

TEST(Campaign, CellLayoutAndRateConsistency) {
  const auto w = mini_world();
  const auto r = run_single_model_transfer(w.plan, w.zoo, w.test, {1, {}});
  // 3 surrogates x 3 victims x 3 losses x 2 checkpoints
  ASSERT_EQ(r.cells.size(), 54u);
  std::size_t white = 0;
  for (const auto& c : r.cells) {
    EXPECT_EQ(c.total, w.plan.images * w.plan.repetitions);
    std::size_t s = 0, t = 0;
    for (std::size_t k = 0; k < c.rep_total.size(); ++k) {
      s += c.rep_success[k];
      t += c.rep_total[k];
    }
    EXPECT_EQ(s, c.success);
    EXPECT_EQ(t, c.total);
    EXPECT_DOUBLE_EQ(c.rate(), double(c.success) / double(c.total));
    white += c.white_box;
    EXPECT_EQ(c.white_box, c.surrogate == c.victim);
  }
  EXPECT_EQ(white, 18u);
  EXPECT_EQ(r.targets.size(), 3u * 3u * 2u);
  for (const auto& t : r.targets) EXPECT_NE(t.target, t.clean_prediction);
  const auto rows = r.summary(6);
  EXPECT_EQ(rows.size(), 3u);
  for (const auto& row : rows) EXPECT_EQ(row.total, 6u * 3u * 2u);
}

TEST(Campaign, VariedTargetRowCount) {
  const auto w = mini_world();
  const std::vector<std::size_t> ranks{2, 5, 10};
  const auto r = run_varied_target(w.plan, w.zoo, w.test, ranks, {1, {}});
  EXPECT_EQ(r.summary(6).size(), ranks.size() * w.plan.losses.size());
  for (const auto& c : r.cells) EXPECT_FALSE(c.white_box);
  for (const auto& t : r.targets) {
    EXPECT_TRUE(t.targets == "rank-2" || t.targets == "rank-5" || t.targets == "rank-10");
  }
  EXPECT_THROW(run_varied_target(w.plan, w.zoo, w.test, {11}), ConfigError);
}

TEST(Campaign, TemperatureOneMatchesCeColumn) {
  const auto w = mini_world();
  const auto r = run_temperature_sweep(w.plan, w.zoo, w.test, {1.0f}, {1, {}});
  for (const auto& c : r.cells) {
    if (c.loss != "T=1") continue;
    const auto ce = std::find_if(r.cells.begin(), r.cells.end(), [&](const ReportCell& o) {
      return o.loss == "ce" && o.surrogate == c.surrogate && o.victim == c.victim &&
             o.checkpoint == c.checkpoint;
    });
    ASSERT_NE(ce, r.cells.end());
    EXPECT_EQ(ce->rep_success, c.rep_success);
  }
}

TEST(Campaign, EnsembleHoldoutLayout) {
  const auto w = mini_world();
  const auto r = run_ensemble_holdout(w.plan, w.zoo, w.test, {1, {}});
  ASSERT_EQ(r.sets.size(), 6u);
  EXPECT_EQ(r.sets[0].label, "ens-cnn-a");
  EXPECT_EQ(r.sets[0].members, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(r.sets[0].victims, (std::vector<std::size_t>{0}));
  for (const auto& c : r.cells) EXPECT_FALSE(c.white_box);
}

TEST(Campaign, WorkerCountDoesNotChangeOutput) {
  const auto w = mini_world();
  const auto a = run_single_model_transfer(w.plan, w.zoo, w.test, {1, {}});
  const auto b = run_single_model_transfer(w.plan, w.zoo, w.test, {3, {}});
  EXPECT_EQ(cells_csv(a), cells_csv(b));
  EXPECT_EQ(report_json(a).dump(), report_json(b).dump());
}

TEST(Export, AdversarialIdxRoundTrip) {
  const auto dir = testutil::temp_dir("adv");
  std::mt19937_64 rng(5);
  std::vector<Tensor> imgs;
  std::vector<AdversarialRecord> recs;
  for (std::size_t i = 0; i < 3; ++i) {
    Tensor t = testutil::random_tensor({1, 8, 8}, rng, 0, 255);
    for (float& v : t.span()) v = std::round(v);
    imgs.push_back(t);
    recs.push_back({});
    recs.back().target = static_cast<std::uint32_t>(i + 2);
  }
  export_adversarial(imgs, recs, dir, 10);
  const auto back = ingest_idx(dir + "/adv-images.idx", dir + "/adv-targets.idx");
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.images[i], imgs[i]);
    EXPECT_EQ(back.labels[i], i + 2);
  }
  EXPECT_TRUE(std::filesystem::exists(dir + "/manifest.json"));
}
