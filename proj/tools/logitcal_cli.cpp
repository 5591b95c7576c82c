#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "logitcal/logitcal.hpp"

namespace fs = std::filesystem;
using namespace logitcal;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct CommonOptions {
  std::string plan_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::size_t workers = 0;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--plan", o.plan_path, "Experiment plan file");
  cmd->add_option("--seed", o.seed, "Override the plan's master seed");
  cmd->add_option("--out-dir", o.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--workers", o.workers, "Worker threads (0: all cores)");
  cmd->add_flag("-q,--quiet", o.quiet, "No progress output");
}

ExperimentPlan resolve_plan(const CommonOptions& o) {
  ExperimentPlan plan;
  if (!o.plan_path.empty()) {
    if (!fs::exists(o.plan_path)) throw ConfigError("plan file not found: " + o.plan_path);
    plan = load_plan(o.plan_path);
  }
  if (o.seed) plan.seed = *o.seed;
  if (o.workers) plan.workers = o.workers;
  plan.validate();
  return plan;
}

std::string weights_dir_of(const ExperimentPlan& plan, const CommonOptions& o) {
  return plan.weights_dir.empty() ? (fs::path(o.out_dir) / "zoo").string()
                                  : plan.weights_dir;
}

ProgressFn progress_printer(bool quiet) {
  if (quiet) return {};
  return [](std::size_t done, std::size_t total) {
    if (done == total || done % 50 == 0) {
      std::cerr << "\rattacks " << done << "/" << total << std::flush;
      if (done == total) std::cerr << '\n';
    }
  };
}

struct Loaded {
  DataSplits data;
  Zoo zoo;
};

Loaded load_all(const ExperimentPlan& plan, const CommonOptions& o) {
  Loaded l{load_dataset(plan.dataset), {}};
  l.zoo = prepare_zoo(plan, l.data, weights_dir_of(plan, o), o.quiet ? nullptr : &std::cerr);
  return l;
}

void print_summary(const TransferReport& r) {
  if (r.checkpoints.empty()) return;
  std::cout << "black-box success at iteration " << r.checkpoints.back() << ":\n";
  for (const auto& row : r.summary(r.checkpoints.back())) {
    std::cout << "  " << row.targets << "  " << row.loss << "  " << row.success << "/"
              << row.total << "  " << format_number(row.rate()) << '\n';
  }
}

int cmd_gen_data(const CommonOptions& o) {
  const ExperimentPlan plan = resolve_plan(o);
  const DataSplits d = load_dataset(plan.dataset);
  fs::create_directories(o.out_dir);
  const fs::path out(o.out_dir);
  export_idx(d.train, (out / "train-images.idx").string(), (out / "train-labels.idx").string());
  export_idx(d.test, (out / "test-images.idx").string(), (out / "test-labels.idx").string());
  std::cout << "wrote " << d.train.size() << " train and " << d.test.size()
            << " test images to " << o.out_dir << '\n';
  return kExitOk;
}

int cmd_train_zoo(const CommonOptions& o) {
  const ExperimentPlan plan = resolve_plan(o);
  const Loaded l = load_all(plan, o);
  nlohmann::ordered_json j;
  j["schema"] = kReportSchema;
  j["version"] = kLogitcalVersion;
  j["zoo_seed"] = plan.zoo_seed;
  j["train_checksum"] = l.data.train.checksum();
  nlohmann::ordered_json models = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < l.zoo.models.size(); ++i) {
    const auto& m = l.zoo.models[i];
    models.push_back({{"arch", m.arch_id()},
                      {"file", m.arch_id() + ".nnwt"},
                      {"parameters", m.parameter_count()},
                      {"test_accuracy", l.zoo.test_accuracy[i]}});
    std::cout << m.arch_id() << "  test accuracy " << format_number(l.zoo.test_accuracy[i])
              << '\n';
  }
  j["models"] = models;
  const std::string dir = weights_dir_of(plan, o);
  write_text((fs::path(dir) / "zoo.json").string(), j.dump(2) + "\n");
  return kExitOk;
}

struct AttackOptions {
  std::string surrogate;
  std::string loss;
  std::vector<std::size_t> images;
  std::size_t count = 1;
};

int cmd_attack(const CommonOptions& o, const AttackOptions& a) {
  const ExperimentPlan plan = resolve_plan(o);
  const std::string surrogate =
      a.surrogate.empty() ? plan.resolved_surrogates().front() : a.surrogate;
  const LossSpec loss = a.loss.empty() ? plan.losses.front() : parse_loss(a.loss);
  const Loaded l = load_all(plan, o);
  const std::size_t s = l.zoo.index_of(surrogate);
  const Ensemble ens = Ensemble::single(l.zoo.models[s]);

  std::vector<std::size_t> images = a.images;
  if (images.empty()) {
    for (std::size_t i = 0; i < a.count; ++i) images.push_back(i);
  }
  const std::uint64_t rs = repetition_seed(plan.seed, 0);
  std::vector<Tensor> adv;
  std::vector<AdversarialRecord> records;
  std::vector<TrajectoryRecord> trajectories;
  const fs::path out(o.out_dir);
  fs::create_directories(out);
  for (std::size_t slot = 0; slot < images.size(); ++slot) {
    const std::size_t img = images[slot];
    if (img >= l.data.test.size()) {
      throw ConfigError("image index " + std::to_string(img) + " outside the test split");
    }
    const Tensor& x = l.data.test.images[img];
    std::mt19937_64 rng(target_seed(rs, s, slot));
    const std::size_t target = select_target(predict_logits(l.zoo.models[s], x).span(),
                                             plan.targets, rng);
    AttackConfig cfg = plan.attack;
    cfg.seed = attack_seed(rs, s, slot);
    AttackResult res = run_targeted_attack(ens, x, target, loss, cfg, true);
    emit_csv(res.trajectory.rows,
             (out / ("trajectory-" + std::to_string(img) + ".csv")).string());
    records.push_back({img, l.data.test.labels[img], target, surrogate, loss.label(),
                       res.white_box_success});
    adv.push_back(std::move(res.x_adv));
    trajectories.push_back(std::move(res.trajectory));
    if (!o.quiet) {
      std::cout << "image " << img << "  label " << l.data.test.labels[img] << "  target "
                << target << "  white-box " << (records.back().white_box_success ? "hit" : "miss")
                << "  final margin " << format_number(trajectories.back().rows.back().margin)
                << '\n';
    }
  }
  if (!trajectories.empty()) {
    emit_csv(aggregate(trajectories), (out / "trajectory.csv").string());
  }
  export_adversarial(adv, records, o.out_dir, l.data.test.class_count);
  return kExitOk;
}

int cmd_campaign(const std::string& name, const CommonOptions& o) {
  const ExperimentPlan plan = resolve_plan(o);
  const Loaded l = load_all(plan, o);
  CampaignOptions opts{plan.workers, progress_printer(o.quiet)};
  TransferReport r;
  if (name == "transfer") {
    r = run_single_model_transfer(plan, l.zoo, l.data.test, opts);
  } else if (name == "sweep-t") {
    r = run_temperature_sweep(plan, l.zoo, l.data.test, plan.temperatures, opts);
  } else if (name == "ensemble") {
    r = run_ensemble_holdout(plan, l.zoo, l.data.test, opts);
  } else {
    r = run_varied_target(plan, l.zoo, l.data.test, plan.ranks, opts);
  }
  write_report(r, o.out_dir, name);
  if (!o.quiet) print_summary(r);
  return kExitOk;
}

struct CurveOptions {
  double min = -10.0;
  double max = 30.0;
  double step = 0.5;
};

int cmd_diag_curve(const CommonOptions& o, const CurveOptions& c, bool to_stdout) {
  if (!o.plan_path.empty()) resolve_plan(o);
  std::vector<double> grid;
  try {
    grid = margin_grid(c.min, c.max, c.step);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const std::string csv = to_csv(saturation_curve(grid));
  if (to_stdout) {
    std::cout << csv;
  } else {
    fs::create_directories(o.out_dir);
    write_text((fs::path(o.out_dir) / "curve.csv").string(), csv);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Targeted transfer attacks with logit calibration on a small model zoo"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kLogitcalVersion);

  CommonOptions common;
  AttackOptions attack;
  CurveOptions curve;
  bool curve_stdout = false;

  auto* gen = app.add_subcommand("gen-data", "Export the dataset as IDX files");
  auto* train = app.add_subcommand("train-zoo", "Train (or load) the model zoo");
  auto* atk = app.add_subcommand("attack", "Attack test images; write images and trajectories");
  atk->add_option("--surrogate", attack.surrogate, "Surrogate model id");
  atk->add_option("--loss", attack.loss, "Loss label, e.g. ce, T=5, margin, T=5+angle");
  atk->add_option("--image", attack.images, "Test image index (repeatable)");
  atk->add_option("--count", attack.count, "Attack the first N test images")
      ->capture_default_str();
  auto* transfer = app.add_subcommand("transfer", "Single-model transfer campaign");
  auto* sweep = app.add_subcommand("sweep-t", "Temperature sweep campaign");
  auto* ens = app.add_subcommand("ensemble", "Ensemble hold-out campaign");
  auto* vary = app.add_subcommand("vary-target", "Target-rank sweep campaign");
  auto* diag = app.add_subcommand("diag-curve", "Two-class probability vs margin CSV");
  diag->add_option("--min", curve.min, "Smallest margin")->capture_default_str();
  diag->add_option("--max", curve.max, "Largest margin")->capture_default_str();
  diag->add_option("--step", curve.step, "Grid step")->capture_default_str();
  diag->add_flag("--stdout", curve_stdout, "Print instead of writing curve.csv");
  for (auto* cmd : {gen, train, atk, transfer, sweep, ens, vary, diag}) {
    add_common(cmd, common);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) return cmd_gen_data(common);
    if (*train) return cmd_train_zoo(common);
    if (*atk) return cmd_attack(common, attack);
    if (*diag) return cmd_diag_curve(common, curve, curve_stdout);
    for (auto* cmd : {transfer, sweep, ens, vary}) {
      if (*cmd) return cmd_campaign(cmd->get_name(), common);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const LossError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}
