#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "logitcal/attack.hpp"
#include "logitcal/dataset.hpp"
#include "logitcal/diagnostics.hpp"
#include "logitcal/plan.hpp"
#include "logitcal/weights_io.hpp"
#include "logitcal/zoo.hpp"

namespace logitcal {

inline constexpr const char* kLogitcalVersion = "1.0.0";
inline constexpr int kReportSchema = 1;

// --------------------------------------------------------------------------
// Targets and success

/// Class indices ordered by descending logit; ties keep the lower index first.
inline std::vector<std::size_t> rank_classes(std::span<const float> logits) {
  std::vector<std::size_t> order(logits.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return logits[a] > logits[b];
  });
  return order;
}

/// Random mode: uniform over classes other than the clean argmax.
/// Rank-k mode: the class whose clean logit has rank k (rank 1 = argmax).
inline std::size_t select_target(std::span<const float> clean_logits,
                                 const TargetSpec& spec, std::mt19937_64& rng) {
  const std::size_t n = clean_logits.size();
  if (n < 2) throw ShapeError("select_target: need at least 2 classes");
  if (spec.mode == TargetMode::rank) {
    if (spec.rank < 2 || spec.rank > n) {
      throw ConfigError("target rank " + std::to_string(spec.rank) +
                        " outside [2, " + std::to_string(n) + "]");
    }
    return rank_classes(clean_logits)[spec.rank - 1];
  }
  const std::size_t top = argmax(clean_logits);
  std::uniform_int_distribution<std::size_t> dist(0, n - 2);
  const std::size_t d = dist(rng);
  return d >= top ? d + 1 : d;
}

inline bool evaluate_success(const ClassifierModel& victim, const Tensor& x_adv,
                             std::size_t target) {
  if (x_adv.shape() != victim.input_shape()) {
    throw ShapeError("evaluate_success: image shape " + shape_str(x_adv.shape()) +
                     " != victim input " + shape_str(victim.input_shape()));
  }
  return argmax(predict_logits(victim, x_adv).span()) == target;
}

// --------------------------------------------------------------------------
// Seeds

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6c6f67697463616cULL;
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

inline std::uint64_t repetition_seed(std::uint64_t seed, std::size_t rep) {
  return seed + rep;
}

/// Test-set indices attacked in one repetition.
inline std::vector<std::size_t> sample_images(std::size_t test_size, std::size_t count,
                                              std::uint64_t rep_seed) {
  if (count > test_size) {
    throw ConfigError("plan asks for " + std::to_string(count) +
                      " images but the test split holds " + std::to_string(test_size));
  }
  std::vector<std::size_t> idx(test_size);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(mix_seed({rep_seed, 0x1a6e}));
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(count);
  return idx;
}

inline std::uint64_t target_seed(std::uint64_t rep_seed, std::size_t set, std::size_t slot) {
  return mix_seed({rep_seed, set, slot, 0x7a6e});
}

inline std::uint64_t attack_seed(std::uint64_t rep_seed, std::size_t set, std::size_t slot) {
  return mix_seed({rep_seed, set, slot, 0xa77a});
}

// --------------------------------------------------------------------------
// Worker pool

inline std::size_t resolve_workers(std::size_t requested) {
  if (requested) return requested;
  return std::max<unsigned>(1, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n) on `workers` threads. Each job must write only
/// its own output slot. The exception of the lowest failing job is rethrown.
inline void parallel_for(std::size_t n, std::size_t workers,
                         const std::function<void(std::size_t)>& fn) {
  workers = std::min(std::max<std::size_t>(workers, 1), std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex mu;
  std::size_t failed_at = n;
  std::exception_ptr error;
  const auto work = [&] {
    for (std::size_t i = next++; i < n && !failed; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_at) {
          failed_at = i;
          error = std::current_exception();
        }
        failed = true;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

// --------------------------------------------------------------------------
// Zoo

struct Zoo {
  std::vector<ClassifierModel> models;
  std::vector<double> test_accuracy;

  std::size_t index_of(const std::string& arch_id) const {
    for (std::size_t i = 0; i < models.size(); ++i) {
      if (models[i].arch_id() == arch_id) return i;
    }
    throw ConfigError("model '" + arch_id + "' is not in the zoo");
  }
  const ClassifierModel& at(const std::string& arch_id) const {
    return models[index_of(arch_id)];
  }
};

inline std::uint64_t zoo_model_seed(std::uint64_t zoo_seed, const std::string& arch_id) {
  return mix_seed({zoo_seed, fnv1a(arch_id)});
}

/// Trains one zoo model from its deterministic seeds.
inline ClassifierModel train_zoo_model(const std::string& arch_id, std::uint64_t zoo_seed,
                                       const DataSplits& data) {
  const Tensor& first = data.train.images.at(0);
  ClassifierModel init = build_architecture(arch_id, zoo_model_seed(zoo_seed, arch_id),
                                            first.shape(), data.train.class_count);
  TrainConfig cfg = default_train_config(arch_id, zoo_model_seed(zoo_seed, arch_id) + 1);
  return train_classifier(init, data.train, cfg);
}

namespace detail {

inline std::string zoo_stamp(const ExperimentPlan& plan, const DataSplits& data) {
  std::ostringstream os;
  os << "zoo_seed=" << plan.zoo_seed << " train=" << data.train.checksum()
     << " version=" << kLogitcalVersion;
  return os.str();
}

}  // namespace detail

/// Loads the zoo from `weights_dir` when it was trained from the same data and
/// seed, otherwise trains it (and saves it when `weights_dir` is non-empty).
inline Zoo prepare_zoo(const ExperimentPlan& plan, const DataSplits& data,
                       const std::string& weights_dir, std::ostream* log = nullptr) {
  namespace fs = std::filesystem;
  const std::string stamp = detail::zoo_stamp(plan, data);
  const fs::path dir(weights_dir);
  bool reuse = false;
  if (!weights_dir.empty() && fs::exists(dir / "zoo.stamp")) {
    const auto bytes = detail::read_file((dir / "zoo.stamp").string());
    reuse = std::string(bytes.begin(), bytes.end()) == stamp + "\n";
  }
  Zoo zoo;
  for (const auto& arch : plan.architectures) {
    const fs::path file = dir / (arch + ".nnwt");
    std::optional<ClassifierModel> model;
    if (reuse && fs::exists(file)) {
      model = load_weights(file.string());
      if (model->arch_id() != arch || model->class_count() != data.test.class_count ||
          model->input_shape() != data.test.images.at(0).shape()) {
        throw FormatError(FormatError::Code::inconsistent,
                          file.string() + ": weights do not match the plan's zoo");
      }
      if (log) *log << "loaded " << file.string() << '\n';
    } else {
      if (log) *log << "training " << arch << " ..." << std::flush;
      model = train_zoo_model(arch, plan.zoo_seed, data);
      if (!weights_dir.empty()) {
        fs::create_directories(dir);
        save_weights(*model, file.string());
      }
      if (log) *log << " done\n";
    }
    zoo.test_accuracy.push_back(accuracy(*model, data.test));
    zoo.models.push_back(std::move(*model));
  }
  if (!weights_dir.empty() && !reuse) write_text((dir / "zoo.stamp").string(), stamp + "\n");
  return zoo;
}

// --------------------------------------------------------------------------
// Campaigns

struct SurrogateSet {
  std::string label;
  std::vector<std::size_t> members;  // zoo indices
  std::vector<float> weights;
  std::vector<std::size_t> victims;  // zoo indices evaluated for this set
};

struct CampaignSpec {
  std::string experiment;
  std::vector<SurrogateSet> sets;
  std::vector<LossSpec> losses;
  std::vector<TargetSpec> targets;
};

struct ReportCell {
  std::string targets;
  std::string surrogate;
  std::string victim;
  bool white_box = false;
  std::string loss;
  std::size_t checkpoint = 0;
  std::size_t success = 0;
  std::size_t total = 0;
  std::vector<std::size_t> rep_success;
  std::vector<std::size_t> rep_total;

  double rate() const {
    return total ? static_cast<double>(success) / static_cast<double>(total) : 0.0;
  }
  /// Mean of the per-repetition rates.
  double mean_rep_rate() const {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < rep_total.size(); ++r) {
      if (!rep_total[r]) continue;
      s += static_cast<double>(rep_success[r]) / static_cast<double>(rep_total[r]);
      ++n;
    }
    return n ? s / static_cast<double>(n) : 0.0;
  }
  const char* role() const { return white_box ? "white-box" : "black-box"; }
};

struct TargetRecord {
  std::size_t repetition;
  std::string targets;
  std::string surrogate;
  std::size_t slot;
  std::size_t image;
  std::uint32_t label;
  std::size_t clean_prediction;
  std::size_t target;
};

struct RepetitionInfo {
  std::size_t index;
  std::uint64_t seed;
  std::vector<std::size_t> images;
};

struct SummaryRow {
  std::string targets;
  std::string loss;
  std::size_t checkpoint;
  std::size_t success;
  std::size_t total;
  double rate() const {
    return total ? static_cast<double>(success) / static_cast<double>(total) : 0.0;
  }
};

struct TransferReport {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<std::string> zoo;
  std::vector<double> zoo_accuracy;
  std::vector<SurrogateSet> sets;
  std::vector<std::string> losses;
  std::vector<std::size_t> checkpoints;
  std::vector<RepetitionInfo> repetitions;
  std::vector<TargetRecord> targets;
  std::vector<ReportCell> cells;

  bool empty() const { return cells.empty(); }

  /// Pooled success over matching cells.
  template <class Pred>
  std::pair<std::size_t, std::size_t> pooled(Pred pred) const {
    std::size_t s = 0, t = 0;
    for (const auto& c : cells) {
      if (pred(c)) {
        s += c.success;
        t += c.total;
      }
    }
    return {s, t};
  }

  double black_box_rate(const std::string& loss, std::size_t checkpoint,
                        const std::string& targets_label = "") const {
    const auto [s, t] = pooled([&](const ReportCell& c) {
      return !c.white_box && c.loss == loss && c.checkpoint == checkpoint &&
             (targets_label.empty() || c.targets == targets_label);
    });
    return t ? static_cast<double>(s) / static_cast<double>(t) : 0.0;
  }

  /// Black-box pooled rows, one per (targets, loss), at `checkpoint`.
  std::vector<SummaryRow> summary(std::size_t checkpoint) const {
    std::vector<SummaryRow> rows;
    for (const auto& c : cells) {
      if (c.white_box || c.checkpoint != checkpoint) continue;
      auto it = std::find_if(rows.begin(), rows.end(), [&](const SummaryRow& r) {
        return r.targets == c.targets && r.loss == c.loss;
      });
      if (it == rows.end()) {
        rows.push_back({c.targets, c.loss, checkpoint, 0, 0});
        it = rows.end() - 1;
      }
      it->success += c.success;
      it->total += c.total;
    }
    return rows;
  }
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

struct CampaignOptions {
  std::size_t workers = 0;
  ProgressFn progress;
};

inline TransferReport run_campaign(const ExperimentPlan& plan, const CampaignSpec& spec,
                                   const Zoo& zoo, const Dataset& test,
                                   const CampaignOptions& opts = {}) {
  plan.validate();
  TransferReport rep;
  rep.experiment = spec.experiment;
  rep.seed = plan.seed;
  rep.config_hash = config_hash(plan);
  for (std::size_t i = 0; i < zoo.models.size(); ++i) {
    rep.zoo.push_back(zoo.models[i].arch_id());
    rep.zoo_accuracy.push_back(zoo.test_accuracy.at(i));
  }
  rep.sets = spec.sets;
  for (const auto& l : spec.losses) rep.losses.push_back(l.label());
  rep.checkpoints = plan.attack.checkpoints;
  std::sort(rep.checkpoints.begin(), rep.checkpoints.end());
  rep.checkpoints.erase(std::unique(rep.checkpoints.begin(), rep.checkpoints.end()),
                        rep.checkpoints.end());

  const std::size_t R = plan.repetitions, G = spec.targets.size(), S = spec.sets.size(),
                    I = plan.images, L = spec.losses.size(), C = rep.checkpoints.size();
  for (std::size_t r = 0; r < R; ++r) {
    const std::uint64_t rs = repetition_seed(plan.seed, r);
    rep.repetitions.push_back({r, rs, sample_images(test.size(), I, rs)});
  }
  if (I == 0 || S == 0) return rep;

  std::vector<Ensemble> ensembles;
  for (const auto& set : spec.sets) {
    Ensemble e;
    for (std::size_t m : set.members) e.models.push_back(&zoo.models.at(m));
    e.weights = set.weights;
    e.validate();
    ensembles.push_back(std::move(e));
  }

  // Units are (repetition, target setting, surrogate set, image slot).
  struct Unit {
    std::size_t r, g, s, slot, image;
    std::size_t target;
    std::uint64_t seed;
  };
  std::vector<Unit> units;
  units.reserve(R * G * S * I);
  for (std::size_t r = 0; r < R; ++r) {
    const std::uint64_t rs = rep.repetitions[r].seed;
    for (std::size_t g = 0; g < G; ++g) {
      for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t i = 0; i < I; ++i) {
          const std::size_t img = rep.repetitions[r].images[i];
          const Tensor clean = ensemble_forward(ensembles[s], test.images[img]).logits;
          std::mt19937_64 rng(target_seed(rs, s, i));
          const std::size_t t = select_target(clean.span(), spec.targets[g], rng);
          units.push_back({r, g, s, i, img, t, attack_seed(rs, s, i)});
          rep.targets.push_back({r, spec.targets[g].label(), spec.sets[s].label, i, img,
                                 test.labels[img], argmax(clean.span()), t});
        }
      }
    }
  }

  const std::size_t jobs = units.size() * L;
  std::vector<std::vector<std::uint8_t>> hits(jobs);
  std::mutex progress_mu;
  std::size_t done = 0;
  parallel_for(jobs, resolve_workers(opts.workers ? opts.workers : plan.workers),
               [&](std::size_t j) {
    const Unit& u = units[j / L];
    const LossSpec& loss = spec.losses[j % L];
    AttackConfig cfg = plan.attack;
    cfg.seed = u.seed;
    cfg.verify_constraints = true;
    const AttackResult res =
        run_targeted_attack(ensembles[u.s], test.images[u.image], u.target, loss, cfg);
    const auto& victims = spec.sets[u.s].victims;
    std::vector<std::uint8_t> h(victims.size() * C, 0);
    for (std::size_t c = 0; c < C; ++c) {
      const auto snap = std::find_if(res.snapshots.begin(), res.snapshots.end(),
                                     [&](const Snapshot& sn) {
                                       return sn.iteration == rep.checkpoints[c];
                                     });
      for (std::size_t v = 0; v < victims.size(); ++v) {
        h[v * C + c] = evaluate_success(zoo.models[victims[v]], snap->x_adv, u.target);
      }
    }
    hits[j] = std::move(h);
    if (opts.progress) {
      std::lock_guard lock(progress_mu);
      opts.progress(++done, jobs);
    }
  });

  // Cells in (targets, set, victim, loss, checkpoint) order.
  std::vector<std::size_t> set_offset(S + 1, 0);
  for (std::size_t s = 0; s < S; ++s) {
    set_offset[s + 1] = set_offset[s] + spec.sets[s].victims.size() * L * C;
  }
  const std::size_t per_g = set_offset[S];
  rep.cells.resize(G * per_g);
  for (std::size_t g = 0; g < G; ++g) {
    for (std::size_t s = 0; s < S; ++s) {
      const auto& set = spec.sets[s];
      for (std::size_t v = 0; v < set.victims.size(); ++v) {
        for (std::size_t l = 0; l < L; ++l) {
          for (std::size_t c = 0; c < C; ++c) {
            ReportCell& cell = rep.cells[g * per_g + set_offset[s] + (v * L + l) * C + c];
            cell.targets = spec.targets[g].label();
            cell.surrogate = set.label;
            cell.victim = zoo.models[set.victims[v]].arch_id();
            cell.white_box = std::find(set.members.begin(), set.members.end(),
                                       set.victims[v]) != set.members.end();
            cell.loss = rep.losses[l];
            cell.checkpoint = rep.checkpoints[c];
            cell.rep_success.assign(R, 0);
            cell.rep_total.assign(R, 0);
          }
        }
      }
    }
  }
  for (std::size_t j = 0; j < jobs; ++j) {
    const Unit& u = units[j / L];
    const std::size_t l = j % L;
    const std::size_t nv = spec.sets[u.s].victims.size();
    for (std::size_t v = 0; v < nv; ++v) {
      for (std::size_t c = 0; c < C; ++c) {
        ReportCell& cell = rep.cells[u.g * per_g + set_offset[u.s] + (v * L + l) * C + c];
        const std::size_t hit = hits[j][v * C + c];
        cell.success += hit;
        cell.total += 1;
        cell.rep_success[u.r] += hit;
        cell.rep_total[u.r] += 1;
      }
    }
  }
  return rep;
}

namespace detail {

inline std::vector<std::size_t> zoo_indices(const Zoo& zoo,
                                            const std::vector<std::string>& ids) {
  std::vector<std::size_t> out;
  for (const auto& id : ids) out.push_back(zoo.index_of(id));
  return out;
}

inline std::vector<SurrogateSet> single_sets(const ExperimentPlan& plan, const Zoo& zoo,
                                             bool include_white_box) {
  std::vector<SurrogateSet> sets;
  const auto victims = zoo_indices(zoo, plan.resolved_victims());
  for (std::size_t s : zoo_indices(zoo, plan.resolved_surrogates())) {
    SurrogateSet set{zoo.models[s].arch_id(), {s}, {1.0f}, {}};
    for (std::size_t v : victims) {
      if (v != s || include_white_box) set.victims.push_back(v);
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

}  // namespace detail

/// Each surrogate attacks alone; every victim is evaluated, the surrogate
/// itself as a labelled white-box column.
inline TransferReport run_single_model_transfer(const ExperimentPlan& plan, const Zoo& zoo,
                                                const Dataset& test,
                                                const CampaignOptions& opts = {}) {
  CampaignSpec spec{"transfer", detail::single_sets(plan, zoo, true), plan.losses,
                    {plan.targets}};
  return run_campaign(plan, spec, zoo, test, opts);
}

inline std::vector<LossSpec> temperature_sweep_losses(const std::vector<float>& temps) {
  std::vector<LossSpec> losses{LossSpec::ce()};
  for (float t : temps) losses.push_back(LossSpec::temperature_ce(t));
  losses.push_back(LossSpec::logit());
  return losses;
}

/// One column per temperature, with ce and logit reference columns.
inline TransferReport run_temperature_sweep(const ExperimentPlan& plan, const Zoo& zoo,
                                            const Dataset& test,
                                            const std::vector<float>& temps,
                                            const CampaignOptions& opts = {}) {
  CampaignSpec spec{"sweep-t", detail::single_sets(plan, zoo, true),
                    temperature_sweep_losses(temps), {plan.targets}};
  return run_campaign(plan, spec, zoo, test, opts);
}

/// For each zoo model, an equal-weight ensemble of all the others attacks it.
/// Single-surrogate rows against every hold-out are included as the baseline.
inline TransferReport run_ensemble_holdout(const ExperimentPlan& plan, const Zoo& zoo,
                                           const Dataset& test,
                                           const CampaignOptions& opts = {}) {
  const std::size_t n = zoo.models.size();
  if (n < 2) throw ConfigError("ensemble hold-out needs at least 2 zoo models");
  CampaignSpec spec{"ensemble", {}, plan.losses, {plan.targets}};
  for (std::size_t h = 0; h < n; ++h) {
    SurrogateSet set;
    set.label = "ens-" + zoo.models[h].arch_id();
    for (std::size_t m = 0; m < n; ++m) {
      if (m != h) set.members.push_back(m);
    }
    set.weights.assign(set.members.size(), 1.0f / static_cast<float>(set.members.size()));
    set.victims = {h};
    spec.sets.push_back(std::move(set));
  }
  for (std::size_t s = 0; s < n; ++s) {
    SurrogateSet set{zoo.models[s].arch_id(), {s}, {1.0f}, {}};
    for (std::size_t v = 0; v < n; ++v) {
      if (v != s) set.victims.push_back(v);
    }
    spec.sets.push_back(std::move(set));
  }
  return run_campaign(plan, spec, zoo, test, opts);
}

/// One target setting per rank; black-box victims only.
inline TransferReport run_varied_target(const ExperimentPlan& plan, const Zoo& zoo,
                                        const Dataset& test,
                                        const std::vector<std::size_t>& ranks,
                                        const CampaignOptions& opts = {}) {
  CampaignSpec spec{"vary-target", detail::single_sets(plan, zoo, false), plan.losses, {}};
  const std::size_t n = zoo.models.front().class_count();
  for (std::size_t k : ranks) {
    if (k < 2 || k > n) {
      throw ConfigError("target rank " + std::to_string(k) + " outside [2, " +
                        std::to_string(n) + "]");
    }
    spec.targets.push_back(TargetSpec::ranked(k));
  }
  return run_campaign(plan, spec, zoo, test, opts);
}

// --------------------------------------------------------------------------
// Report output

inline constexpr const char* kCellsCsvHeader =
    "targets,surrogate,victim,role,loss,checkpoint,success,total,rate,mean_rep_rate";
inline constexpr const char* kSummaryCsvHeader =
    "targets,loss,checkpoint,success,total,rate";

inline std::string cells_csv(const TransferReport& r) {
  std::ostringstream os;
  os << kCellsCsvHeader << '\n';
  for (const auto& c : r.cells) {
    os << c.targets << ',' << c.surrogate << ',' << c.victim << ',' << c.role() << ','
       << c.loss << ',' << c.checkpoint << ',' << c.success << ',' << c.total << ','
       << format_number(c.rate()) << ',' << format_number(c.mean_rep_rate()) << '\n';
  }
  return os.str();
}

inline std::string summary_csv(const TransferReport& r) {
  std::ostringstream os;
  os << kSummaryCsvHeader << '\n';
  if (r.checkpoints.empty()) return os.str();
  for (const auto& row : r.summary(r.checkpoints.back())) {
    os << row.targets << ',' << row.loss << ',' << row.checkpoint << ',' << row.success
       << ',' << row.total << ',' << format_number(row.rate()) << '\n';
  }
  return os.str();
}

inline nlohmann::ordered_json report_json(const TransferReport& r) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["schema"] = kReportSchema;
  j["experiment"] = r.experiment;
  j["version"] = kLogitcalVersion;
  j["seed"] = r.seed;
  j["config_hash"] = r.config_hash;
  ordered_json zoo = ordered_json::array();
  for (std::size_t i = 0; i < r.zoo.size(); ++i) {
    zoo.push_back({{"arch", r.zoo[i]}, {"test_accuracy", r.zoo_accuracy[i]}});
  }
  j["zoo"] = zoo;
  j["losses"] = r.losses;
  j["checkpoints"] = r.checkpoints;
  ordered_json sets = ordered_json::array();
  for (const auto& s : r.sets) {
    ordered_json members = ordered_json::array();
    for (std::size_t m : s.members) members.push_back(r.zoo[m]);
    ordered_json victims = ordered_json::array();
    for (std::size_t v : s.victims) victims.push_back(r.zoo[v]);
    sets.push_back({{"label", s.label}, {"members", members}, {"weights", s.weights},
                    {"victims", victims}});
  }
  j["surrogate_sets"] = sets;
  ordered_json reps = ordered_json::array();
  for (const auto& rp : r.repetitions) {
    reps.push_back({{"index", rp.index}, {"seed", rp.seed}, {"images", rp.images}});
  }
  j["repetitions"] = reps;
  ordered_json targets = ordered_json::array();
  for (const auto& t : r.targets) {
    targets.push_back({{"repetition", t.repetition}, {"targets", t.targets},
                       {"surrogate", t.surrogate}, {"slot", t.slot}, {"image", t.image},
                       {"label", t.label}, {"clean_prediction", t.clean_prediction},
                       {"target", t.target}});
  }
  j["targets"] = targets;
  ordered_json cells = ordered_json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"targets", c.targets}, {"surrogate", c.surrogate},
                     {"victim", c.victim}, {"role", c.role()}, {"loss", c.loss},
                     {"checkpoint", c.checkpoint}, {"success", c.success},
                     {"total", c.total}, {"rate", c.rate()},
                     {"rep_success", c.rep_success}, {"rep_total", c.rep_total},
                     {"mean_rep_rate", c.mean_rep_rate()}});
  }
  j["cells"] = cells;
  ordered_json summary = ordered_json::array();
  if (!r.checkpoints.empty()) {
    for (const auto& s : r.summary(r.checkpoints.back())) {
      summary.push_back({{"targets", s.targets}, {"loss", s.loss},
                         {"checkpoint", s.checkpoint}, {"success", s.success},
                         {"total", s.total}, {"rate", s.rate()}});
    }
  }
  j["summary"] = summary;
  return j;
}

/// Writes <stem>.csv, <stem>_summary.csv and <stem>.json into `dir`.
inline void write_report(const TransferReport& r, const std::string& dir,
                         const std::string& stem) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_text((fs::path(dir) / (stem + ".csv")).string(), cells_csv(r));
  write_text((fs::path(dir) / (stem + "_summary.csv")).string(), summary_csv(r));
  write_text((fs::path(dir) / (stem + ".json")).string(), report_json(r).dump(2) + "\n");
}

// --------------------------------------------------------------------------
// Adversarial image export

struct AdversarialRecord {
  std::size_t image;
  std::uint32_t label;
  std::size_t target;
  std::string surrogate;
  std::string loss;
  bool white_box_success;
};

/// Writes the images as IDX (labels hold the targets) plus a JSON manifest.
/// Pixels are written as bytes; attack outputs from integer images with
/// integer epsilon and step size are integer-valued, so nothing is lost.
inline void export_adversarial(const std::vector<Tensor>& images,
                               const std::vector<AdversarialRecord>& records,
                               const std::string& dir, std::size_t class_count) {
  namespace fs = std::filesystem;
  if (images.size() != records.size()) throw Error("export_adversarial: size mismatch");
  fs::create_directories(dir);
  Dataset d;
  d.class_count = class_count;
  d.images = images;
  for (const auto& r : records) d.labels.push_back(static_cast<std::uint32_t>(r.target));
  const std::string img_path = (fs::path(dir) / "adv-images.idx").string();
  const std::string lab_path = (fs::path(dir) / "adv-targets.idx").string();
  export_idx(d, img_path, lab_path);
  nlohmann::ordered_json m;
  m["schema"] = kReportSchema;
  m["images_file"] = "adv-images.idx";
  m["targets_file"] = "adv-targets.idx";
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    entries.push_back({{"index", i}, {"image", r.image}, {"label", r.label},
                       {"target", r.target}, {"surrogate", r.surrogate}, {"loss", r.loss},
                       {"white_box_success", r.white_box_success}});
  }
  m["entries"] = entries;
  write_text((fs::path(dir) / "manifest.json").string(), m.dump(2) + "\n");
}

}  // namespace logitcal
