#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "logitcal/attack.hpp"
#include "logitcal/dataset.hpp"
#include "logitcal/losses.hpp"
#include "logitcal/zoo.hpp"

// Plan files are INI-style text:
//
//   schema = 1
//   seed = 7
//
//   [dataset]
//   source = synthetic
//   classes = 10
//
//   [zoo]
//   architectures = cnn-a, cnn-b, cnn-c, mlp-d
//
//   [campaign]
//   losses = ce, T=5, margin
//   targets = random
//
//   [attack]
//   epsilon = 16
//
// Lines starting with ';' or '#' are comments. Every recognised key is listed
// in kPlanKeys; anything else is rejected. docs/plan-format.md has the full
// reference.

namespace logitcal {

class ConfigError : public Error {
 public:
  using Error::Error;
};

inline constexpr int kPlanSchema = 1;

enum class TargetMode { random, rank };

struct TargetSpec {
  TargetMode mode = TargetMode::random;
  std::size_t rank = 0;

  static TargetSpec random() { return {}; }
  static TargetSpec ranked(std::size_t k) { return {TargetMode::rank, k}; }

  std::string label() const {
    return mode == TargetMode::random ? "random" : "rank-" + std::to_string(rank);
  }
  bool operator==(const TargetSpec&) const = default;
};

inline TargetSpec parse_target_spec(const std::string& text) {
  if (text == "random") return TargetSpec::random();
  if (text.rfind("rank-", 0) == 0) {
    std::size_t k = 0;
    const char* b = text.data() + 5;
    const char* e = text.data() + text.size();
    const auto res = std::from_chars(b, e, k);
    if (res.ec == std::errc() && res.ptr == e) return TargetSpec::ranked(k);
  }
  throw ConfigError("targets: expected 'random' or 'rank-<k>', got '" + text + "'");
}

struct ExperimentPlan {
  DatasetSpec dataset;
  std::vector<std::string> architectures{kZooArchitectures.begin(),
                                         kZooArchitectures.end()};
  std::string weights_dir;  // empty: <out-dir>/zoo
  std::uint64_t zoo_seed = 0;
  std::vector<std::string> surrogates;  // empty: every zoo model
  std::vector<std::string> victims;     // empty: every zoo model
  std::vector<LossSpec> losses{LossSpec::ce(), LossSpec::temperature_ce(5.0f),
                               LossSpec::margin(), LossSpec::angle(),
                               LossSpec::logit()};
  AttackConfig attack;
  std::size_t images = 100;
  TargetSpec targets;
  std::vector<std::size_t> ranks{2, 4, 6, 8, 10};
  std::vector<float> temperatures{0.5f, 1.0f, 2.0f, 5.0f, 10.0f, 20.0f, 50.0f, 100.0f};
  std::size_t repetitions = 5;
  std::uint64_t seed = 0;
  std::size_t workers = 0;  // 0: hardware concurrency

  std::vector<std::string> resolved_surrogates() const {
    return surrogates.empty() ? architectures : surrogates;
  }
  std::vector<std::string> resolved_victims() const {
    return victims.empty() ? architectures : victims;
  }

  void validate() const {
    if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
    if (architectures.empty()) throw ConfigError("zoo.architectures is empty");
    std::set<std::string> zoo(architectures.begin(), architectures.end());
    if (zoo.size() != architectures.size()) {
      throw ConfigError("zoo.architectures lists a model twice");
    }
    for (const auto& a : architectures) {
      if (std::find(kZooArchitectures.begin(), kZooArchitectures.end(), a) ==
          kZooArchitectures.end()) {
        throw ConfigError("unknown architecture '" + a + "'");
      }
    }
    for (const auto* list : {&surrogates, &victims}) {
      for (const auto& m : *list) {
        if (!zoo.count(m)) throw ConfigError("model '" + m + "' is not in the zoo");
      }
    }
    if (losses.empty()) throw ConfigError("campaign.losses is empty");
    try {
      for (const auto& l : losses) l.validate();
      attack.validate();
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    const std::size_t n = dataset.class_count;
    const auto check_rank = [n](std::size_t k) {
      if (k < 2 || k > n) {
        throw ConfigError("target rank " + std::to_string(k) + " outside [2, " +
                          std::to_string(n) + "]");
      }
    };
    if (targets.mode == TargetMode::rank) check_rank(targets.rank);
    for (std::size_t k : ranks) check_rank(k);
    for (float t : temperatures) {
      if (!(t > 0.0f)) throw ConfigError("temperatures must be positive");
    }
  }
};

namespace detail {

inline std::string format_float(float v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const std::string t = trim(text);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  }
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "on") return true;
  if (t == "false" || t == "0" || t == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

template <class T>
std::vector<T> parse_number_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  for (const auto& s : split_list(text)) out.push_back(parse_number<T>(key, s));
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ", ";
    if constexpr (std::is_floating_point_v<T>) {
      os << format_float(v[i]);
    } else {
      os << v[i];
    }
  }
  return os.str();
}

}  // namespace detail

inline const std::vector<std::string> kPlanKeys = {
    "schema", "seed", "repetitions", "images", "workers",
    "dataset.source", "dataset.classes", "dataset.height", "dataset.width",
    "dataset.train_per_class", "dataset.test_per_class", "dataset.seed",
    "dataset.noise_sigma", "dataset.train_images", "dataset.train_labels",
    "dataset.test_images", "dataset.test_labels",
    "zoo.architectures", "zoo.weights_dir", "zoo.seed",
    "campaign.surrogates", "campaign.victims", "campaign.losses",
    "campaign.targets", "campaign.ranks", "campaign.temperatures",
    "attack.epsilon", "attack.alpha", "attack.iterations", "attack.checkpoints",
    "attack.momentum", "attack.momentum_decay", "attack.ti", "attack.ti_kernel",
    "attack.ti_sigma", "attack.di", "attack.di_probability", "attack.di_min_scale",
};

/// Parses plan text. Relative dataset and weight paths are resolved against
/// `base_dir`.
inline ExperimentPlan parse_plan(const std::string& text,
                                 const std::string& origin = "<plan>",
                                 const std::filesystem::path& base_dir = {}) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ": line " + std::to_string(e.line()) + ": " +
                      e.message());
  }

  std::vector<std::pair<std::string, std::string>> entries;
  for (const auto& [k, v] : tree) {
    if (v.empty()) {
      entries.emplace_back(k, v.data());
    } else {
      for (const auto& [k2, v2] : v) {
        if (!v2.empty()) throw ConfigError(origin + ": nested section under " + k);
        entries.emplace_back(k + "." + k2, v2.data());
      }
    }
  }

  ExperimentPlan plan;
  bool have_schema = false;
  const auto path_of = [&](const std::string& p) {
    const std::filesystem::path fp(detail::trim(p));
    return (fp.is_relative() && !base_dir.empty() ? base_dir / fp : fp).string();
  };
  try {
    for (const auto& [key, raw] : entries) {
      const std::string val = detail::trim(raw);
      const std::string where = origin + ": " + key;
      using detail::parse_number;
      if (key == "schema") {
        const int s = parse_number<int>(where, val);
        if (s != kPlanSchema) {
          throw ConfigError(where + ": unsupported schema " + val + " (expected " +
                            std::to_string(kPlanSchema) + ")");
        }
        have_schema = true;
      } else if (key == "seed") {
        plan.seed = parse_number<std::uint64_t>(where, val);
      } else if (key == "repetitions") {
        plan.repetitions = parse_number<std::size_t>(where, val);
      } else if (key == "images") {
        plan.images = parse_number<std::size_t>(where, val);
      } else if (key == "workers") {
        plan.workers = parse_number<std::size_t>(where, val);
      } else if (key == "dataset.source") {
        if (val == "synthetic") {
          plan.dataset.source = DataSource::synthetic_shapes;
        } else if (val == "idx") {
          plan.dataset.source = DataSource::idx_files;
        } else {
          throw ConfigError(where + ": expected synthetic or idx");
        }
      } else if (key == "dataset.classes") {
        plan.dataset.class_count = parse_number<std::size_t>(where, val);
      } else if (key == "dataset.height") {
        plan.dataset.height = parse_number<std::size_t>(where, val);
      } else if (key == "dataset.width") {
        plan.dataset.width = parse_number<std::size_t>(where, val);
      } else if (key == "dataset.train_per_class") {
        plan.dataset.train_per_class = parse_number<std::size_t>(where, val);
      } else if (key == "dataset.test_per_class") {
        plan.dataset.test_per_class = parse_number<std::size_t>(where, val);
      } else if (key == "dataset.seed") {
        plan.dataset.seed = parse_number<std::uint64_t>(where, val);
      } else if (key == "dataset.noise_sigma") {
        plan.dataset.noise_sigma = parse_number<float>(where, val);
      } else if (key == "dataset.train_images") {
        plan.dataset.train_images = path_of(val);
      } else if (key == "dataset.train_labels") {
        plan.dataset.train_labels = path_of(val);
      } else if (key == "dataset.test_images") {
        plan.dataset.test_images = path_of(val);
      } else if (key == "dataset.test_labels") {
        plan.dataset.test_labels = path_of(val);
      } else if (key == "zoo.architectures") {
        plan.architectures = detail::split_list(val);
      } else if (key == "zoo.weights_dir") {
        plan.weights_dir = path_of(val);
      } else if (key == "zoo.seed") {
        plan.zoo_seed = parse_number<std::uint64_t>(where, val);
      } else if (key == "campaign.surrogates") {
        plan.surrogates = detail::split_list(val);
      } else if (key == "campaign.victims") {
        plan.victims = detail::split_list(val);
      } else if (key == "campaign.losses") {
        plan.losses.clear();
        for (const auto& s : detail::split_list(val)) plan.losses.push_back(parse_loss(s));
      } else if (key == "campaign.targets") {
        plan.targets = parse_target_spec(val);
      } else if (key == "campaign.ranks") {
        plan.ranks = detail::parse_number_list<std::size_t>(where, val);
      } else if (key == "campaign.temperatures") {
        plan.temperatures = detail::parse_number_list<float>(where, val);
      } else if (key == "attack.epsilon") {
        plan.attack.epsilon = parse_number<float>(where, val);
      } else if (key == "attack.alpha") {
        plan.attack.alpha = parse_number<float>(where, val);
      } else if (key == "attack.iterations") {
        plan.attack.max_iters = parse_number<std::size_t>(where, val);
      } else if (key == "attack.checkpoints") {
        plan.attack.checkpoints = detail::parse_number_list<std::size_t>(where, val);
      } else if (key == "attack.momentum") {
        plan.attack.mi.enabled = detail::parse_bool(where, val);
      } else if (key == "attack.momentum_decay") {
        plan.attack.mi.decay = parse_number<float>(where, val);
      } else if (key == "attack.ti") {
        plan.attack.ti.enabled = detail::parse_bool(where, val);
      } else if (key == "attack.ti_kernel") {
        plan.attack.ti.kernel_side = parse_number<std::size_t>(where, val);
      } else if (key == "attack.ti_sigma") {
        plan.attack.ti.sigma = parse_number<float>(where, val);
      } else if (key == "attack.di") {
        plan.attack.di.enabled = detail::parse_bool(where, val);
      } else if (key == "attack.di_probability") {
        plan.attack.di.probability = parse_number<float>(where, val);
      } else if (key == "attack.di_min_scale") {
        plan.attack.di.min_scale = parse_number<float>(where, val);
      } else {
        throw ConfigError(origin + ": unknown key '" + key + "'");
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  if (!have_schema) {
    throw ConfigError(origin + ": missing 'schema = " + std::to_string(kPlanSchema) + "'");
  }
  plan.validate();
  return plan;
}

inline ExperimentPlan load_plan(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open plan file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_plan(ss.str(), path, std::filesystem::path(path).parent_path());
}

/// Canonical text of every setting that can change results. Parsing it back
/// yields an equivalent plan; its hash identifies a configuration.
inline std::string canonical_plan(const ExperimentPlan& p) {
  std::ostringstream os;
  const auto b = [](bool v) { return v ? "true" : "false"; };
  const auto f = detail::format_float;
  std::vector<std::string> loss_labels;
  for (const auto& l : p.losses) loss_labels.push_back(l.label());
  os << "schema = " << kPlanSchema << '\n'
     << "seed = " << p.seed << '\n'
     << "repetitions = " << p.repetitions << '\n'
     << "images = " << p.images << "\n\n"
     << "[dataset]\n"
     << "source = " << (p.dataset.source == DataSource::idx_files ? "idx" : "synthetic")
     << '\n'
     << "classes = " << p.dataset.class_count << '\n'
     << "height = " << p.dataset.height << '\n'
     << "width = " << p.dataset.width << '\n'
     << "train_per_class = " << p.dataset.train_per_class << '\n'
     << "test_per_class = " << p.dataset.test_per_class << '\n'
     << "seed = " << p.dataset.seed << '\n'
     << "noise_sigma = " << f(p.dataset.noise_sigma) << '\n';
  if (p.dataset.source == DataSource::idx_files) {
    os << "train_images = " << p.dataset.train_images << '\n'
       << "train_labels = " << p.dataset.train_labels << '\n'
       << "test_images = " << p.dataset.test_images << '\n'
       << "test_labels = " << p.dataset.test_labels << '\n';
  }
  os << "\n[zoo]\n"
     << "architectures = " << detail::join(p.architectures) << '\n'
     << "seed = " << p.zoo_seed << "\n\n"
     << "[campaign]\n"
     << "surrogates = " << detail::join(p.resolved_surrogates()) << '\n'
     << "victims = " << detail::join(p.resolved_victims()) << '\n'
     << "losses = " << detail::join(loss_labels) << '\n'
     << "targets = " << p.targets.label() << '\n'
     << "ranks = " << detail::join(p.ranks) << '\n'
     << "temperatures = " << detail::join(p.temperatures) << "\n\n"
     << "[attack]\n"
     << "epsilon = " << f(p.attack.epsilon) << '\n'
     << "alpha = " << f(p.attack.alpha) << '\n'
     << "iterations = " << p.attack.max_iters << '\n'
     << "checkpoints = " << detail::join(p.attack.checkpoints) << '\n'
     << "momentum = " << b(p.attack.mi.enabled) << '\n'
     << "momentum_decay = " << f(p.attack.mi.decay) << '\n'
     << "ti = " << b(p.attack.ti.enabled) << '\n'
     << "ti_kernel = " << p.attack.ti.kernel_side << '\n'
     << "ti_sigma = " << f(p.attack.ti.sigma) << '\n'
     << "di = " << b(p.attack.di.enabled) << '\n'
     << "di_probability = " << f(p.attack.di.probability) << '\n'
     << "di_min_scale = " << f(p.attack.di.min_scale) << '\n';
  return os.str();
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const ExperimentPlan& p) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(canonical_plan(p))));
  return buf;
}

}  // namespace logitcal
