#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "logitcal/tensor.hpp"

namespace logitcal {

class LossError : public Error {
 public:
  using Error::Error;
};

/// Scalar loss plus its gradient w.r.t. logits and/or penultimate feature.
struct LossResult {
  float value = 0.0f;
  std::optional<Tensor> d_logits;
  std::optional<Tensor> d_feature;
};

namespace detail {

inline void check_target(std::size_t n, std::size_t target) {
  if (target >= n) {
    throw LossError("target class " + std::to_string(target) +
                    " out of range for " + std::to_string(n) + " classes");
  }
}

}  // namespace detail

/// Stable softmax (max-subtracted).
inline std::vector<float> softmax(std::span<const float> z) {
  const float m = *std::max_element(z.begin(), z.end());
  std::vector<float> p(z.size());
  float sum = 0.0f;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - m);
    sum += p[i];
  }
  for (float& v : p) v /= sum;
  return p;
}

/// Cross-entropy on raw logits: -z_t + log sum_j exp(z_j), with
/// gradient softmax(z) - one_hot(t).
inline LossResult ce_loss(std::span<const float> logits, std::size_t target) {
  detail::check_target(logits.size(), target);
  const float m = *std::max_element(logits.begin(), logits.end());
  std::vector<float> e(logits.size());
  float sum = 0.0f;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    e[i] = std::exp(logits[i] - m);
    sum += e[i];
  }
  LossResult r;
  r.value = (m + std::log(sum)) - logits[target];
  Tensor g({logits.size()});
  for (std::size_t i = 0; i < logits.size(); ++i) g[i] = e[i] / sum;
  g[target] -= 1.0f;
  r.d_logits = std::move(g);
  return r;
}

inline LossResult ce_loss(const Tensor& logits, std::size_t target) {
  return ce_loss(logits.span(), target);
}

/// Logit loss -z_t.
inline LossResult logit_loss(std::span<const float> logits,
                             std::size_t target) {
  detail::check_target(logits.size(), target);
  LossResult r;
  r.value = -logits[target];
  Tensor g({logits.size()});
  g[target] = -1.0f;
  r.d_logits = std::move(g);
  return r;
}

inline LossResult logit_loss(const Tensor& logits, std::size_t target) {
  return logit_loss(logits.span(), target);
}

/// Cross-entropy on logits divided by a temperature. The value equals
/// ce_loss(z / T) bit-for-bit; the gradient is taken w.r.t. the original
/// logits, (softmax(z / T) - one_hot(t)) / T.
inline LossResult temperature_ce(std::span<const float> logits,
                                 std::size_t target, float temperature) {
  if (!(temperature > 0.0f) || !std::isfinite(temperature)) {
    throw LossError("temperature must be positive and finite, got " +
                    std::to_string(temperature));
  }
  std::vector<float> scaled(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    scaled[i] = logits[i] / temperature;
  }
  LossResult r = ce_loss(scaled, target);
  for (float& g : r.d_logits->span()) g /= temperature;
  return r;
}

inline LossResult temperature_ce(const Tensor& logits, std::size_t target,
                                 float temperature) {
  return temperature_ce(logits.span(), target, temperature);
}

/// Floor applied to the Top-1/Top-2 gap so tied logits stay finite.
inline constexpr float kMarginFloor = 1e-6f;

/// Top-1 minus Top-2 logit, floored at kMarginFloor.
inline float margin_scale(std::span<const float> logits) {
  if (logits.size() < 2) throw LossError("margin scale needs N >= 2");
  float top1 = -INFINITY, top2 = -INFINITY;
  for (float v : logits) {
    if (v > top1) {
      top2 = top1;
      top1 = v;
    } else if (v > top2) {
      top2 = v;
    }
  }
  return std::max(top1 - top2, kMarginFloor);
}

/// Cross-entropy with the logits divided by the current Top-1/Top-2 gap.
/// The gap is a per-call constant and is not differentiated. When
/// `scale_source` is given the gap is measured on those logits instead.
/// The logits are shifted by their maximum before dividing, so a small gap
/// does not blow both terms up before they cancel.
inline LossResult margin_calibrated_ce(
    std::span<const float> logits, std::size_t target,
    std::span<const float> scale_source = {}) {
  const float s =
      margin_scale(scale_source.empty() ? logits : scale_source);
  const float m = *std::max_element(logits.begin(), logits.end());
  std::vector<float> shifted(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) shifted[i] = logits[i] - m;
  return temperature_ce(shifted, target, s);
}

inline LossResult margin_calibrated_ce(const Tensor& logits,
                                       std::size_t target) {
  return margin_calibrated_ce(logits.span(), target);
}

/// Negative cosine between the penultimate feature and the target class
/// weight row (bias omitted). Gradient only w.r.t. the feature.
inline LossResult angle_loss(std::span<const float> feature,
                             std::span<const float> target_weights) {
  if (feature.size() != target_weights.size()) {
    throw ShapeError("angle_loss: feature length " +
                     std::to_string(feature.size()) +
                     " != weight length " +
                     std::to_string(target_weights.size()));
  }
  const float nf = l2_norm(feature);
  const float nw = l2_norm(target_weights);
  if (!(nf > 0.0f) || !(nw > 0.0f)) {
    throw LossError("angle_loss: zero-norm " +
                    std::string(nf > 0.0f ? "weight" : "feature") + " vector");
  }
  const float cos = dot(feature, target_weights) / (nf * nw);
  LossResult r;
  r.value = -cos;
  Tensor g({feature.size()});
  const float inv_fw = 1.0f / (nf * nw);
  const float cos_ff = cos / (nf * nf);
  for (std::size_t i = 0; i < feature.size(); ++i) {
    g[i] = -(target_weights[i] * inv_fw - cos_ff * feature[i]);
  }
  r.d_feature = std::move(g);
  return r;
}

inline LossResult angle_loss(const Tensor& feature, const Tensor& target_weights) {
  return angle_loss(feature.span(), target_weights.span());
}

namespace detail {

inline void add_slot(std::optional<Tensor>& acc, const std::optional<Tensor>& g,
                     float w) {
  if (!g) return;
  if (!acc) {
    acc = Tensor(g->shape());
  }
  acc->require_same_shape(*g, "combine");
  for (std::size_t i = 0; i < g->size(); ++i) (*acc)[i] += w * (*g)[i];
}

}  // namespace detail

/// Weighted sum of loss values; gradients summed slot-wise, absent slots
/// count as zero.
inline LossResult combine(
    const std::vector<std::pair<LossResult, float>>& parts) {
  if (parts.empty()) throw LossError("combine: no loss terms");
  LossResult out;
  for (const auto& [r, w] : parts) {
    out.value += w * r.value;
    detail::add_slot(out.d_logits, r.d_logits, w);
    detail::add_slot(out.d_feature, r.d_feature, w);
  }
  return out;
}

/// Closed-form CE gradient w.r.t. the feature through a dense final layer:
/// sum_i -p_i (W_t - W_i), where W is N x D.
inline Tensor ce_feature_gradient_closed_form(std::span<const float> p,
                                              const Tensor& W,
                                              std::size_t target) {
  if (W.rank() != 2 || W.dim(0) != p.size()) {
    throw ShapeError("closed form: W must be N x D with N == len(p)");
  }
  detail::check_target(p.size(), target);
  double total = 0.0;
  for (float v : p) total += v;
  if (std::fabs(total - 1.0) > 1e-5) {
    throw LossError("closed form: probabilities sum to " +
                    std::to_string(total) + ", expected 1");
  }
  const std::size_t D = W.dim(1);
  Tensor g({D});
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t d = 0; d < D; ++d) {
      g[d] += -p[i] * (W.at(target, d) - W.at(i, d));
    }
  }
  return g;
}

struct TwoClassProb {
  double p_target;
  double p_non_target;
};

/// Softmax over two classes as a function of z_t - z_nt.
inline TwoClassProb two_class_prob(double margin) {
  return {1.0 / (1.0 + std::exp(-margin)), 1.0 / (1.0 + std::exp(margin))};
}

/// Uniform-probability limit of the temperature-CE feature gradient,
/// -(W_t - mean_i W_i) / T.
inline Tensor large_T_limit_direction(const Tensor& W, std::size_t target,
                                      double temperature) {
  if (!(temperature > 0.0)) throw LossError("temperature must be positive");
  if (W.rank() != 2) throw ShapeError("W must be N x D");
  detail::check_target(W.dim(0), target);
  const std::size_t N = W.dim(0), D = W.dim(1);
  Tensor g({D});
  for (std::size_t d = 0; d < D; ++d) {
    double mean = 0.0;
    for (std::size_t i = 0; i < N; ++i) mean += W.at(i, d);
    mean /= static_cast<double>(N);
    g[d] = static_cast<float>(-(W.at(target, d) - mean) / temperature);
  }
  return g;
}

// --------------------------------------------------------------------------
// Declarative loss description used by the attack engine and CLI.

enum class LossKind { ce, logit, ce_temperature, ce_margin, angle, combo };

struct LossSpec {
  LossKind kind = LossKind::ce;
  float temperature = 1.0f;
  std::vector<std::pair<LossSpec, float>> combo;

  static LossSpec of(LossKind k) {
    LossSpec s;
    s.kind = k;
    return s;
  }
  static LossSpec ce() { return of(LossKind::ce); }
  static LossSpec logit() { return of(LossKind::logit); }
  static LossSpec temperature_ce(float t) {
    LossSpec s = of(LossKind::ce_temperature);
    s.temperature = t;
    return s;
  }
  static LossSpec margin() { return of(LossKind::ce_margin); }
  static LossSpec angle() { return of(LossKind::angle); }
  static LossSpec sum(std::vector<LossSpec> parts) {
    LossSpec s = of(LossKind::combo);
    for (auto& p : parts) s.combo.emplace_back(std::move(p), 1.0f);
    return s;
  }

  void validate() const {
    if (kind == LossKind::ce_temperature &&
        (!(temperature > 0.0f) || !std::isfinite(temperature))) {
      throw LossError("temperature must be positive");
    }
    if (kind == LossKind::combo) {
      if (combo.empty()) throw LossError("combo loss has no members");
      for (const auto& [member, w] : combo) {
        if (member.kind == LossKind::combo) {
          throw LossError("combo members must not be combos");
        }
        if (!std::isfinite(w)) throw LossError("combo weight must be finite");
        member.validate();
      }
    }
  }

  bool uses_feature() const {
    if (kind == LossKind::angle) return true;
    if (kind == LossKind::combo) {
      for (const auto& [m, w] : combo) {
        if (m.uses_feature()) return true;
      }
    }
    return false;
  }

  /// Short label: ce, logit, T=5, margin, angle, T=5+angle.
  std::string label() const;
};

namespace detail {

inline std::string format_temperature(float t) {
  std::string s = std::to_string(t);
  s.erase(s.find_last_not_of('0') + 1);
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

}  // namespace detail

inline std::string LossSpec::label() const {
  switch (kind) {
    case LossKind::ce: return "ce";
    case LossKind::logit: return "logit";
    case LossKind::ce_temperature:
      return "T=" + detail::format_temperature(temperature);
    case LossKind::ce_margin: return "margin";
    case LossKind::angle: return "angle";
    case LossKind::combo: {
      std::string s;
      for (const auto& [m, w] : combo) {
        if (!s.empty()) s += '+';
        if (w != 1.0f) s += detail::format_temperature(w) + '*';
        s += m.label();
      }
      return s;
    }
  }
  return "?";
}

/// Parses a label produced by LossSpec::label (weights of 1 only).
inline LossSpec parse_loss(const std::string& text) {
  if (text.find('+') != std::string::npos) {
    std::vector<LossSpec> parts;
    std::size_t start = 0;
    while (start <= text.size()) {
      const std::size_t end = text.find('+', start);
      parts.push_back(parse_loss(text.substr(
          start, end == std::string::npos ? std::string::npos : end - start)));
      if (end == std::string::npos) break;
      start = end + 1;
    }
    LossSpec s = LossSpec::sum(std::move(parts));
    s.validate();
    return s;
  }
  if (text == "ce") return LossSpec::ce();
  if (text == "logit") return LossSpec::logit();
  if (text == "margin") return LossSpec::margin();
  if (text == "angle") return LossSpec::angle();
  if (text.rfind("T=", 0) == 0) {
    std::size_t used = 0;
    float t = 0.0f;
    try {
      t = std::stof(text.substr(2), &used);
    } catch (const std::exception&) {
      throw LossError("bad temperature in loss '" + text + "'");
    }
    if (used != text.size() - 2) {
      throw LossError("bad temperature in loss '" + text + "'");
    }
    LossSpec s = LossSpec::temperature_ce(t);
    s.validate();
    return s;
  }
  throw LossError("unknown loss '" + text + "'");
}

/// Evaluates a non-angle term on logits. `scale_source` only affects the
/// margin-calibrated term.
inline LossResult evaluate_logit_term(const LossSpec& spec,
                                      std::span<const float> logits,
                                      std::size_t target,
                                      std::span<const float> scale_source = {}) {
  switch (spec.kind) {
    case LossKind::ce: return ce_loss(logits, target);
    case LossKind::logit: return logit_loss(logits, target);
    case LossKind::ce_temperature:
      return temperature_ce(logits, target, spec.temperature);
    case LossKind::ce_margin:
      return margin_calibrated_ce(logits, target, scale_source);
    default:
      throw LossError("evaluate_logit_term: '" + spec.label() +
                      "' is not a logit loss");
  }
}

/// Full evaluation of a spec for a single model: logits, penultimate feature
/// and final class weights W (N x D) are all available.
inline LossResult evaluate(const LossSpec& spec, std::span<const float> logits,
                           std::span<const float> feature, const Tensor& W,
                           std::size_t target) {
  if (spec.kind == LossKind::angle) {
    detail::check_target(W.dim(0), target);
    const std::size_t D = W.dim(1);
    return angle_loss(feature,
                      std::span<const float>(W.data() + target * D, D));
  }
  if (spec.kind == LossKind::combo) {
    std::vector<std::pair<LossResult, float>> parts;
    for (const auto& [m, w] : spec.combo) {
      parts.emplace_back(evaluate(m, logits, feature, W, target), w);
    }
    return combine(parts);
  }
  return evaluate_logit_term(spec, logits, target);
}

}  // namespace logitcal
