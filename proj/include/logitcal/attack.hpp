#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "logitcal/diagnostics.hpp"
#include "logitcal/losses.hpp"
#include "logitcal/network.hpp"

namespace logitcal {

class AttackError : public Error {
 public:
  using Error::Error;
};

struct MomentumConfig {
  bool enabled = true;
  float decay = 1.0f;
};

struct SmoothingConfig {
  bool enabled = true;
  std::size_t kernel_side = 5;
  float sigma = 1.5f;
};

struct DiverseInputConfig {
  bool enabled = true;
  float probability = 0.7f;
  float min_scale = 0.875f;
};

/// Pixel-scale budgets: epsilon and alpha are in [0, 255] units.
struct AttackConfig {
  float epsilon = 16.0f;
  float alpha = 2.0f;
  std::size_t max_iters = 300;
  std::vector<std::size_t> checkpoints = {20, 100, 300};
  MomentumConfig mi;
  SmoothingConfig ti;
  DiverseInputConfig di;
  std::uint64_t seed = 0;
  bool verify_constraints = true;

  static AttackConfig plain_ifgsm() {
    AttackConfig c;
    c.mi.enabled = false;
    c.ti.enabled = false;
    c.di.enabled = false;
    return c;
  }

  void validate() const {
    if (!(epsilon >= 0.0f) || !std::isfinite(epsilon)) {
      throw AttackError("epsilon must be finite and >= 0");
    }
    // epsilon == 0 is allowed (the ball collapses to the clean image).
    if (!(alpha > 0.0f) || (epsilon > 0.0f && alpha > epsilon)) {
      throw AttackError("alpha must satisfy 0 < alpha <= epsilon");
    }
    if (max_iters == 0) throw AttackError("max_iters must be positive");
    for (std::size_t c : checkpoints) {
      if (c < 1 || c > max_iters) {
        throw AttackError("checkpoint " + std::to_string(c) +
                          " outside [1, max_iters]");
      }
    }
    if (ti.kernel_side % 2 == 0) throw AttackError("TI kernel side must be odd");
    if (!(ti.sigma > 0.0f)) throw AttackError("TI sigma must be positive");
    if (!(di.probability >= 0.0f && di.probability <= 1.0f)) {
      throw AttackError("DI probability must lie in [0, 1]");
    }
    if (!(di.min_scale > 0.0f && di.min_scale <= 1.0f)) {
      throw AttackError("DI min scale must lie in (0, 1]");
    }
  }
};

struct AttackState {
  Tensor x_orig;
  Tensor x_adv;
  Tensor momentum;
  std::size_t iteration = 0;
  std::mt19937_64 rng;

  AttackState(Tensor x, std::uint64_t seed)
      : x_orig(x), x_adv(std::move(x)), momentum(x_orig.shape()), rng(seed) {}
};

inline float sign(float v) { return static_cast<float>((v > 0.0f) - (v < 0.0f)); }

/// One signed descent step followed by projection onto the epsilon ball
/// around x_orig and the [0, 255] pixel range.
inline void ifgsm_step(AttackState& state, const Tensor& grad, float alpha,
                       float epsilon) {
  state.x_adv.require_same_shape(grad, "ifgsm_step");
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const float o = state.x_orig[i];
    float v = state.x_adv[i] - alpha * sign(grad[i]);
    v = std::clamp(v, o - epsilon, o + epsilon);
    state.x_adv[i] = std::clamp(v, 0.0f, 255.0f);
  }
  ++state.iteration;
}

/// momentum * decay + grad / ||grad||_1 (the normalised term is zero when
/// the gradient is zero).
inline Tensor mi_accumulate(const Tensor& momentum, const Tensor& grad,
                            float decay) {
  momentum.require_same_shape(grad, "mi_accumulate");
  Tensor out = momentum * decay;
  const float n = l1_norm(grad.span());
  if (n > 0.0f) {
    for (std::size_t i = 0; i < grad.size(); ++i) out[i] += grad[i] / n;
  }
  return out;
}

/// Normalised (sum 1) side x side Gaussian kernel.
inline Tensor gaussian_kernel(std::size_t side, float sigma) {
  if (side % 2 == 0) throw AttackError("Gaussian kernel side must be odd");
  const long r = static_cast<long>(side / 2);
  Tensor k({side, side});
  double total = 0.0;
  for (long i = -r; i <= r; ++i) {
    for (long j = -r; j <= r; ++j) {
      const double v = std::exp(-static_cast<double>(i * i + j * j) /
                                (2.0 * sigma * static_cast<double>(sigma)));
      k.at(static_cast<std::size_t>(i + r), static_cast<std::size_t>(j + r)) =
          static_cast<float>(v);
      total += v;
    }
  }
  for (float& v : k.span()) v = static_cast<float>(v / total);
  return k;
}

inline Tensor ti_smooth(const Tensor& grad, const Tensor& kernel) {
  return depthwise_convolve(grad, kernel);
}

/// Random nearest-neighbour downscale to r x r (r uniform in
/// [ceil(min_scale * H), H]) and zero padding at a random offset, applied
/// with the configured probability. Output shape always equals input shape.
inline Tensor di_transform(const Tensor& x, std::mt19937_64& rng,
                           const DiverseInputConfig& cfg) {
  if (x.rank() != 3) throw ShapeError("di_transform expects CxHxW");
  std::uniform_real_distribution<float> coin(0.0f, 1.0f);
  if (!(coin(rng) < cfg.probability)) return x;
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const auto lo = static_cast<std::size_t>(
      std::ceil(cfg.min_scale * static_cast<float>(H) - 1e-4f));
  std::uniform_int_distribution<std::size_t> size_dist(std::max<std::size_t>(lo, 1), H);
  const std::size_t rh = size_dist(rng);
  const std::size_t rw = std::max<std::size_t>(1, rh * W / H);
  std::uniform_int_distribution<std::size_t> top_dist(0, H - rh);
  std::uniform_int_distribution<std::size_t> left_dist(0, W - rw);
  const std::size_t top = top_dist(rng), left = left_dist(rng);
  Tensor out(x.shape());
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < rh; ++y) {
      const std::size_t sy = y * H / rh;
      for (std::size_t xx = 0; xx < rw; ++xx) {
        const std::size_t sx = xx * W / rw;
        out.at(c, top + y, left + xx) = x.at(c, sy, sx);
      }
    }
  }
  return out;
}

// --------------------------------------------------------------------------
// Ensembles

struct Ensemble {
  std::vector<const ClassifierModel*> models;
  std::vector<float> weights;

  static Ensemble uniform(std::vector<const ClassifierModel*> models) {
    Ensemble e{std::move(models), {}};
    e.weights.assign(e.models.size(), 1.0f / static_cast<float>(e.models.size()));
    return e;
  }

  static Ensemble single(const ClassifierModel& m) { return {{&m}, {1.0f}}; }

  std::size_t class_count() const { return models.front()->class_count(); }

  void validate() const {
    if (models.empty()) throw AttackError("ensemble has no models");
    if (weights.size() != models.size()) {
      throw AttackError("ensemble weight count does not match model count");
    }
    double total = 0.0;
    for (float w : weights) total += w;
    if (std::fabs(total - 1.0) > 1e-5) {
      throw AttackError("ensemble weights must sum to 1, got " + std::to_string(total));
    }
    for (const auto* m : models) {
      if (m->class_count() != models.front()->class_count()) {
        throw AttackError("ensemble class-count mismatch: " + m->arch_id() + " has " +
                          std::to_string(m->class_count()) + " classes, " +
                          models.front()->arch_id() + " has " +
                          std::to_string(models.front()->class_count()));
      }
    }
  }
};

struct EnsembleForward {
  Tensor logits;  // weighted sum of member logits
  std::vector<Tape> tapes;
};

inline EnsembleForward ensemble_forward(const Ensemble& ens, const Tensor& x) {
  ens.validate();
  EnsembleForward out{Tensor({ens.class_count()}), {}};
  out.tapes.reserve(ens.models.size());
  for (std::size_t k = 0; k < ens.models.size(); ++k) {
    out.tapes.push_back(record_forward(*ens.models[k], x));
    const Tensor& z = out.tapes.back().logits();
    for (std::size_t i = 0; i < z.size(); ++i) out.logits[i] += ens.weights[k] * z[i];
  }
  return out;
}

namespace detail {

/// Loss terms of a spec flattened to (member, weight).
inline std::vector<std::pair<LossSpec, float>> loss_terms(const LossSpec& spec) {
  if (spec.kind == LossKind::combo) return spec.combo;
  return {{spec, 1.0f}};
}

}  // namespace detail

struct EnsembleLoss {
  float value = 0.0f;
  Tensor input_grad;
};

/// Loss and input gradient for an ensemble pass. Logit-based terms act on the
/// fused logits; angle terms act on each member's feature and are averaged
/// with the ensemble weights. `scale_source` feeds the margin calibration.
inline EnsembleLoss ensemble_loss_gradient(const Ensemble& ens,
                                           const EnsembleForward& fwd,
                                           const LossSpec& spec, std::size_t target,
                                           std::span<const float> scale_source) {
  const auto terms = detail::loss_terms(spec);
  std::optional<Tensor> d_fused;
  EnsembleLoss out;
  std::vector<std::optional<Tensor>> d_feature(ens.models.size());
  for (const auto& [term, w] : terms) {
    if (term.kind == LossKind::angle) {
      for (std::size_t k = 0; k < ens.models.size(); ++k) {
        const Tensor& W = ens.models[k]->final_weights();
        const std::size_t D = W.dim(1);
        const LossResult r = angle_loss(
            fwd.tapes[k].feature().span(),
            std::span<const float>(W.data() + target * D, D));
        const float wk = w * ens.weights[k];
        out.value += wk * r.value;
        detail::add_slot(d_feature[k], r.d_feature, wk);
      }
    } else {
      const LossResult r =
          evaluate_logit_term(term, fwd.logits.span(), target, scale_source);
      out.value += w * r.value;
      detail::add_slot(d_fused, r.d_logits, w);
    }
  }
  out.input_grad = Tensor(fwd.tapes.front().input().shape());
  for (std::size_t k = 0; k < ens.models.size(); ++k) {
    std::optional<Tensor> d_logits;
    if (d_fused) d_logits = *d_fused * ens.weights[k];
    if (!d_logits && !d_feature[k]) continue;
    out.input_grad += backward_to_input(
        fwd.tapes[k], d_logits ? d_logits->span() : std::span<const float>{},
        d_feature[k] ? d_feature[k]->span() : std::span<const float>{});
  }
  return out;
}

struct Snapshot {
  std::size_t iteration;
  Tensor x_adv;
};

struct AttackResult {
  Tensor x_adv;
  std::vector<Snapshot> snapshots;
  TrajectoryRecord trajectory;
  Tensor final_logits;  // fused, untransformed
  bool white_box_success = false;
};

/// Checks the epsilon-ball and pixel-range invariants.
inline void verify_constraints(const AttackState& s, float epsilon) {
  for (std::size_t i = 0; i < s.x_adv.size(); ++i) {
    const float v = s.x_adv[i];
    if (!(v >= 0.0f && v <= 255.0f) || std::fabs(v - s.x_orig[i]) > epsilon) {
      throw AttackError("constraint violated at iteration " +
                        std::to_string(s.iteration) + ", pixel " + std::to_string(i));
    }
  }
}

/// Targeted iterative attack: per iteration DI -> ensemble forward -> loss ->
/// input gradient -> TI -> MI -> signed step with projection. The margin
/// calibration scale and the trajectory use logits of the untransformed
/// adversarial image.
inline AttackResult run_targeted_attack(const Ensemble& ens, const Tensor& x,
                                        std::size_t target, const LossSpec& loss,
                                        const AttackConfig& cfg,
                                        bool record_trajectory = false) {
  cfg.validate();
  loss.validate();
  ens.validate();
  if (target >= ens.class_count()) {
    throw AttackError("target " + std::to_string(target) + " out of range");
  }
  AttackState state(x, cfg.seed);
  const Tensor kernel =
      cfg.ti.enabled ? gaussian_kernel(cfg.ti.kernel_side, cfg.ti.sigma) : Tensor();
  std::vector<std::size_t> checkpoints = cfg.checkpoints;
  std::sort(checkpoints.begin(), checkpoints.end());

  AttackResult result;
  bool needs_scale = false;
  for (const auto& [term, w] : detail::loss_terms(loss)) {
    needs_scale = needs_scale || term.kind == LossKind::ce_margin;
  }
  // The untransformed forward is only recomputed when something consumes it.
  std::optional<EnsembleForward> clean = ensemble_forward(ens, state.x_adv);
  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    std::optional<EnsembleForward> transformed;
    if (cfg.di.enabled) {
      Tensor xt = di_transform(state.x_adv, state.rng, cfg.di);
      if (!(xt == state.x_adv)) transformed = ensemble_forward(ens, xt);
    }
    if (!clean && (!transformed || needs_scale)) {
      clean = ensemble_forward(ens, state.x_adv);
    }
    const EnsembleForward& active = transformed ? *transformed : *clean;
    EnsembleLoss L = ensemble_loss_gradient(
        ens, active, loss, target,
        needs_scale ? clean->logits.span() : std::span<const float>{});
    if (!L.input_grad.all_finite() || !std::isfinite(L.value)) {
      throw NonFiniteError("non-finite loss or gradient at iteration " +
                           std::to_string(it) + " (loss " + loss.label() + ")");
    }
    Tensor direction = cfg.ti.enabled ? ti_smooth(L.input_grad, kernel)
                                      : std::move(L.input_grad);
    if (cfg.mi.enabled) {
      state.momentum = mi_accumulate(state.momentum, direction, cfg.mi.decay);
      ifgsm_step(state, state.momentum, cfg.alpha, cfg.epsilon);
    } else {
      ifgsm_step(state, direction, cfg.alpha, cfg.epsilon);
    }
    if (cfg.verify_constraints) verify_constraints(state, cfg.epsilon);

    clean.reset();
    if (record_trajectory) {
      clean = ensemble_forward(ens, state.x_adv);
      record_iteration(result.trajectory, clean->logits.span(), target, it);
    }
    if (std::binary_search(checkpoints.begin(), checkpoints.end(), it)) {
      result.snapshots.push_back({it, state.x_adv});
    }
  }
  if (!clean) clean = ensemble_forward(ens, state.x_adv);
  result.final_logits = clean->logits;
  result.white_box_success = argmax(clean->logits.span()) == target;
  result.x_adv = std::move(state.x_adv);
  return result;
}

}  // namespace logitcal
