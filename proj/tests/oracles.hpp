#pragma once

// Double-precision loss formulas written directly from their definitions,
// used as finite-difference oracles for the float implementations.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <random>
#include <string>
#include <vector>

#include "logitcal/logitcal.hpp"

namespace oracle {

inline double logsumexp(const std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

inline double ce(const std::vector<double>& z, std::size_t t) { return logsumexp(z) - z[t]; }

inline double logit(const std::vector<double>& z, std::size_t t) { return -z[t]; }

inline double temperature_ce(const std::vector<double>& z, std::size_t t, double T) {
  std::vector<double> s(z);
  for (double& v : s) v /= T;
  return ce(s, t);
}

inline double top_gap(const std::vector<double>& z) {
  std::vector<double> s(z);
  std::sort(s.begin(), s.end(), std::greater<>());
  return std::max(s[0] - s[1], 1e-6);
}

inline double angle(const std::vector<double>& f, const std::vector<double>& w) {
  double d = 0, nf = 0, nw = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    d += f[i] * w[i];
    nf += f[i] * f[i];
    nw += w[i] * w[i];
  }
  return -d / std::sqrt(nf * nw);
}

inline std::vector<double> as_f64(const std::optional<logitcal::Tensor>& t) {
  if (!t) throw std::logic_error("expected gradient slot is absent");
  return std::vector<double>(t->values().begin(), t->values().end());
}

struct GradCheck {
  double worst = 0.0;
  std::size_t instances = 0;
};

/// Runs `instances` random gradient checks for one loss kind and returns the
/// worst relative error max|analytic - fd| / max|fd|.
inline GradCheck check_loss_gradients(const std::string& kind, std::size_t instances,
                                      std::uint64_t seed) {
  using namespace logitcal;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> nd(2, 12);
  std::uniform_real_distribution<double> zd(-6.0, 6.0);
  GradCheck out;
  for (std::size_t k = 0; k < instances; ++k) {
    const std::size_t n = nd(rng);
    std::vector<float> z(n);
    for (float& v : z) v = static_cast<float>(zd(rng));
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    std::vector<double> z64(z.begin(), z.end());
    std::vector<double> analytic;
    std::function<double(const std::vector<double>&)> f;
    if (kind == "ce") {
      analytic = as_f64(ce_loss(z, t).d_logits);
      f = [&](const std::vector<double>& p) { return ce(p, t); };
    } else if (kind == "logit") {
      analytic = as_f64(logit_loss(z, t).d_logits);
      f = [&](const std::vector<double>& p) { return logit(p, t); };
    } else if (kind == "temperature") {
      const double T = std::uniform_real_distribution<double>(0.5, 20.0)(rng);
      analytic = as_f64(logitcal::temperature_ce(z, t, static_cast<float>(T)).d_logits);
      const double Tf = static_cast<float>(T);
      f = [&, Tf](const std::vector<double>& p) { return temperature_ce(p, t, Tf); };
    } else if (kind == "margin") {
      analytic = as_f64(margin_calibrated_ce(z, t).d_logits);
      const double s = static_cast<double>(margin_scale(z));  // detached
      f = [&, s](const std::vector<double>& p) { return temperature_ce(p, t, s); };
    } else if (kind == "angle") {
      const std::size_t d = n + 3;
      std::vector<float> feat(d), w(d);
      for (float& v : feat) v = static_cast<float>(zd(rng));
      for (float& v : w) v = static_cast<float>(zd(rng));
      analytic = as_f64(angle_loss(feat, w).d_feature);
      const std::vector<double> w64(w.begin(), w.end());
      z64.assign(feat.begin(), feat.end());
      f = [w64](const std::vector<double>& p) { return angle(p, w64); };
    } else {
      throw std::invalid_argument("unknown loss kind " + kind);
    }
    const auto fd = finite_difference_gradient(f, z64, 1e-4);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < fd.size(); ++i) {
      num = std::max(num, std::fabs(analytic[i] - fd[i]));
      den = std::max(den, std::fabs(fd[i]));
    }
    out.worst = std::max(out.worst, num / std::max(den, 1e-12));
    ++out.instances;
  }
  return out;
}

}  // namespace oracle
