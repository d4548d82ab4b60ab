#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gclr/encoders.hpp"
#include "gclr/errors.hpp"
#include "gclr/numerics.hpp"

namespace gclr {

enum class OptimizerRule { momentum, adamw, adamp };

inline std::string_view to_string(OptimizerRule r) {
  switch (r) {
    case OptimizerRule::momentum: return "momentum";
    case OptimizerRule::adamw: return "adamw";
    case OptimizerRule::adamp: return "adamp";
  }
  return "?";
}

struct OptimizerHyper {
  double lr = 2e-3;
  // Momentum rule weights the NEW gradient by beta: v = (1 - beta) v + beta m.
  double momentum_beta = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  bool operator==(const OptimizerHyper&) const = default;

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("optimizer: lr must be > 0");
    if (!(momentum_beta > 0.0 && momentum_beta <= 1.0))
      throw ConfigError("optimizer: momentum_beta must be in (0, 1]");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw ConfigError("optimizer: beta1/beta2 must be in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("optimizer: eps must be > 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("optimizer: weight_decay must be >= 0");
  }
};

struct OptimizerState {
  OptimizerRule rule = OptimizerRule::adamw;
  OptimizerHyper hyper;
  std::vector<double> first;   // v (momentum) or first moment
  std::vector<double> second;  // adaptive rules only
  std::uint64_t step = 0;
  std::vector<ParamGroup> groups;  // adamp: which slices are scale-invariant

  bool operator==(const OptimizerState& o) const {
    return rule == o.rule && hyper == o.hyper && first == o.first && second == o.second &&
           step == o.step;
  }

  static OptimizerState make(OptimizerRule rule, const OptimizerHyper& hyper, std::size_t n,
                             std::vector<ParamGroup> groups = {}) {
    hyper.validate();
    OptimizerState s;
    s.rule = rule;
    s.hyper = hyper;
    s.first.assign(n, 0.0);
    if (rule != OptimizerRule::momentum) s.second.assign(n, 0.0);
    s.groups = std::move(groups);
    return s;
  }
};

namespace detail {
inline void check_lengths(const OptimizerState& s, std::span<const double> params,
                          std::span<const double> grad) {
  if (params.size() != grad.size() || s.first.size() != params.size()) {
    throw ShapeError("optimizer: parameter, gradient and state lengths differ");
  }
}

// Bias-corrected adaptive direction m_hat / (sqrt(v_hat) + eps); advances moments.
inline std::vector<double> adaptive_direction(OptimizerState& s, std::span<const double> grad) {
  const auto& h = s.hyper;
  s.step += 1;
  const double t = static_cast<double>(s.step);
  const double bc1 = 1.0 - std::pow(h.beta1, t);
  const double bc2 = 1.0 - std::pow(h.beta2, t);
  std::vector<double> dir(grad.size());
  for (std::size_t k = 0; k < grad.size(); ++k) {
    s.first[k] = h.beta1 * s.first[k] + (1.0 - h.beta1) * grad[k];
    s.second[k] = h.beta2 * s.second[k] + (1.0 - h.beta2) * grad[k] * grad[k];
    const double m_hat = s.first[k] / bc1;
    const double v_hat = s.second[k] / bc2;
    dir[k] = m_hat / (std::sqrt(v_hat) + h.eps);
  }
  return dir;
}

inline void apply_decoupled(OptimizerState& s, std::span<double> params,
                            std::span<const double> dir) {
  const auto& h = s.hyper;
  for (std::size_t k = 0; k < params.size(); ++k) {
    params[k] -= h.lr * h.weight_decay * params[k];
    params[k] -= h.lr * dir[k];
  }
}
}  // namespace detail

// v = (1 - beta) v + beta m;  w = w - lr v
inline void momentum_step(OptimizerState& s, std::span<double> params,
                          std::span<const double> grad) {
  detail::check_lengths(s, params, grad);
  const double beta = s.hyper.momentum_beta;
  for (std::size_t k = 0; k < params.size(); ++k) {
    s.first[k] = (1.0 - beta) * s.first[k] + beta * grad[k];
    params[k] -= s.hyper.lr * s.first[k];
  }
  s.step += 1;
}

// Weight decay applied to w before the adaptive step, both scaled by lr.
inline void adamw_step(OptimizerState& s, std::span<double> params,
                       std::span<const double> grad) {
  detail::check_lengths(s, params, grad);
  const auto dir = detail::adaptive_direction(s, grad);
  detail::apply_decoupled(s, params, dir);
}

// AdamW with the radial component of the adaptive direction removed on every
// scale-invariant group: dir <- dir - (w.dir / |w|^2) w.
inline void adamp_step(OptimizerState& s, std::span<double> params,
                       std::span<const double> grad) {
  detail::check_lengths(s, params, grad);
  auto dir = detail::adaptive_direction(s, grad);
  for (const auto& g : s.groups) {
    if (!g.scale_invariant) continue;
    if (g.offset + g.length > params.size()) throw ShapeError("adamp: group out of range");
    auto w = params.subspan(g.offset, g.length);
    auto d = std::span<double>(dir).subspan(g.offset, g.length);
    const double ww = dot(w, w);
    if (ww <= 0.0) continue;
    const double coef = dot(w, d) / ww;
    for (std::size_t k = 0; k < w.size(); ++k) d[k] -= coef * w[k];
  }
  detail::apply_decoupled(s, params, dir);
}

inline void optimizer_step(OptimizerState& s, std::span<double> params,
                           std::span<const double> grad) {
  switch (s.rule) {
    case OptimizerRule::momentum: momentum_step(s, params, grad); break;
    case OptimizerRule::adamw: adamw_step(s, params, grad); break;
    case OptimizerRule::adamp: adamp_step(s, params, grad); break;
  }
}

}  // namespace gclr
