#pragma once

// Moving-average estimator for the global contrastive objective: per-sample
// running estimates u of the denominator means g, and the gradient estimator
// m_t built from the current batch.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "gclr/augmentation.hpp"
#include "gclr/encoders.hpp"
#include "gclr/errors.hpp"
#include "gclr/numerics.hpp"
#include "gclr/objectives.hpp"
#include "gclr/rng.hpp"

namespace gclr {

inline constexpr double kDefaultGamma = 0.9;

struct EstimatorState {
  std::vector<double> u_image;  // indexed by original sample id; 0 = never written
  std::vector<double> u_text;
  double gamma = kDefaultGamma;
  std::uint64_t step = 0;

  bool operator==(const EstimatorState&) const = default;

  static EstimatorState make(std::size_t n, double gamma = kDefaultGamma) {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
    return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), gamma, 0};
  }
  std::size_t size() const { return u_image.size(); }
};

// Mini-batch estimate of g for each anchor row.
inline std::vector<double> batch_g(const Matrix& anchor, const Matrix& contrast, double tau,
                                   Denominator mode = Denominator::exclusive) {
  detail::check_aligned(anchor, contrast, "batch_g");
  const std::size_t m = anchor.rows();
  const double den = static_cast<double>(detail::denominator_size(m, mode, "batch_g"));
  const Matrix s = matmul_nt(anchor, contrast);
  std::vector<double> g(m);
  for (std::size_t i = 0; i < m; ++i) {
    g[i] = std::exp(detail::row_logsumexp(s.row(i), i, tau, mode) - std::log(den));
  }
  return g;
}

struct AnchorG {
  std::vector<double> image;
  std::vector<double> text;
};

// One g per sample and anchor modality: the equal-weight mean over every
// combination whose anchor has that modality.
inline AnchorG combine_anchor_g(const LossBreakdown& lb, std::size_t m) {
  AnchorG out{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)};
  std::size_t n_image = 0;
  std::size_t n_text = 0;
  for (const auto& c : lb.per_combination) {
    const bool image = c.descriptor.anchor.modality == Modality::image;
    auto& dst = image ? out.image : out.text;
    (image ? n_image : n_text) += 1;
    for (std::size_t i = 0; i < m; ++i) dst[i] += c.g[i];
  }
  if (n_image > 0)
    for (double& x : out.image) x /= static_cast<double>(n_image);
  if (n_text > 0)
    for (double& x : out.text) x /= static_cast<double>(n_text);
  return out;
}

// u <- (1 - gamma) u + gamma g at the given indices; an untouched entry (u = 0)
// is set to g directly.
inline EstimatorState update_u(EstimatorState state, std::span<const std::size_t> indices,
                               std::span<const double> g_image, std::span<const double> g_text) {
  if (g_image.size() != indices.size() || g_text.size() != indices.size()) {
    throw ShapeError("update_u: g length must equal index count");
  }
  auto blend = [&](double& u, double g) {
    if (!(g > 0.0) || !std::isfinite(g)) throw NumericAbort("update_u: g must be positive");
    u = u == 0.0 ? g : (1.0 - state.gamma) * u + state.gamma * g;
  };
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t i = indices[r];
    if (i >= state.size()) {
      throw IndexError("update_u: index " + std::to_string(i) + " out of range");
    }
    blend(state.u_image[i], g_image[r]);
    blend(state.u_text[i], g_text[r]);
  }
  return state;
}

// m_t = sum_k [ -(1/m) sum_i grad s^k_ii + (tau/m) sum_i grad g^k_i / u_{anchor(k)}[i] ]
// using the state's current u at the batch indices.
inline std::vector<double> gradient_estimator(const EncoderParams& params,
                                              const EncodedViews& enc,
                                              std::span<const std::size_t> indices,
                                              const EstimatorState& state, double tau,
                                              Denominator mode, std::size_t omega,
                                              Family family) {
  const EmbeddedViews& emb = enc.embeddings;
  const std::size_t m = indices.size();
  std::vector<double> u_img(m);
  std::vector<double> u_txt(m);
  for (std::size_t r = 0; r < m; ++r) {
    if (indices[r] >= state.size()) throw IndexError("gradient_estimator: index out of range");
    u_img[r] = state.u_image[indices[r]];
    u_txt[r] = state.u_text[indices[r]];
    if (!(u_img[r] > 0.0) || !(u_txt[r] > 0.0)) {
      throw ColdStartError("gradient_estimator: u is zero for sample " +
                           std::to_string(indices[r]));
    }
  }
  ViewGradients grads(emb);
  for (const auto& d : enumerate_combinations(omega, family)) {
    const auto& u = d.anchor.modality == Modality::image ? u_img : u_txt;
    accumulate_combination_gradient(emb.get(d.anchor), emb.get(d.contrast), tau, mode, u,
                                    grads.get(d.anchor), grads.get(d.contrast));
  }
  return backprop_views(params, enc, grads);
}

inline std::vector<double> gradient_estimator(const EncoderParams& params,
                                              const BatchViews& views,
                                              std::span<const std::size_t> indices,
                                              const EstimatorState& state, double tau,
                                              Denominator mode, Variant variant) {
  const std::size_t omega = variant_omega(variant, views);
  return gradient_estimator(params, encode(params, views, omega + 1), indices, state, tau, mode,
                            omega, variant_family(variant));
}

// Original rows of a batch plus omega augmented views per modality. Every
// augmented row depends only on its own sample (index, epoch).
inline BatchViews build_views(const Matrix& images, const Matrix& texts,
                              std::span<const std::size_t> indices, const AugmentPlan& plan,
                              std::size_t epoch, const Rng& augment_stream) {
  BatchViews views;
  views.image.push_back(gather_rows(images, indices));
  views.text.push_back(gather_rows(texts, indices));
  for (std::size_t j = 0; j < plan.omega; ++j) {
    views.image.emplace_back(indices.size(), images.cols());
    views.text.emplace_back(indices.size(), texts.cols());
  }
  for (std::size_t r = 0; r < indices.size() && plan.omega > 0; ++r) {
    const TransformDraw draw = sample_transforms(plan, indices[r], epoch, augment_stream);
    for (std::size_t j = 0; j < plan.omega; ++j) {
      const auto img = apply(draw.image[j], images.row(indices[r]));
      std::copy(img.begin(), img.end(), views.image[j + 1].row(r).begin());
      const auto txt = apply(draw.text[j], texts.row(indices[r]));
      std::copy(txt.begin(), txt.end(), views.text[j + 1].row(r).begin());
    }
  }
  return views;
}

struct UpdateSummary {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

struct StepReport {
  std::vector<std::size_t> indices;
  LossBreakdown losses;
  std::vector<double> gradient;  // m_t
  UpdateSummary u_image;
  UpdateSummary u_text;
};

struct StepResult {
  EstimatorState state;
  StepReport report;
};

namespace detail {
inline UpdateSummary summarize(const std::vector<double>& u, std::span<const std::size_t> idx) {
  UpdateSummary s{INFINITY, 0.0, -INFINITY};
  for (std::size_t i : idx) {
    s.min = std::min(s.min, u[i]);
    s.max = std::max(s.max, u[i]);
    s.mean += u[i];
  }
  s.mean /= static_cast<double>(idx.size());
  return s;
}
}  // namespace detail

// One inner iteration on already-built views: forward every view, evaluate all
// combinations, fold their g into u, then assemble m_t with the updated u.
inline StepResult estimator_step(const EncoderParams& params, const BatchViews& views,
                                 std::span<const std::size_t> indices,
                                 const EstimatorState& state, double tau, Denominator mode,
                                 std::size_t omega, Family family) {
  if (views.rows() != indices.size()) throw ShapeError("estimator_step: views/indices mismatch");
  const EncodedViews enc = encode(params, views, omega + 1);
  StepResult out;
  out.report.indices.assign(indices.begin(), indices.end());
  out.report.losses = combination_batch_loss(enc.embeddings, tau, omega, family, mode);
  const AnchorG g = combine_anchor_g(out.report.losses, indices.size());
  out.state = update_u(state, indices, g.image, g.text);
  out.state.step += 1;
  out.report.gradient =
      gradient_estimator(params, enc, indices, out.state, tau, mode, omega, family);
  out.report.u_image = detail::summarize(out.state.u_image, indices);
  out.report.u_text = detail::summarize(out.state.u_text, indices);
  return out;
}

// Batch of original samples for one step.
struct Batch {
  std::vector<std::size_t> indices;  // ids into the training set, also the u index
  std::size_t epoch = 0;
};

struct StepConfig {
  double tau = kDefaultTemperature;
  Denominator mode = Denominator::exclusive;
};

inline StepResult sogclr_step(const EncoderParams& params, const Matrix& images,
                              const Matrix& texts, const Batch& batch,
                              const EstimatorState& state, const StepConfig& cfg) {
  const BatchViews views = build_views(images, texts, batch.indices, AugmentPlan{}, batch.epoch,
                                       Rng(0));
  return estimator_step(params, views, batch.indices, state, cfg.tau, cfg.mode, 0, Family::amclr);
}

inline StepResult amclr_step(const EncoderParams& params, const Matrix& images,
                             const Matrix& texts, const Batch& batch,
                             const EstimatorState& state, const StepConfig& cfg,
                             const AugmentPlan& plan, const Rng& augment_stream) {
  const BatchViews views =
      build_views(images, texts, batch.indices, plan, batch.epoch, augment_stream);
  return estimator_step(params, views, batch.indices, state, cfg.tau, cfg.mode, plan.omega,
                        Family::amclr);
}

inline StepResult xamclr_step(const EncoderParams& params, const Matrix& images,
                              const Matrix& texts, const Batch& batch,
                              const EstimatorState& state, const StepConfig& cfg,
                              const AugmentPlan& plan, const Rng& augment_stream) {
  const BatchViews views =
      build_views(images, texts, batch.indices, plan, batch.epoch, augment_stream);
  return estimator_step(params, views, batch.indices, state, cfg.tau, cfg.mode, plan.omega,
                        Family::xamclr);
}

}  // namespace gclr
