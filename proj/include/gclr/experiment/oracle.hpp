#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "gclr/encoders.hpp"
#include "gclr/estimator.hpp"
#include "gclr/experiment/config.hpp"
#include "gclr/experiment/train.hpp"
#include "gclr/objectives.hpp"
#include "gclr/synthetic_data.hpp"

namespace gclr {

inline constexpr std::size_t kOracleCompareMaxSamples = 512;

struct BatchAverageCheck {
  std::size_t batch_size = 0;
  std::size_t batches = 0;
  double batch_average = 0.0;  // sum_B |B| F(w; B) / n
  double exact = 0.0;
  double rel_diff = 0.0;
};

struct OracleReport {
  std::size_t n = 0;
  std::vector<BatchAverageCheck> averages;  // full batch first, then the config batch size
  double estimator_rel_err = 0.0;           // m_t (gamma = 1, B = D) vs exact gradient
};

// Mini-batch objective average over one epoch of batches against the global
// objective, with inclusive denominators and no augmentation.
inline BatchAverageCheck batch_average_check(const EncoderParams& params, const BimodalDataset& ds,
                                             std::size_t batch_size, double tau,
                                             const Rng& root) {
  BatchAverageCheck out;
  out.batch_size = batch_size;
  const auto batches = epoch_batches(ds.size(), batch_size, 0, root);
  out.batches = batches.size();
  double acc = 0.0;
  for (const auto& b : batches) {
    const BatchViews views = build_views(ds.images, ds.texts, b, AugmentPlan{}, 0, root);
    acc += static_cast<double>(b.size()) *
           batch_loss(params, views, tau, Denominator::inclusive, Variant::sogclr);
  }
  out.batch_average = acc / static_cast<double>(ds.size());
  out.exact = global_objective_exact(params, ds.images, ds.texts, tau);
  out.rel_diff = std::abs(out.batch_average - out.exact) / std::abs(out.exact);
  return out;
}

inline OracleReport oracle_compare(const ExperimentConfig& cfg) {
  if (cfg.data.n > kOracleCompareMaxSamples && cfg.dataset_path.empty()) {
    throw OracleScaleError("oracle-compare: n = " + std::to_string(cfg.data.n) + " exceeds " +
                           std::to_string(kOracleCompareMaxSamples));
  }
  const BimodalDataset ds = cfg.dataset_path.empty() ? generate(cfg.data) : load(cfg.dataset_path);
  if (ds.size() > kOracleCompareMaxSamples) {
    throw OracleScaleError("oracle-compare: dataset exceeds " +
                           std::to_string(kOracleCompareMaxSamples) + " samples");
  }
  const EncoderParams params = init_encoders(cfg.arch, cfg.seed);
  const Rng root(cfg.seed);
  OracleReport report;
  report.n = ds.size();
  report.averages.push_back(batch_average_check(params, ds, ds.size(), cfg.tau, root));
  if (cfg.batch_size < ds.size())
    report.averages.push_back(batch_average_check(params, ds, cfg.batch_size, cfg.tau, root));

  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const StepResult step = sogclr_step(params, ds.images, ds.texts, Batch{all, 0},
                                      EstimatorState::make(ds.size(), 1.0),
                                      StepConfig{cfg.tau, Denominator::inclusive});
  const auto exact = global_objective_exact_gradient(params, ds.images, ds.texts, cfg.tau);
  report.estimator_rel_err = relative_l2_error(step.report.gradient, exact);
  return report;
}

}  // namespace gclr
