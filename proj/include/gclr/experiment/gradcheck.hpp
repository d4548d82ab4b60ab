#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gclr/encoders.hpp"
#include "gclr/estimator.hpp"
#include "gclr/experiment/config.hpp"
#include "gclr/objectives.hpp"
#include "gclr/rng.hpp"
#include "gclr/synthetic_data.hpp"

namespace gclr {

// Tiny problem used by every gradient check.
inline constexpr std::size_t kCheckBatch = 8;
inline constexpr std::size_t kCheckImageDim = 14;
inline constexpr std::size_t kCheckTextDim = 12;
inline constexpr std::size_t kCheckHidden = 10;
inline constexpr std::size_t kCheckEmbed = 8;

// Fourth-order central stencil step; truncation error is O(h^4).
inline constexpr double kFdStep = 1e-3;
// Coordinates whose true derivative is tiny are compared on this absolute
// scale instead of their own magnitude.
inline constexpr double kRelErrFloor = 1e-3;

struct CoordinateCheck {
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct VariantCheck {
  Variant variant = Variant::clip;
  std::size_t omega = 0;
  std::size_t probes = 0;
  double max_rel_err = 0.0;
  CoordinateCheck worst;
};

struct GradcheckReport {
  std::size_t layers = 2;
  std::size_t parameter_count = 0;
  std::vector<VariantCheck> variants;
  double seconds = 0.0;

  double max_rel_err() const {
    double m = 0.0;
    for (const auto& v : variants) m = std::max(m, v.max_rel_err);
    return m;
  }
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), kRelErrFloor});
}

// Forces tiny dims on `base`; keeps layers, normalize, tau, denominator,
// augmentations and seed.
inline ExperimentConfig gradcheck_config(ExperimentConfig base) {
  base.data.n = kCheckBatch;
  base.data.class_count = 10;
  base.data.latent_dim = 6;
  base.data.d_img = kCheckImageDim;
  base.data.d_txt = kCheckTextDim;
  base.arch.hidden = kCheckHidden;
  base.arch.embed_dim = kCheckEmbed;
  base.batch_size = kCheckBatch;
  base.augment.omega = 1;
  base.resolve();
  base.augment.omega = 1;
  return base;
}

inline double central_difference(const std::function<double(std::span<const double>)>& f,
                                 std::vector<double>& w, std::size_t k, double h) {
  const double w0 = w[k];
  auto at = [&](double delta) {
    w[k] = w0 + delta;
    return f(w);
  };
  const double value = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
  w[k] = w0;
  return value;
}

inline GradcheckReport gradcheck(const ExperimentConfig& base, std::size_t n_probe) {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = gradcheck_config(base);
  const BimodalDataset data = generate(cfg.data);
  std::vector<std::size_t> indices(kCheckBatch);
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  const Rng root(cfg.seed);
  const BatchViews views =
      build_views(data.images, data.texts, indices, cfg.augment, 0, root.split(stream::kAugment));

  const EncoderParams params = init_encoders(cfg.arch, cfg.seed);
  std::vector<double> w = flatten(params);
  auto probes = root.split(stream::kProbe).permutation(w.size());
  probes.resize(std::min(n_probe, w.size()));

  GradcheckReport report;
  report.layers = cfg.arch.layers;
  report.parameter_count = w.size();
  for (Variant v : {Variant::clip, Variant::infonce, Variant::sogclr, Variant::amclr,
                    Variant::xamclr}) {
    BatchViews used = views;
    if (v == Variant::clip || v == Variant::infonce || v == Variant::sogclr) {
      used.image.resize(1);
      used.text.resize(1);
    }
    const auto exact = batch_loss_and_gradient(params, used, cfg.tau, cfg.denominator, v);
    auto f = [&](std::span<const double> flat) {
      return batch_loss(unflatten(cfg.arch, flat), used, cfg.tau, cfg.denominator, v);
    };
    VariantCheck check{v, used.omega(), probes.size(), 0.0, {}};
    for (std::size_t k : probes) {
      const double numeric = central_difference(f, w, k, kFdStep);
      const double err = relative_error(exact.gradient[k], numeric);
      if (err >= check.max_rel_err) {
        check.max_rel_err = err;
        check.worst = {k, exact.gradient[k], numeric, err};
      }
    }
    report.variants.push_back(check);
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace gclr
