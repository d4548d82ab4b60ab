#pragma once

#include <charconv>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gclr/errors.hpp"
#include "gclr/numerics.hpp"
#include "gclr/rng.hpp"

namespace gclr {

enum class AugmentFamily { gaussian_noise, coordinate_dropout, random_scale };

// One perturbation family with its parameters. Only the fields relevant to
// `family` are read.
struct AugmentSpec {
  AugmentFamily family = AugmentFamily::gaussian_noise;
  double sigma = 0.0;      // gaussian_noise
  double p = 0.0;          // coordinate_dropout
  double scale_lo = 1.0;   // random_scale
  double scale_hi = 1.0;

  static AugmentSpec noise(double sigma) { return {AugmentFamily::gaussian_noise, sigma}; }
  static AugmentSpec dropout(double p) { return {AugmentFamily::coordinate_dropout, 0.0, p}; }
  static AugmentSpec scale(double lo, double hi) {
    return {AugmentFamily::random_scale, 0.0, 0.0, lo, hi};
  }

  bool operator==(const AugmentSpec&) const = default;

  void validate() const {
    switch (family) {
      case AugmentFamily::gaussian_noise:
        if (!(sigma >= 0.0)) throw ConfigError("gaussian_noise: sigma must be >= 0");
        break;
      case AugmentFamily::coordinate_dropout:
        if (!(p >= 0.0 && p < 1.0)) throw ConfigError("coordinate_dropout: p must be in [0,1)");
        break;
      case AugmentFamily::random_scale:
        if (!(scale_lo <= scale_hi)) throw ConfigError("random_scale: lo must be <= hi");
        if (scale_lo <= 0.0 && scale_hi >= 0.0)
          throw ConfigError("random_scale: range must exclude 0");
        break;
    }
  }
};

struct AugmentPlan {
  std::size_t omega = 0;
  std::vector<AugmentSpec> image_specs;
  std::vector<AugmentSpec> text_specs;

  bool operator==(const AugmentPlan&) const = default;

  void validate(std::size_t batch_size) const {
    if (omega > 0 && (image_specs.empty() || text_specs.empty())) {
      throw ConfigError("augment plan: omega > 0 needs image and text specs");
    }
    if (omega > batch_size / 8) {
      throw ConfigError("augment plan: omega " + std::to_string(omega) +
                        " exceeds batch_size / 8 = " + std::to_string(batch_size / 8));
    }
    for (const auto& s : image_specs) s.validate();
    for (const auto& s : text_specs) s.validate();
  }
};

// A concrete draw from a family: its AugmentSpec plus the stream that supplies its
// randomness when applied.
struct Transform {
  AugmentSpec spec;
  Rng::State stream;
  bool operator==(const Transform&) const = default;
};

struct TransformDraw {
  std::vector<Transform> image;  // omega entries
  std::vector<Transform> text;
};

// Families are chosen uniformly with replacement. The draw depends only on
// (base stream, sample_index, epoch).
inline TransformDraw sample_transforms(const AugmentPlan& plan, std::size_t sample_index,
                                       std::size_t epoch, const Rng& base) {
  TransformDraw draw;
  if (plan.omega == 0) return draw;
  if (plan.image_specs.empty() || plan.text_specs.empty()) {
    throw ConfigError("sample_transforms: empty spec list with omega > 0");
  }
  const Rng per_sample = base.split(epoch).split(sample_index);
  auto pick = [&](const std::vector<AugmentSpec>& specs, std::uint64_t modality,
                  std::vector<Transform>& out) {
    const Rng mod = per_sample.split(modality);
    for (std::size_t j = 0; j < plan.omega; ++j) {
      Rng r = mod.split(j);
      const auto which = static_cast<std::size_t>(r.below(specs.size()));
      out.push_back({specs[which], r.split(0).state()});
    }
  };
  pick(plan.image_specs, 0, draw.image);
  pick(plan.text_specs, 1, draw.text);
  return draw;
}

inline std::vector<double> apply(const Transform& t, std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  Rng r = Rng::from_state(t.stream);
  switch (t.spec.family) {
    case AugmentFamily::gaussian_noise:
      if (t.spec.sigma == 0.0) break;
      for (double& x : out) x += t.spec.sigma * r.normal();
      break;
    case AugmentFamily::coordinate_dropout:
      for (double& x : out)
        if (r.uniform() < t.spec.p) x = 0.0;
      break;
    case AugmentFamily::random_scale: {
      const double s = r.uniform(t.spec.scale_lo, t.spec.scale_hi);
      for (double& x : out) x *= s;
      break;
    }
  }
  return out;
}

// "gaussian_noise:0.1", "coordinate_dropout:0.2", "random_scale:0.9:1.1"
inline AugmentSpec parse_augment_spec(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t colon = text.find(':', start);
    parts.push_back(text.substr(start, colon - start));
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  auto num = [&](std::size_t k) {
    double v = 0.0;
    const auto sv = parts[k];
    const auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
    if (ec != std::errc{} || ptr != sv.data() + sv.size()) {
      throw ConfigError("augment spec '" + std::string(text) + "': bad number");
    }
    return v;
  };
  AugmentSpec spec;
  if (parts[0] == "gaussian_noise" && parts.size() == 2) {
    spec = AugmentSpec::noise(num(1));
  } else if (parts[0] == "coordinate_dropout" && parts.size() == 2) {
    spec = AugmentSpec::dropout(num(1));
  } else if (parts[0] == "random_scale" && parts.size() == 3) {
    spec = AugmentSpec::scale(num(1), num(2));
  } else {
    throw ConfigError("unknown augment spec '" + std::string(text) + "'");
  }
  spec.validate();
  return spec;
}

inline std::string to_string(const AugmentSpec& s) {
  switch (s.family) {
    case AugmentFamily::gaussian_noise:
      return "gaussian_noise:" + format_double(s.sigma);
    case AugmentFamily::coordinate_dropout:
      return "coordinate_dropout:" + format_double(s.p);
    case AugmentFamily::random_scale:
      return "random_scale:" + format_double(s.scale_lo) + ":" + format_double(s.scale_hi);
  }
  return {};
}

}  // namespace gclr
