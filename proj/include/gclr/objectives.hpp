#pragma once

// Contrastive objectives: CLIP batch loss, InfoNCE, the exact global objective
// over a whole dataset, and the combination family F_1..F_kappa built from
// original and augmented views of both modalities.

#include <algorithm>
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

inline constexpr double kDefaultTemperature = 0.1;

// Whether the positive pair's own term is part of the contrastive denominator.
enum class Denominator { exclusive, inclusive };

enum class Family { amclr, xamclr };

enum class Variant { clip, infonce, sogclr, amclr, xamclr };

inline std::string_view to_string(Denominator d) {
  return d == Denominator::exclusive ? "exclusive" : "inclusive";
}

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::clip: return "clip";
    case Variant::infonce: return "infonce";
    case Variant::sogclr: return "sogclr";
    case Variant::amclr: return "amclr";
    case Variant::xamclr: return "xamclr";
  }
  return "?";
}

// Which variant of which modality: variant 0 is the original input, j >= 1 the
// j-th augmentation.
struct ViewId {
  Modality modality = Modality::image;
  std::size_t variant = 0;
  bool operator==(const ViewId&) const = default;
  auto operator<=>(const ViewId&) const = default;
};

enum class CombinationKind { cross_modal, intra_modal };

// forward: the anchor is the factor written first in the similarity (the image
// for cross-modal terms, the lower variant for intra-modal terms).
enum class Direction { forward, backward };

// One F_k. Row i of the anchor view is held fixed and the denominator sums over
// rows j of the contrast view; the positive is (anchor_i, contrast_i).
struct CombinationDescriptor {
  ViewId anchor;
  ViewId contrast;
  Direction direction = Direction::forward;
  CombinationKind kind = CombinationKind::cross_modal;

  bool operator==(const CombinationDescriptor&) const = default;

  std::string name() const {
    auto view = [](ViewId v) {
      return std::string(v.modality == Modality::image ? "I" : "T") + std::to_string(v.variant);
    };
    return view(anchor) + "->" + view(contrast);
  }
};

inline std::size_t binomial2(std::size_t n) { return n * (n - 1) / 2; }

inline std::size_t kappa(std::size_t omega, Family family) {
  const std::size_t v = omega + 1;
  const std::size_t cross = 2 * v * v;
  return family == Family::amclr ? cross : cross + 2 * binomial2(v) + 2 * binomial2(v);
}

// Order at omega = 1 reproduces F_1..F_8 (and F_9..F_12 for xAmCLR):
// image->text with image variant outer, then text->image with text variant
// outer, then intra-image and intra-text pairs, each pair forward then backward.
inline std::vector<CombinationDescriptor> enumerate_combinations(std::size_t omega,
                                                                 Family family) {
  std::vector<CombinationDescriptor> out;
  const auto I = Modality::image;
  const auto T = Modality::text;
  for (std::size_t a = 0; a <= omega; ++a)
    for (std::size_t b = 0; b <= omega; ++b)
      out.push_back({{I, a}, {T, b}, Direction::forward, CombinationKind::cross_modal});
  for (std::size_t b = 0; b <= omega; ++b)
    for (std::size_t a = 0; a <= omega; ++a)
      out.push_back({{T, b}, {I, a}, Direction::backward, CombinationKind::cross_modal});
  if (family == Family::xamclr) {
    for (Modality m : {I, T}) {
      for (std::size_t a = 0; a <= omega; ++a) {
        for (std::size_t b = a + 1; b <= omega; ++b) {
          out.push_back({{m, a}, {m, b}, Direction::forward, CombinationKind::intra_modal});
          out.push_back({{m, b}, {m, a}, Direction::backward, CombinationKind::intra_modal});
        }
      }
    }
  }
  return out;
}

struct CombinationLoss {
  double value = 0.0;
  std::vector<double> g;  // per-anchor mean of exp(s_ij / tau) over the denominator
};

namespace detail {
inline void check_aligned(const Matrix& a, const Matrix& c, const char* where) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) {
    throw ShapeError(std::string(where) + ": anchor and contrast shapes differ");
  }
  if (a.rows() == 0) throw ShapeError(std::string(where) + ": empty batch");
}

inline std::size_t denominator_size(std::size_t m, Denominator mode, const char* where) {
  const std::size_t d = mode == Denominator::exclusive ? m - 1 : m;
  if (d == 0) throw EmptyDenominatorError(std::string(where) + ": empty denominator");
  return d;
}

// log sum_{j in den(i)} exp(row_j / tau)
inline double row_logsumexp(std::span<const double> row, std::size_t i, double tau,
                            Denominator mode) {
  double mx = -INFINITY;
  for (std::size_t j = 0; j < row.size(); ++j)
    if (mode == Denominator::inclusive || j != i) mx = std::max(mx, row[j] / tau);
  double s = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j)
    if (mode == Denominator::inclusive || j != i) s += std::exp(row[j] / tau - mx);
  return mx + std::log(s);
}
}  // namespace detail

// F = -(tau/m) sum_i [ s_ii/tau - log sum_{j in den(i)} exp(s_ij/tau) ],
// s = anchor * contrast^T.
inline CombinationLoss combination_loss(const Matrix& anchor, const Matrix& contrast, double tau,
                                        Denominator mode = Denominator::exclusive) {
  detail::check_aligned(anchor, contrast, "combination_loss");
  const std::size_t m = anchor.rows();
  const double den = static_cast<double>(detail::denominator_size(m, mode, "combination_loss"));
  const Matrix s = matmul_nt(anchor, contrast);
  std::vector<double> terms(m);
  CombinationLoss out;
  out.g.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double lse = detail::row_logsumexp(s.row(i), i, tau, mode);
    terms[i] = s(i, i) / tau - lse;
    out.g[i] = std::exp(lse - std::log(den));
  }
  out.value = -(tau / static_cast<double>(m)) * pairwise_sum(terms);
  return out;
}

// Adds the gradient (w.r.t. both embedding matrices) of the surrogate
//   -(1/m) sum_i s_ii + (tau/m) sum_i g_i / u_i
// with u held constant. With u = g this is the exact gradient of
// combination_loss; with u a moving average it is the estimator's term.
inline void accumulate_combination_gradient(const Matrix& anchor, const Matrix& contrast,
                                            double tau, Denominator mode,
                                            std::span<const double> u, Matrix& d_anchor,
                                            Matrix& d_contrast) {
  detail::check_aligned(anchor, contrast, "accumulate_combination_gradient");
  const std::size_t m = anchor.rows();
  if (u.size() != m) throw ShapeError("accumulate_combination_gradient: u length");
  const double den =
      static_cast<double>(detail::denominator_size(m, mode, "accumulate_combination_gradient"));
  const double inv_m = 1.0 / static_cast<double>(m);
  const std::size_t d = anchor.cols();
  const Matrix s = matmul_nt(anchor, contrast);
  for (std::size_t i = 0; i < m; ++i) {
    if (!(u[i] > 0.0)) throw ColdStartError("moving average is not positive at use site");
    auto a_i = anchor.row(i);
    auto da_i = d_anchor.row(i);
    auto c_i = contrast.row(i);
    auto dc_i = d_contrast.row(i);
    for (std::size_t k = 0; k < d; ++k) {
      da_i[k] -= inv_m * c_i[k];
      dc_i[k] -= inv_m * a_i[k];
    }
    const double log_scale = std::log(static_cast<double>(m) * u[i] * den);
    for (std::size_t j = 0; j < m; ++j) {
      if (mode == Denominator::exclusive && j == i) continue;
      const double w = std::exp(s(i, j) / tau - log_scale);
      auto c_j = contrast.row(j);
      auto dc_j = d_contrast.row(j);
      for (std::size_t k = 0; k < d; ++k) {
        da_i[k] += w * c_j[k];
        dc_j[k] += w * a_i[k];
      }
    }
  }
}

// Embeddings of every view of a batch; index 0 is the original.
struct EmbeddedViews {
  std::vector<Matrix> image;
  std::vector<Matrix> text;

  const Matrix& get(ViewId v) const {
    const auto& views = v.modality == Modality::image ? image : text;
    if (v.variant >= views.size()) throw ShapeError("EmbeddedViews: missing view " +
                                                    std::to_string(v.variant));
    return views[v.variant];
  }
  std::size_t omega() const { return image.empty() ? 0 : image.size() - 1; }
};

struct CombinationValue {
  CombinationDescriptor descriptor;
  double value = 0.0;
  std::vector<double> g;
};

struct LossBreakdown {
  std::vector<CombinationValue> per_combination;
  double total = 0.0;
};

inline LossBreakdown combination_batch_loss(const EmbeddedViews& views, double tau,
                                            std::size_t omega, Family family,
                                            Denominator mode = Denominator::exclusive) {
  LossBreakdown out;
  std::vector<double> values;
  for (const auto& desc : enumerate_combinations(omega, family)) {
    CombinationLoss c =
        combination_loss(views.get(desc.anchor), views.get(desc.contrast), tau, mode);
    values.push_back(c.value);
    out.per_combination.push_back({desc, c.value, std::move(c.g)});
  }
  out.total = pairwise_sum(values);
  return out;
}

inline LossBreakdown amclr_batch_loss(const EmbeddedViews& views, double tau,
                                      Denominator mode = Denominator::exclusive) {
  return combination_batch_loss(views, tau, views.omega(), Family::amclr, mode);
}

inline LossBreakdown xamclr_batch_loss(const EmbeddedViews& views, double tau,
                                       Denominator mode = Denominator::exclusive) {
  return combination_batch_loss(views, tau, views.omega(), Family::xamclr, mode);
}

struct LossWithGradient {
  double value = 0.0;
  Matrix d_image;
  Matrix d_text;
};

// (1/m) sum_i [ log sum_j exp((s_ij - s_ii)/tau) + log sum_j exp((s_ji - s_ii)/tau) ]
inline LossWithGradient clip_batch_loss_with_gradient(const Matrix& emb_image,
                                                      const Matrix& emb_text, double tau) {
  detail::check_aligned(emb_image, emb_text, "clip_batch_loss");
  const std::size_t m = emb_image.rows();
  const Matrix s = matmul_nt(emb_image, emb_text);
  Matrix d_s(m, m);
  std::vector<double> terms(m);
  std::vector<double> shifted(m);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    // image i against all texts
    for (std::size_t j = 0; j < m; ++j) shifted[j] = (s(i, j) - s(i, i)) / tau;
    const double row_term = logsumexp(shifted);
    for (std::size_t j = 0; j < m; ++j) {
      const double p = std::exp(shifted[j] - row_term);
      d_s(i, j) += inv_m * p / tau;
      d_s(i, i) -= inv_m * p / tau;
    }
    // text i against all images
    for (std::size_t j = 0; j < m; ++j) shifted[j] = (s(j, i) - s(i, i)) / tau;
    const double col_term = logsumexp(shifted);
    for (std::size_t j = 0; j < m; ++j) {
      const double p = std::exp(shifted[j] - col_term);
      d_s(j, i) += inv_m * p / tau;
      d_s(i, i) -= inv_m * p / tau;
    }
    terms[i] = row_term + col_term;
  }
  return {inv_m * pairwise_sum(terms), matmul(d_s, emb_text), matmul_tn(d_s, emb_image)};
}

inline double clip_batch_loss(const Matrix& emb_image, const Matrix& emb_text, double tau) {
  return clip_batch_loss_with_gradient(emb_image, emb_text, tau).value;
}

// -(1/m) sum_i log softmax_j(s_ij / tau)[i], positive included in the denominator.
inline LossWithGradient infonce_loss_with_gradient(const Matrix& emb_image,
                                                   const Matrix& emb_text, double tau) {
  detail::check_aligned(emb_image, emb_text, "infonce_loss");
  const std::size_t m = emb_image.rows();
  const Matrix s = matmul_nt(emb_image, emb_text);
  Matrix d_s(m, m);
  std::vector<double> terms(m);
  std::vector<double> scaled(m);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) scaled[j] = s(i, j) / tau;
    const double lse = logsumexp(scaled);
    terms[i] = lse - scaled[i];
    for (std::size_t j = 0; j < m; ++j) d_s(i, j) += inv_m * std::exp(scaled[j] - lse) / tau;
    d_s(i, i) -= inv_m / tau;
  }
  return {inv_m * pairwise_sum(terms), matmul(d_s, emb_text), matmul_tn(d_s, emb_image)};
}

inline double infonce_loss(const Matrix& emb_image, const Matrix& emb_text, double tau) {
  return infonce_loss_with_gradient(emb_image, emb_text, tau).value;
}

// ---------------------------------------------------------------------------
// Parameter-space losses over raw (pre-encoder) batch views.

struct BatchViews {
  std::vector<Matrix> image;  // [0] original, [j] j-th augmentation
  std::vector<Matrix> text;
  std::size_t omega() const { return image.empty() ? 0 : image.size() - 1; }
  std::size_t rows() const { return image.empty() ? 0 : image[0].rows(); }
};

struct EncodedViews {
  EmbeddedViews embeddings;
  std::vector<ForwardTape> image_tapes;
  std::vector<ForwardTape> text_tapes;
};

inline EncodedViews encode(const EncoderParams& params, const BatchViews& views,
                           std::size_t view_count) {
  if (views.image.size() < view_count || views.text.size() < view_count) {
    throw ShapeError("encode: batch has fewer views than required");
  }
  EncodedViews out;
  for (std::size_t v = 0; v < view_count; ++v) {
    auto img = forward(params, views.image[v], Modality::image);
    out.embeddings.image.push_back(std::move(img.embedding));
    out.image_tapes.push_back(std::move(img.tape));
    auto txt = forward(params, views.text[v], Modality::text);
    out.embeddings.text.push_back(std::move(txt.embedding));
    out.text_tapes.push_back(std::move(txt.tape));
  }
  return out;
}

// Per-view upstream gradients, shaped like EmbeddedViews.
struct ViewGradients {
  std::vector<Matrix> image;
  std::vector<Matrix> text;

  explicit ViewGradients(const EmbeddedViews& like) {
    for (const auto& m : like.image) image.emplace_back(m.rows(), m.cols());
    for (const auto& m : like.text) text.emplace_back(m.rows(), m.cols());
  }
  Matrix& get(ViewId v) {
    return v.modality == Modality::image ? image[v.variant] : text[v.variant];
  }
};

inline std::vector<double> backprop_views(const EncoderParams& params, const EncodedViews& enc,
                                          const ViewGradients& grads) {
  std::vector<double> flat(params.arch.parameter_count(), 0.0);
  for (std::size_t v = 0; v < grads.image.size(); ++v)
    backward(params, enc.image_tapes[v], grads.image[v], flat);
  for (std::size_t v = 0; v < grads.text.size(); ++v)
    backward(params, enc.text_tapes[v], grads.text[v], flat);
  return flat;
}

// omega used by a variant given the views available.
inline std::size_t variant_omega(Variant v, const BatchViews& views) {
  return (v == Variant::amclr || v == Variant::xamclr) ? views.omega() : 0;
}

inline Family variant_family(Variant v) {
  return v == Variant::xamclr ? Family::xamclr : Family::amclr;
}

struct BatchLoss {
  double value = 0.0;
  std::vector<double> gradient;
};

// Exact batch loss of a variant and its parameter gradient. For the
// combination variants this is grad of sum_k F_k(w; B), i.e. the estimator
// with u replaced by the current batch g of each combination.
inline BatchLoss batch_loss_and_gradient(const EncoderParams& params, const BatchViews& views,
                                         double tau, Denominator mode, Variant variant,
                                         bool with_gradient = true) {
  const std::size_t omega = variant_omega(variant, views);
  const EncodedViews enc = encode(params, views, omega + 1);
  const EmbeddedViews& emb = enc.embeddings;
  ViewGradients grads(emb);
  BatchLoss out;
  if (variant == Variant::clip || variant == Variant::infonce) {
    LossWithGradient l = variant == Variant::clip
                             ? clip_batch_loss_with_gradient(emb.image[0], emb.text[0], tau)
                             : infonce_loss_with_gradient(emb.image[0], emb.text[0], tau);
    out.value = l.value;
    grads.image[0] = std::move(l.d_image);
    grads.text[0] = std::move(l.d_text);
  } else {
    const LossBreakdown lb = combination_batch_loss(emb, tau, omega, variant_family(variant), mode);
    out.value = lb.total;
    if (!with_gradient) return out;
    for (const auto& c : lb.per_combination) {
      const auto& d = c.descriptor;
      if (d.anchor == d.contrast) throw ShapeError("combination with identical views");
      accumulate_combination_gradient(emb.get(d.anchor), emb.get(d.contrast), tau, mode, c.g,
                                      grads.get(d.anchor), grads.get(d.contrast));
    }
  }
  if (with_gradient) out.gradient = backprop_views(params, enc, grads);
  return out;
}

inline double batch_loss(const EncoderParams& params, const BatchViews& views, double tau,
                         Denominator mode, Variant variant) {
  return batch_loss_and_gradient(params, views, tau, mode, variant, false).value;
}

// ---------------------------------------------------------------------------
// Exact global objective over a full dataset (positive included in every
// denominator):
//   F(w) = -(tau/n) sum_i log softmax_t(s_i. / tau)[i]
//          -(tau/n) sum_i log softmax_x(s_.i / tau)[i]

inline constexpr std::size_t kOracleMaxSamples = 4096;

namespace detail {
inline void check_oracle_scale(std::size_t n) {
  if (n > kOracleMaxSamples) {
    throw OracleScaleError("exact global objective limited to n <= " +
                           std::to_string(kOracleMaxSamples) + ", got " + std::to_string(n));
  }
  if (n == 0) throw ShapeError("exact global objective: empty dataset");
}
}  // namespace detail

inline double global_objective_exact(const EncoderParams& params, const Matrix& images,
                                     const Matrix& texts, double tau) {
  detail::check_oracle_scale(images.rows());
  const Matrix e_img = forward(params, images, Modality::image).embedding;
  const Matrix e_txt = forward(params, texts, Modality::text).embedding;
  const Matrix s = matmul_nt(e_img, e_txt);
  const Matrix st = transpose(s);
  const std::size_t n = s.rows();
  std::vector<double> terms(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double lse_row = detail::row_logsumexp(s.row(i), i, tau, Denominator::inclusive);
    const double lse_col = detail::row_logsumexp(st.row(i), i, tau, Denominator::inclusive);
    terms[i] = 2.0 * s(i, i) / tau - lse_row - lse_col;
  }
  return -(tau / static_cast<double>(n)) * pairwise_sum(terms);
}

// dF/ds_ij = (1/n) (P_ij + Q_ij - 2 delta_ij), with P the row softmax and Q the
// column softmax of s / tau.
inline std::vector<double> global_objective_exact_gradient(const EncoderParams& params,
                                                           const Matrix& images,
                                                           const Matrix& texts, double tau) {
  detail::check_oracle_scale(images.rows());
  const auto img = forward(params, images, Modality::image);
  const auto txt = forward(params, texts, Modality::text);
  const Matrix s = matmul_nt(img.embedding, txt.embedding);
  const std::size_t n = s.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix d_s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double lse = detail::row_logsumexp(s.row(i), i, tau, Denominator::inclusive);
    for (std::size_t j = 0; j < n; ++j) d_s(i, j) += inv_n * std::exp(s(i, j) / tau - lse);
    d_s(i, i) -= 2.0 * inv_n;
  }
  const Matrix st = transpose(s);
  for (std::size_t j = 0; j < n; ++j) {
    const double lse = detail::row_logsumexp(st.row(j), j, tau, Denominator::inclusive);
    for (std::size_t i = 0; i < n; ++i) d_s(i, j) += inv_n * std::exp(s(i, j) / tau - lse);
  }
  std::vector<double> grad(params.arch.parameter_count(), 0.0);
  backward(params, img.tape, matmul(d_s, txt.embedding), grad);
  backward(params, txt.tape, matmul_tn(d_s, img.embedding), grad);
  return grad;
}

}  // namespace gclr
