#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gclr/errors.hpp"
#include "gclr/numerics.hpp"

namespace gclr {

enum class Task { retrieval_text, retrieval_image, zero_shot };

inline std::string_view to_string(Task t) {
  switch (t) {
    case Task::retrieval_text: return "retrieval_text";
    case Task::retrieval_image: return "retrieval_image";
    case Task::zero_shot: return "zero_shot";
  }
  return "?";
}

struct RunInfo {
  std::string variant;
  std::string optimizer;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
};

// Accuracies are percentages.
struct MetricsRecord {
  Task task = Task::retrieval_text;
  double top1 = 0.0;
  double top5 = 0.0;
  double top10 = 0.0;
  std::optional<double> mean;  // retrieval tasks only
  std::size_t n_eval = 0;
  RunInfo run;

  bool monotone() const { return 0.0 <= top1 && top1 <= top5 && top5 <= top10 && top10 <= 100.0; }
};

inline constexpr std::array<std::size_t, 3> kTopK{1, 5, 10};

inline double table_mean(double top1, double top5, double top10) {
  return (top1 + top5 + top10) / 3.0;
}

// Rank of `truth` among the gallery by descending similarity; ties go to the
// lower gallery index.
inline std::size_t rank_of(std::span<const double> scores, std::size_t truth) {
  const double t = scores[truth];
  std::size_t rank = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] > t || (scores[j] == t && j < truth)) ++rank;
  }
  return rank;
}

namespace detail {
inline std::array<double, 3> topk_accuracy(const Matrix& queries, const Matrix& gallery,
                                           std::span<const std::size_t> truth) {
  if (queries.rows() != truth.size()) throw ShapeError("topk: one truth index per query");
  if (queries.cols() != gallery.cols()) throw ShapeError("topk: embedding dims differ");
  if (queries.rows() == 0) throw ShapeError("topk: no queries");
  for (std::size_t k : kTopK) {
    if (k > gallery.rows()) {
      throw ShapeError("topk: k = " + std::to_string(k) + " exceeds gallery size " +
                       std::to_string(gallery.rows()));
    }
  }
  std::array<std::size_t, 3> hits{};
  std::vector<double> scores(gallery.rows());
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    if (truth[q] >= gallery.rows()) throw IndexError("topk: truth index out of range");
    for (std::size_t j = 0; j < gallery.rows(); ++j)
      scores[j] = dot(queries.row(q), gallery.row(j));
    const std::size_t r = rank_of(scores, truth[q]);
    for (std::size_t k = 0; k < kTopK.size(); ++k)
      if (r < kTopK[k]) ++hits[k];
  }
  std::array<double, 3> acc{};
  for (std::size_t k = 0; k < 3; ++k)
    acc[k] = 100.0 * static_cast<double>(hits[k]) / static_cast<double>(queries.rows());
  return acc;
}
}  // namespace detail

inline MetricsRecord retrieval_topk(const Matrix& queries, const Matrix& gallery,
                                    std::span<const std::size_t> truth, Task task,
                                    RunInfo run = {}) {
  const auto acc = detail::topk_accuracy(queries, gallery, truth);
  return {task, acc[0], acc[1], acc[2], table_mean(acc[0], acc[1], acc[2]), queries.rows(),
          std::move(run)};
}

inline MetricsRecord zero_shot_classify(const Matrix& images, const Matrix& prototypes,
                                        std::span<const std::uint32_t> labels, RunInfo run = {}) {
  std::vector<std::size_t> truth(labels.begin(), labels.end());
  const auto acc = detail::topk_accuracy(images, prototypes, truth);
  return {Task::zero_shot, acc[0], acc[1], acc[2], std::nullopt, images.rows(), std::move(run)};
}

inline constexpr std::string_view kMetricsCsvHeader =
    "variant,optimizer,task,seed,epoch,top1,top5,top10,mean";

inline std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::string to_csv_row(const MetricsRecord& r) {
  std::string row = r.run.variant + "," + r.run.optimizer + "," + std::string(to_string(r.task)) +
                    "," + std::to_string(r.run.seed) + "," + std::to_string(r.run.epoch) + "," +
                    fixed4(r.top1) + "," + fixed4(r.top5) + "," + fixed4(r.top10) + ",";
  if (r.mean) row += fixed4(*r.mean);
  return row;
}

inline nlohmann::json to_json(const MetricsRecord& r) {
  nlohmann::json j = {{"variant", r.run.variant}, {"optimizer", r.run.optimizer},
                      {"task", to_string(r.task)}, {"seed", r.run.seed},
                      {"epoch", r.run.epoch},     {"top1", r.top1},
                      {"top5", r.top5},           {"top10", r.top10},
                      {"n_eval", r.n_eval}};
  j["mean"] = r.mean ? nlohmann::json(*r.mean) : nlohmann::json(nullptr);
  return j;
}

}  // namespace gclr
