#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "gclr/evaluation.hpp"
#include "gclr/experiment/config.hpp"
#include "gclr/experiment/train.hpp"

namespace gclr {

struct SweepAxes {
  std::vector<Variant> variants;
  std::vector<OptimizerRule> optimizers;
  std::vector<std::uint64_t> seeds;
};

struct CellFailure {
  Variant variant;
  OptimizerRule optimizer;
  std::uint64_t seed;
  std::string error;
};

struct CellSummary {
  Variant variant;
  OptimizerRule optimizer;
  Task task;
  std::size_t runs = 0;
  double top1_mean = 0, top1_std = 0;
  double top5_mean = 0, top5_std = 0;
  double top10_mean = 0, top10_std = 0;
};

// AmCLR against SogCLR on Retrieval-Text Top-1, per optimizer, over paired seeds.
struct DirectionalComparison {
  OptimizerRule optimizer;
  std::size_t paired_seeds = 0;
  double amclr_mean = 0.0;
  double sogclr_mean = 0.0;
  double difference() const { return amclr_mean - sogclr_mean; }
  bool within_margin() const { return difference() >= -kSoftMargin; }
  bool ordering_reproduced() const { return difference() > 0.0; }

  static constexpr double kSoftMargin = 0.5;  // percentage points
};

struct SweepResult {
  std::vector<MetricsRecord> rows;  // final-epoch records, three per successful cell
  std::vector<CellFailure> failures;
  std::vector<CellSummary> summary;
  std::vector<DirectionalComparison> directional;
};

// Sample mean and (n - 1) standard deviation; std is 0 for a single run.
inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

inline std::vector<CellSummary> summarize_rows(const std::vector<MetricsRecord>& rows) {
  using Key = std::tuple<std::string, std::string, int>;
  std::map<Key, std::vector<const MetricsRecord*>> groups;
  std::vector<Key> order;
  for (const auto& r : rows) {
    Key k{r.run.variant, r.run.optimizer, static_cast<int>(r.task)};
    auto [it, inserted] = groups.try_emplace(k);
    if (inserted) order.push_back(k);
    it->second.push_back(&r);
  }
  std::vector<CellSummary> out;
  for (const auto& k : order) {
    const auto& g = groups[k];
    std::vector<double> t1, t5, t10;
    for (const auto* r : g) {
      t1.push_back(r->top1);
      t5.push_back(r->top5);
      t10.push_back(r->top10);
    }
    CellSummary s{config_detail::parse_variant(std::get<0>(k)),
                  config_detail::parse_optimizer(std::get<1>(k)),
                  static_cast<Task>(std::get<2>(k)),
                  g.size()};
    std::tie(s.top1_mean, s.top1_std) = mean_std(t1);
    std::tie(s.top5_mean, s.top5_std) = mean_std(t5);
    std::tie(s.top10_mean, s.top10_std) = mean_std(t10);
    out.push_back(s);
  }
  return out;
}

// Only seeds where both AmCLR and SogCLR finished count.
inline std::vector<DirectionalComparison> compare_directional(
    const std::vector<MetricsRecord>& rows, const std::vector<OptimizerRule>& optimizers) {
  std::vector<DirectionalComparison> out;
  for (OptimizerRule opt : optimizers) {
    std::map<std::uint64_t, double> amclr, sogclr;
    for (const auto& r : rows) {
      if (r.task != Task::retrieval_text || r.run.optimizer != to_string(opt)) continue;
      if (r.run.variant == to_string(Variant::amclr)) amclr[r.run.seed] = r.top1;
      if (r.run.variant == to_string(Variant::sogclr)) sogclr[r.run.seed] = r.top1;
    }
    DirectionalComparison c{opt};
    for (const auto& [seed, a] : amclr) {
      const auto s = sogclr.find(seed);
      if (s == sogclr.end()) continue;
      ++c.paired_seeds;
      c.amclr_mean += a;
      c.sogclr_mean += s->second;
    }
    if (c.paired_seeds == 0) continue;
    c.amclr_mean /= static_cast<double>(c.paired_seeds);
    c.sogclr_mean /= static_cast<double>(c.paired_seeds);
    out.push_back(c);
  }
  return out;
}

inline constexpr std::string_view kSweepSummaryHeader =
    "variant,optimizer,task,runs,top1_mean,top1_std,top5_mean,top5_std,top10_mean,top10_std";

inline std::string summary_row(const CellSummary& s) {
  return std::string(to_string(s.variant)) + "," + std::string(to_string(s.optimizer)) + "," +
         std::string(to_string(s.task)) + "," + std::to_string(s.runs) + "," +
         fixed4(s.top1_mean) + "," + fixed4(s.top1_std) + "," + fixed4(s.top5_mean) + "," +
         fixed4(s.top5_std) + "," + fixed4(s.top10_mean) + "," + fixed4(s.top10_std);
}

inline std::string directional_report(const std::vector<DirectionalComparison>& cmp) {
  std::string out;
  for (const auto& c : cmp) {
    out += "optimizer=" + std::string(to_string(c.optimizer)) +
           " paired_seeds=" + std::to_string(c.paired_seeds) +
           " amclr_top1=" + fixed4(c.amclr_mean) + " sogclr_top1=" + fixed4(c.sogclr_mean) +
           " diff=" + fixed4(c.difference()) +
           " within_margin=" + (c.within_margin() ? "yes" : "no") +
           " amclr_ahead=" + (c.ordering_reproduced() ? "yes" : "no") + "\n";
  }
  return out;
}

inline std::filesystem::path cell_dir(const std::filesystem::path& root, Variant v,
                                      OptimizerRule o, std::uint64_t seed) {
  return root / (std::string(to_string(v)) + "_" + std::string(to_string(o)) + "_seed" +
                 std::to_string(seed));
}

// Runs every (variant, optimizer, seed) cell sequentially, each in its own
// subdirectory of base.out_dir, and writes sweep.csv, sweep_summary.csv,
// sweep_failures.csv and sweep_report.txt there.
inline SweepResult sweep(const ExperimentConfig& base, const SweepAxes& axes) {
  if (axes.variants.empty() || axes.optimizers.empty() || axes.seeds.empty()) {
    throw ConfigError("sweep: every axis needs at least one value");
  }
  const std::filesystem::path root = base.out_dir;
  std::filesystem::create_directories(root);
  const std::string base_text = serialize_config(base);
  SweepResult result;
  for (std::uint64_t seed : axes.seeds) {
    for (Variant v : axes.variants) {
      for (OptimizerRule o : axes.optimizers) {
        try {
          const ExperimentConfig cell = parse_config(
              base_text, {{"variant", std::string(to_string(v))},
                          {"optimizer", std::string(to_string(o))},
                          {"seed", std::to_string(seed)},
                          {"omega", std::to_string(
                                        v == Variant::amclr || v == Variant::xamclr
                                            ? std::max<std::size_t>(base.augment.omega, 1)
                                            : 0)},
                          {"out_dir", cell_dir(root, v, o, seed).string()}});
          const RunArtifacts art = train(cell);
          const std::size_t last = art.metrics.back().run.epoch;
          for (const auto& r : art.metrics)
            if (r.run.epoch == last) result.rows.push_back(r);
        } catch (const Error& e) {
          result.failures.push_back({v, o, seed, e.what()});
        }
      }
    }
  }
  result.summary = summarize_rows(result.rows);
  result.directional = compare_directional(result.rows, axes.optimizers);

  std::ofstream csv(root / "sweep.csv");
  csv << kMetricsCsvHeader << "\n";
  for (const auto& r : result.rows) csv << to_csv_row(r) << "\n";
  std::ofstream summary(root / "sweep_summary.csv");
  summary << kSweepSummaryHeader << "\n";
  for (const auto& s : result.summary) summary << summary_row(s) << "\n";
  std::ofstream failures(root / "sweep_failures.csv");
  failures << "variant,optimizer,seed,error\n";
  for (const auto& f : result.failures) {
    std::string msg = f.error;
    for (char& c : msg)
      if (c == ',' || c == '\n') c = ';';
    failures << to_string(f.variant) << "," << to_string(f.optimizer) << "," << f.seed << ","
             << msg << "\n";
  }
  std::ofstream(root / "sweep_report.txt") << directional_report(result.directional);
  return result;
}

}  // namespace gclr
