#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gclr/encoders.hpp"
#include "gclr/estimator.hpp"
#include "gclr/evaluation.hpp"
#include "gclr/experiment/checkpoint.hpp"
#include "gclr/experiment/config.hpp"
#include "gclr/objectives.hpp"
#include "gclr/optimizers.hpp"
#include "gclr/rng.hpp"
#include "gclr/synthetic_data.hpp"

namespace gclr {

struct PreparedData {
  BimodalDataset train;
  BimodalDataset eval;
  Matrix prototypes;  // raw class prototypes in text-input space
};

// Held-out split is a fixed fraction chosen by the dataset seed, so every run
// on the same data evaluates on the same samples.
inline PreparedData prepare_data(const ExperimentConfig& cfg) {
  BimodalDataset full = cfg.dataset_path.empty() ? generate(cfg.data) : load(cfg.dataset_path);
  if (full.d_img() != cfg.arch.d_img || full.d_txt() != cfg.arch.d_txt) {
    throw ConfigError("dataset dimensions do not match config d_img / d_txt");
  }
  const std::uint64_t split_seed = full.gen_config ? full.gen_config->seed : cfg.data.seed;
  auto perm = Rng(split_seed).split(stream::kSplit).permutation(full.size());
  const auto n_eval = static_cast<std::size_t>(
      std::llround(cfg.eval_fraction * static_cast<double>(full.size())));
  if (n_eval < kTopK.back() || full.size() - n_eval < cfg.batch_size) {
    throw ConfigError("dataset too small for eval_fraction / batch_size");
  }
  std::vector<std::size_t> eval_idx(perm.begin(), perm.begin() + static_cast<long>(n_eval));
  std::vector<std::size_t> train_idx(perm.begin() + static_cast<long>(n_eval), perm.end());
  std::sort(eval_idx.begin(), eval_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  PreparedData out{subset(full, train_idx), subset(full, eval_idx), {}};
  out.prototypes = make_class_prototypes(full);
  return out;
}

// Shuffled partition of [0, n) into batches of `batch_size`; a trailing batch
// of one sample is merged into the previous batch.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                           std::size_t epoch, const Rng& root) {
  const auto order = root.split(stream::kShuffle).split(epoch).permutation(n);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<long>(start),
                         order.begin() + static_cast<long>(end));
  }
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

inline std::size_t steps_per_epoch(std::size_t n, std::size_t batch_size) {
  const std::size_t full = (n + batch_size - 1) / batch_size;
  return (full > 1 && n % batch_size == 1) ? full - 1 : full;
}

inline std::vector<MetricsRecord> evaluate(const EncoderParams& params, const PreparedData& data,
                                           const RunInfo& run) {
  const Matrix e_img = forward(params, data.eval.images, Modality::image).embedding;
  const Matrix e_txt = forward(params, data.eval.texts, Modality::text).embedding;
  const Matrix e_proto = forward(params, data.prototypes, Modality::text).embedding;
  std::vector<std::size_t> identity(data.eval.size());
  for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = i;
  std::vector<MetricsRecord> out;
  out.push_back(retrieval_topk(e_img, e_txt, identity, Task::retrieval_text, run));
  out.push_back(retrieval_topk(e_txt, e_img, identity, Task::retrieval_image, run));
  out.push_back(zero_shot_classify(e_img, e_proto, data.eval.labels, run));
  for (const auto& r : out) {
    if (!r.monotone()) throw NumericAbort("evaluation produced non-monotone top-k");
  }
  return out;
}

inline bool variant_uses_estimator(Variant v) {
  return v == Variant::sogclr || v == Variant::amclr || v == Variant::xamclr;
}

struct LossLogEntry {
  std::uint64_t step = 0;  // 1-based global step
  std::size_t epoch = 0;   // 1-based
  double loss = 0.0;
  bool operator==(const LossLogEntry&) const = default;
};

inline std::string format_loss_line(const LossLogEntry& e) {
  return std::to_string(e.step) + "," + std::to_string(e.epoch) + "," + format_double(e.loss);
}

struct TrainOptions {
  std::optional<std::filesystem::path> resume_from;
  std::optional<std::uint64_t> stop_after_step;  // checkpoint and return early
  bool write_files = true;
};

struct RunArtifacts {
  std::string config_snapshot;
  std::vector<MetricsRecord> metrics;
  std::vector<LossLogEntry> loss_log;
  EncoderParams params;
  std::optional<std::filesystem::path> checkpoint;
  bool completed = false;
};

namespace detail {

inline std::string snapshot_key(const std::string& snapshot) {
  std::istringstream in(snapshot);
  std::string line;
  std::string out;
  while (std::getline(in, line))
    if (line.rfind("out_dir", 0) != 0) out += line + "\n";
  return out;
}

// Keeps lines (after the header) whose leading integer fields pass `keep`.
inline void filter_csv(const std::filesystem::path& path, std::size_t column,
                       std::uint64_t max_value) {
  if (!std::filesystem::exists(path)) return;
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  std::vector<std::string> kept{header};
  std::string line;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string field;
    for (std::size_t c = 0; c <= column; ++c) std::getline(ss, field, ',');
    if (std::stoull(field) <= max_value) kept.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : kept) out << l << "\n";
}

inline void filter_jsonl(const std::filesystem::path& path, std::uint64_t max_epoch) {
  if (!std::filesystem::exists(path)) return;
  std::ifstream in(path);
  std::vector<std::string> kept;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (nlohmann::json::parse(line).at("epoch").get<std::uint64_t>() <= max_epoch)
      kept.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : kept) out << l << "\n";
}

class ArtifactWriter {
 public:
  // kappa > 0 also writes the per-combination breakdown.
  ArtifactWriter(const std::filesystem::path& dir, bool enabled, bool append,
                 std::uint64_t resumed_step, std::uint64_t resumed_epochs, std::size_t kappa)
      : dir_(dir), enabled_(enabled), kappa_(kappa) {
    if (!enabled_) return;
    std::filesystem::create_directories(dir_);
    if (append) {
      filter_csv(dir_ / "loss_log.csv", 0, resumed_step);
      filter_csv(dir_ / "loss_breakdown.csv", 0, resumed_step);
      filter_csv(dir_ / "metrics.csv", 4, resumed_epochs);
      filter_jsonl(dir_ / "metrics.jsonl", resumed_epochs);
    }
    open(loss_, "loss_log.csv", append, "step,epoch,loss");
    open(metrics_, "metrics.csv", append, std::string(kMetricsCsvHeader));
    if (kappa_ > 0) {
      std::string header = "step,epoch";
      for (std::size_t k = 1; k <= kappa_; ++k) header += ",F_" + std::to_string(k);
      open(breakdown_, "loss_breakdown.csv", append, header + ",F_total");
    }
    const bool jsonl_exists = std::filesystem::exists(dir_ / "metrics.jsonl");
    jsonl_.open(dir_ / "metrics.jsonl",
                append && jsonl_exists ? std::ios::app : std::ios::trunc);
  }

  void loss(const LossLogEntry& e) {
    if (enabled_) loss_ << format_loss_line(e) << "\n";
  }
  void breakdown(const LossLogEntry& e, const LossBreakdown& lb) {
    if (!enabled_ || kappa_ == 0) return;
    breakdown_ << e.step << "," << e.epoch;
    for (const auto& c : lb.per_combination) breakdown_ << "," << format_double(c.value);
    breakdown_ << "," << format_double(lb.total) << "\n";
  }
  void metric(const MetricsRecord& r) {
    if (!enabled_) return;
    metrics_ << to_csv_row(r) << "\n";
    jsonl_ << to_json(r).dump() << "\n";
    metrics_.flush();
    jsonl_.flush();
  }
  void flush() {
    if (!enabled_) return;
    loss_.flush();
    if (kappa_ > 0) breakdown_.flush();
  }

 private:
  void open(std::ofstream& f, const char* name, bool append, const std::string& header) {
    const auto path = dir_ / name;
    const bool exists = std::filesystem::exists(path);
    f.open(path, append && exists ? std::ios::app : std::ios::trunc);
    if (!f) throw Error("cannot open '" + path.string() + "'");
    if (!(append && exists)) f << header << "\n";
  }

  std::filesystem::path dir_;
  bool enabled_;
  std::size_t kappa_;
  std::ofstream loss_;
  std::ofstream breakdown_;
  std::ofstream metrics_;
  std::ofstream jsonl_;
};

inline void dump_nan(const std::filesystem::path& dir, bool enabled, std::uint64_t step,
                     std::size_t epoch, const std::vector<std::size_t>& indices,
                     const std::string& what) {
  std::string msg = what + " at step " + std::to_string(step) + " (epoch " +
                    std::to_string(epoch) + "), batch indices:";
  for (std::size_t i : indices) msg += " " + std::to_string(i);
  if (enabled) {
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "nan_dump.txt") << msg << "\n";
  }
  throw NumericAbort(msg);
}

}  // namespace detail

inline RunArtifacts train(const ExperimentConfig& cfg, const TrainOptions& opts = {}) {
  cfg.validate();
  RunArtifacts art;
  art.config_snapshot = serialize_config(cfg);
  const std::filesystem::path out_dir = cfg.out_dir;

  const PreparedData data = prepare_data(cfg);
  const std::size_t n_train = data.train.size();
  const Rng root(cfg.seed);
  const Rng augment_stream = root.split(stream::kAugment);
  const RunInfo run{std::string(to_string(cfg.variant)), std::string(to_string(cfg.optimizer)),
                    cfg.seed, 0};

  EncoderParams params = init_encoders(cfg.arch, cfg.seed);
  std::vector<double> flat = flatten(params);
  OptimizerState opt =
      OptimizerState::make(cfg.optimizer, cfg.opt, flat.size(), parameter_groups(cfg.arch));
  EstimatorState est = EstimatorState::make(n_train, cfg.gamma);
  std::uint64_t start_step = 0;

  if (opts.resume_from) {
    Checkpoint ck = load_checkpoint(*opts.resume_from);
    if (detail::snapshot_key(ck.config_snapshot) != detail::snapshot_key(art.config_snapshot)) {
      throw ConfigError("resume: checkpoint was written by a different configuration");
    }
    params = std::move(ck.params);
    flat = flatten(params);
    opt = std::move(ck.optimizer);
    est = std::move(ck.estimator);
    start_step = ck.step;
  }

  const std::size_t per_epoch = steps_per_epoch(n_train, cfg.batch_size);
  const std::uint64_t total_steps = per_epoch * cfg.epochs;
  detail::ArtifactWriter writer(out_dir, opts.write_files, opts.resume_from.has_value(),
                                start_step, start_step / per_epoch,
                                variant_uses_estimator(cfg.variant)
                                    ? kappa(cfg.augment.omega, variant_family(cfg.variant))
                                    : 0);

  auto make_checkpoint = [&](std::uint64_t step) {
    return Checkpoint{art.config_snapshot, step, params, opt, est, root.state()};
  };

  const StepConfig step_cfg{cfg.tau, cfg.denominator};
  std::uint64_t step = start_step;
  for (std::size_t epoch = start_step / per_epoch; epoch < cfg.epochs; ++epoch) {
    const auto batches = epoch_batches(n_train, cfg.batch_size, epoch, root);
    for (std::size_t b = step % per_epoch; b < batches.size(); ++b) {
      const auto& indices = batches[b];
      ++step;
      double loss = 0.0;
      std::vector<double> grad;
      LossBreakdown breakdown;
      const Batch batch{indices, epoch};
      try {
        switch (cfg.variant) {
          case Variant::clip:
          case Variant::infonce: {
            const BatchViews views = build_views(data.train.images, data.train.texts, indices,
                                                 AugmentPlan{}, epoch, augment_stream);
            BatchLoss bl =
                batch_loss_and_gradient(params, views, cfg.tau, cfg.denominator, cfg.variant);
            loss = bl.value;
            grad = std::move(bl.gradient);
            break;
          }
          case Variant::sogclr:
          case Variant::amclr:
          case Variant::xamclr: {
            StepResult r =
                cfg.variant == Variant::sogclr
                    ? sogclr_step(params, data.train.images, data.train.texts, batch, est, step_cfg)
                : cfg.variant == Variant::amclr
                    ? amclr_step(params, data.train.images, data.train.texts, batch, est, step_cfg,
                                 cfg.augment, augment_stream)
                    : xamclr_step(params, data.train.images, data.train.texts, batch, est,
                                  step_cfg, cfg.augment, augment_stream);
            loss = r.report.losses.total;
            breakdown = std::move(r.report.losses);
            grad = std::move(r.report.gradient);
            est = std::move(r.state);
            break;
          }
        }
      } catch (const NumericAbort& e) {
        detail::dump_nan(out_dir, opts.write_files, step, epoch + 1, indices, e.what());
      } catch (const DegenerateEmbeddingError& e) {
        detail::dump_nan(out_dir, opts.write_files, step, epoch + 1, indices, e.what());
      }
      if (!std::isfinite(loss)) {
        detail::dump_nan(out_dir, opts.write_files, step, epoch + 1, indices, "non-finite loss");
      }
      if (!all_finite(grad)) {
        detail::dump_nan(out_dir, opts.write_files, step, epoch + 1, indices,
                         "non-finite gradient");
      }
      optimizer_step(opt, flat, grad);
      params = unflatten(cfg.arch, flat);

      const LossLogEntry entry{step, epoch + 1, loss};
      art.loss_log.push_back(entry);
      writer.loss(entry);
      writer.breakdown(entry, breakdown);

      const bool stop_here = opts.stop_after_step && step == *opts.stop_after_step;
      if (opts.write_files &&
          ((cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) || stop_here)) {
        const auto path = out_dir / ("checkpoint_step" + std::to_string(step) + ".bin");
        save_checkpoint(make_checkpoint(step), path);
        art.checkpoint = path;
      }
      if (stop_here) {
        writer.flush();
        art.params = params;
        return art;
      }
    }
    RunInfo info = run;
    info.epoch = epoch + 1;
    for (auto& rec : evaluate(params, data, info)) {
      writer.metric(rec);
      art.metrics.push_back(std::move(rec));
    }
  }
  writer.flush();
  if (step != total_steps) throw Error("train: step count mismatch");
  if (opts.write_files) {
    std::ofstream(out_dir / "config.txt") << art.config_snapshot;
    const auto path = out_dir / "checkpoint.bin";
    save_checkpoint(make_checkpoint(step), path);
    art.checkpoint = path;
  }
  art.params = params;
  art.completed = true;
  return art;
}

// Re-evaluates a saved checkpoint on the held-out split of its own config.
inline std::vector<MetricsRecord> evaluate_checkpoint(const std::filesystem::path& path) {
  const Checkpoint ck = load_checkpoint(path);
  const ExperimentConfig cfg = parse_config(ck.config_snapshot);
  const PreparedData data = prepare_data(cfg);
  const std::size_t per_epoch = steps_per_epoch(data.train.size(), cfg.batch_size);
  const RunInfo info{std::string(to_string(cfg.variant)), std::string(to_string(cfg.optimizer)),
                     cfg.seed, static_cast<std::size_t>(ck.step / per_epoch)};
  return evaluate(ck.params, data, info);
}

}  // namespace gclr
