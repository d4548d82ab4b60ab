// gclr: data generation, training, evaluation and checks for the global
// contrastive objectives. Exit codes: 0 ok, 1 other failure, 2 config error,
// 3 numeric abort.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gclr/experiment/checkpoint.hpp"
#include "gclr/experiment/config.hpp"
#include "gclr/experiment/gradcheck.hpp"
#include "gclr/experiment/oracle.hpp"
#include "gclr/experiment/sweep.hpp"
#include "gclr/experiment/train.hpp"

namespace {

using namespace gclr;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> set;
};

ExperimentConfig load(const Globals& g) {
  ConfigOverrides overrides;
  for (const auto& kv : g.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    overrides.emplace_back(config_detail::trim(kv.substr(0, eq)),
                           config_detail::trim(kv.substr(eq + 1)));
  }
  if (g.seed) overrides.emplace_back("seed", std::to_string(*g.seed));
  if (g.out) overrides.emplace_back("out_dir", *g.out);
  const std::string text = g.config_path.empty() ? std::string() : read_text(g.config_path);
  return parse_config(text, overrides);
}

void print_metrics(const std::vector<MetricsRecord>& records) {
  std::cout << kMetricsCsvHeader << "\n";
  for (const auto& r : records) std::cout << to_csv_row(r) << "\n";
}

template <typename E>
std::vector<E> parse_list(const std::vector<std::string>& names, E (*parse)(std::string_view)) {
  std::vector<E> out;
  for (const auto& n : names) out.push_back(parse(n));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"global bimodal contrastive learning experiments"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "run seed (overrides config)");
  app.add_option("--out", g.out, "output directory (overrides config)");
  app.add_option("--set", g.set, "config override key=value (repeatable)");

  auto* gen = app.add_subcommand("generate-data", "write the synthetic dataset");
  std::string dataset_out;
  gen->add_option("--output", dataset_out, "dataset file (default <out>/dataset.gcld)");

  auto* train_cmd = app.add_subcommand("train", "train one configuration");
  std::string resume;
  std::optional<std::uint64_t> stop_after;
  train_cmd->add_option("--resume", resume, "checkpoint to resume from")->check(CLI::ExistingFile);
  train_cmd->add_option("--stop-after", stop_after, "checkpoint after this global step and exit");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on its held-out split");
  std::string checkpoint;
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint (default <out>/checkpoint.bin)");

  auto* grad_cmd = app.add_subcommand("gradcheck", "backward vs finite differences");
  std::size_t probes = 200;
  grad_cmd->add_option("--probes", probes, "parameter coordinates per variant");

  auto* oracle_cmd = app.add_subcommand("oracle-compare", "mini-batch vs global objective");

  auto* sweep_cmd = app.add_subcommand("sweep", "variant x optimizer x seed grid");
  std::vector<std::string> variants{"sogclr", "amclr"};
  std::vector<std::string> optimizers{"adamw"};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  sweep_cmd->add_option("--variants", variants)->delimiter(',');
  sweep_cmd->add_option("--optimizers", optimizers)->delimiter(',');
  sweep_cmd->add_option("--seeds", seeds)->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      const ExperimentConfig cfg = load(g);
      const std::filesystem::path path =
          dataset_out.empty() ? std::filesystem::path(cfg.out_dir) / "dataset.gcld"
                              : std::filesystem::path(dataset_out);
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
      save(generate(cfg.data), path);
      std::cout << path.string() << "\n";
    } else if (*train_cmd) {
      const ExperimentConfig cfg = load(g);
      TrainOptions opts;
      if (!resume.empty()) opts.resume_from = resume;
      opts.stop_after_step = stop_after;
      const RunArtifacts art = train(cfg, opts);
      if (art.completed) {
        std::vector<MetricsRecord> last;
        for (const auto& r : art.metrics)
          if (r.run.epoch == cfg.epochs) last.push_back(r);
        print_metrics(last);
      } else {
        std::cout << "stopped after step " << *stop_after << "; checkpoint "
                  << art.checkpoint->string() << "\n";
      }
    } else if (*eval_cmd) {
      std::filesystem::path path = checkpoint;
      if (path.empty()) path = std::filesystem::path(load(g).out_dir) / "checkpoint.bin";
      print_metrics(evaluate_checkpoint(path));
    } else if (*grad_cmd) {
      const GradcheckReport r = gradcheck(load(g), probes);
      std::cout << "layers=" << r.layers << " parameters=" << r.parameter_count
                << " seconds=" << format_double(r.seconds) << "\n";
      for (const auto& v : r.variants) {
        std::cout << to_string(v.variant) << " omega=" << v.omega << " probes=" << v.probes
                  << " max_rel_err=" << format_double(v.max_rel_err)
                  << " worst_index=" << v.worst.index
                  << " analytic=" << format_double(v.worst.analytic)
                  << " numeric=" << format_double(v.worst.numeric) << "\n";
      }
    } else if (*oracle_cmd) {
      const OracleReport r = oracle_compare(load(g));
      std::cout << "n=" << r.n << "\n";
      for (const auto& a : r.averages) {
        std::cout << "batch_size=" << a.batch_size << " batches=" << a.batches
                  << " batch_average=" << format_double(a.batch_average)
                  << " exact=" << format_double(a.exact)
                  << " rel_diff=" << format_double(a.rel_diff) << "\n";
      }
      std::cout << "estimator_rel_err=" << format_double(r.estimator_rel_err) << "\n";
    } else if (*sweep_cmd) {
      const SweepAxes axes{parse_list(variants, &config_detail::parse_variant),
                           parse_list(optimizers, &config_detail::parse_optimizer), seeds};
      const SweepResult r = sweep(load(g), axes);
      std::cout << kSweepSummaryHeader << "\n";
      for (const auto& s : r.summary) std::cout << summary_row(s) << "\n";
      std::cout << directional_report(r.directional);
      for (const auto& f : r.failures) {
        std::cerr << "failed cell " << to_string(f.variant) << "/" << to_string(f.optimizer)
                  << "/seed" << f.seed << ": " << f.error << "\n";
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericAbort& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
