// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Training criteria use the default benchmark and take a few minutes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include "gclr/estimator.hpp"
#include "gclr/evaluation.hpp"
#include "gclr/experiment/gradcheck.hpp"
#include "gclr/experiment/sweep.hpp"
#include "gclr/experiment/train.hpp"
#include "gclr/objectives.hpp"

using namespace gclr;

namespace {

// Pinned thresholds.
constexpr double kGradTolTanh = 1e-4;
constexpr double kGradTolLinear = 1e-7;
constexpr std::size_t kGradProbes = 200;
constexpr double kGradSeconds = 120.0;
constexpr double kOracleTol = 1e-8;
constexpr double kReductionTol = 1e-12;
constexpr double kDifferenceFormTol = 1e-10;
constexpr double kMovingAverageTol = 1e-12;
constexpr double kEfficacyTop1 = 2.0;  // 10x chance on a 500-sample gallery
constexpr double kRunSeconds = 600.0;
constexpr std::size_t kDirectionalSeeds = 5;

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

Matrix random_unit(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = rng.normal();
  return row_l2_normalize(m);
}

std::vector<MetricsRecord> all_records;

void gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  auto tanh_cfg = default_config();
  auto linear_cfg = default_config();
  linear_cfg.arch.layers = 1;
  const auto tanh_r = gradcheck(tanh_cfg, kGradProbes);
  const auto lin_r = gradcheck(linear_cfg, kGradProbes);
  const double secs = seconds_since(t0);
  bool probes_ok = true;
  for (const auto* r : {&tanh_r, &lin_r})
    for (const auto& v : r->variants) probes_ok = probes_ok && v.probes >= kGradProbes;
  const bool ok = probes_ok && tanh_r.variants.size() == 5 && lin_r.variants.size() == 5 &&
                  tanh_r.max_rel_err() < kGradTolTanh && lin_r.max_rel_err() < kGradTolLinear &&
                  secs < kGradSeconds;
  report(ok, "gradient_correctness",
         "tanh max_rel_err=" + sci(tanh_r.max_rel_err()) + " (<" + sci(kGradTolTanh) +
             "), linear max_rel_err=" + sci(lin_r.max_rel_err()) + " (<" + sci(kGradTolLinear) +
             "), " + std::to_string(kGradProbes) + " coordinates x 5 variants, " + sci(secs) +
             " s");
}

void estimator_oracle() {
  const std::size_t n = 128;
  auto cfg = default_config();
  cfg.data.n = n;
  const auto ds = generate(cfg.data);
  const auto params = init_encoders(cfg.arch, 0);
  const auto step = sogclr_step(params, ds.images, ds.texts, Batch{iota(n), 0},
                                EstimatorState::make(n, 1.0),
                                StepConfig{cfg.tau, Denominator::inclusive});
  const auto exact = global_objective_exact_gradient(params, ds.images, ds.texts, cfg.tau);
  const double err = relative_l2_error(step.report.gradient, exact);
  report(err < kOracleTol, "estimator_oracle_identity",
         "n=128 gamma=1 B=D rel_err=" + sci(err) + " (<" + sci(kOracleTol) + ")");
}

void combination_counting() {
  bool ok = true;
  for (std::size_t omega = 0; omega <= 4; ++omega) {
    const std::size_t v = omega + 1;
    ok = ok && enumerate_combinations(omega, Family::amclr).size() == 2 * v * v;
    ok = ok && enumerate_combinations(omega, Family::xamclr).size() ==
                   2 * v * v + 4 * (v * (v - 1) / 2);
  }
  const std::vector<std::string> expected{"I0->T0", "I0->T1", "I1->T0", "I1->T1",
                                          "T0->I0", "T0->I1", "T1->I0", "T1->I1",
                                          "I0->I1", "I1->I0", "T0->T1", "T1->T0"};
  const auto am = enumerate_combinations(1, Family::amclr);
  const auto xa = enumerate_combinations(1, Family::xamclr);
  ok = ok && am.size() == 8 && xa.size() == 12;
  for (std::size_t k = 0; ok && k < 12; ++k) {
    ok = xa[k].name() == expected[k] && (k >= 8 || am[k].name() == expected[k]);
  }
  report(ok, "combination_counting",
         "kappa(1)=" + std::to_string(kappa(1, Family::amclr)) + "/" +
             std::to_string(kappa(1, Family::xamclr)) +
             ", formulas hold for omega 0..4, omega=1 lists match F1..F12");
}

void reduction_invariants() {
  Rng rng(11);
  const std::size_t m = 16, d = 8;
  const double tau = kDefaultTemperature;
  const Matrix x = random_unit(m, d, rng), xh = random_unit(m, d, rng);
  const Matrix t = random_unit(m, d, rng), th = random_unit(m, d, rng);

  // AmCLR at omega = 0 against SogCLR's two directions written out directly
  const auto a0 = amclr_batch_loss({{x}, {t}}, tau);
  double direct = 0.0;
  for (const auto& [a, c] : {std::pair{&x, &t}, std::pair{&t, &x}}) {
    const Matrix s = matmul_nt(*a, *c);
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> row;
      for (std::size_t j = 0; j < m; ++j)
        if (j != i) row.push_back(s(i, j) / tau);
      acc += s(i, i) / tau - logsumexp(row);
    }
    direct += -(tau / m) * acc;
  }
  const double e_omega0 = std::abs(a0.total - direct);

  // parameter-space: SogCLR step and AmCLR step without augmentation
  auto cfg = default_config();
  cfg.data.n = 64;
  const auto ds = generate(cfg.data);
  const auto params = init_encoders(cfg.arch, 1);
  const auto st = EstimatorState::make(64);
  const auto s_step = sogclr_step(params, ds.images, ds.texts, Batch{iota(32), 0}, st, {});
  const auto a_step = amclr_step(params, ds.images, ds.texts, Batch{iota(32), 0}, st, {},
                                 AugmentPlan{}, Rng(2));
  const double e_step = relative_l2_error(s_step.report.gradient, a_step.report.gradient);

  const auto am = amclr_batch_loss({{x, xh}, {t, th}}, tau);
  const auto xa = xamclr_batch_loss({{x, xh}, {t, th}}, tau);
  double e_contain = 0.0;
  for (std::size_t k = 0; k < 8; ++k)
    e_contain = std::max(e_contain, std::abs(am.per_combination[k].value -
                                             xa.per_combination[k].value));

  const auto id = amclr_batch_loss({{x, x}, {t, t}}, tau);
  const auto& f = id.per_combination;
  double e_collapse = 0.0;
  for (std::size_t k : {1u, 2u, 3u})
    e_collapse = std::max(e_collapse, std::abs(f[k].value - f[0].value));
  for (std::size_t k : {5u, 6u, 7u})
    e_collapse = std::max(e_collapse, std::abs(f[k].value - f[4].value));

  const double worst = std::max({e_omega0, e_step, e_contain, e_collapse});
  report(worst < kReductionTol, "reduction_invariants",
         "amclr(omega=0) vs sogclr " + sci(e_omega0) + ", step gradients " + sci(e_step) +
             ", xamclr F1..F8 vs amclr " + sci(e_contain) + ", identity collapse " +
             sci(e_collapse) + " (<" + sci(kReductionTol) + ")");
}

void difference_form() {
  Rng rng(21);
  const double tau = kDefaultTemperature;
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m = 8 + 4 * static_cast<std::size_t>(trial);
    const Matrix ei = random_unit(m, 6, rng);
    const Matrix et = random_unit(m, 6, rng);
    const Matrix s = matmul_nt(ei, et);
    double rows = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> r(m), c(m);
      for (std::size_t j = 0; j < m; ++j) {
        r[j] = s(i, j) / tau;
        c[j] = s(j, i) / tau;
      }
      rows += -std::log(std::exp(r[i] - logsumexp(r))) - std::log(std::exp(c[i] - logsumexp(c)));
    }
    worst = std::max(worst, std::abs(clip_batch_loss(ei, et, tau) - rows / m));
  }
  report(worst < kDifferenceFormTol, "difference_form_identity",
         "10 random batches, max |clip - per-row InfoNCE| = " + sci(worst) + " (<" +
             sci(kDifferenceFormTol) + ")");
}

void moving_average_law() {
  const double gamma = 0.3, u0 = 5.0, g = 0.8;
  auto s = EstimatorState::make(1, gamma);
  s = update_u(s, iota(1), std::vector<double>{u0}, std::vector<double>{u0});
  double worst = 0.0;
  for (int t = 1; t <= 50; ++t) {
    s = update_u(s, iota(1), std::vector<double>{g}, std::vector<double>{g});
    const double expect = std::pow(1.0 - gamma, t) * std::abs(u0 - g);
    worst = std::max(worst, std::abs(std::abs(s.u_image[0] - g) - expect));
  }
  report(worst < kMovingAverageTol, "moving_average_law",
         "50 steps, gamma=0.3, max deviation " + sci(worst) + " (<" + sci(kMovingAverageTol) + ")");
}

const MetricsRecord& final_record(const RunArtifacts& art, Task task) {
  for (auto it = art.metrics.rbegin(); it != art.metrics.rend(); ++it)
    if (it->task == task) return *it;
  throw Error("no record for task");
}

void training_efficacy(const std::filesystem::path& root) {
  bool ok = true;
  std::string detail;
  for (Variant v : {Variant::clip, Variant::infonce, Variant::sogclr, Variant::amclr,
                    Variant::xamclr}) {
    const auto cfg = parse_config("", {{"variant", std::string(to_string(v))},
                                       {"out_dir", (root / to_string(v)).string()}});
    const auto t0 = std::chrono::steady_clock::now();
    RunArtifacts art;
    try {
      art = train(cfg);
    } catch (const Error& e) {
      ok = false;
      detail += std::string(to_string(v)) + " failed (" + e.what() + "); ";
      continue;
    }
    const double secs = seconds_since(t0);
    all_records.insert(all_records.end(), art.metrics.begin(), art.metrics.end());
    const double text = final_record(art, Task::retrieval_text).top1;
    const double image = final_record(art, Task::retrieval_image).top1;
    ok = ok && text >= kEfficacyTop1 && image >= kEfficacyTop1 && secs < kRunSeconds;
    detail += std::string(to_string(v)) + " text/image top1=" + fixed4(text) + "/" +
              fixed4(image) + " in " + sci(secs) + " s; ";
  }
  report(ok, "training_efficacy", detail + "threshold " + fixed4(kEfficacyTop1) + "%");
}

void directional(const std::filesystem::path& root) {
  std::vector<std::uint64_t> seeds(kDirectionalSeeds);
  std::iota(seeds.begin(), seeds.end(), 0);
  const auto base = parse_config("", {{"out_dir", (root / "sweep").string()}});
  const auto r = sweep(base, {{Variant::sogclr, Variant::amclr}, {OptimizerRule::adamw}, seeds});
  all_records.insert(all_records.end(), r.rows.begin(), r.rows.end());
  bool ok = r.failures.empty() && r.directional.size() == 1 &&
            r.directional[0].paired_seeds >= kDirectionalSeeds;
  std::string detail = "no comparison";
  if (!r.directional.empty()) {
    const auto& c = r.directional[0];
    ok = ok && c.within_margin();
    detail = "paired_seeds=" + std::to_string(c.paired_seeds) + " amclr=" + fixed4(c.amclr_mean) +
             " sogclr=" + fixed4(c.sogclr_mean) + " diff=" + fixed4(c.difference()) +
             " (>= -" + fixed4(DirectionalComparison::kSoftMargin) + "), amclr ahead: " +
             (c.ordering_reproduced() ? "yes" : "no");
  }
  report(ok, "directional_comparison", detail);
}

void determinism_and_resume(const std::filesystem::path& root) {
  auto cfg_for = [&](const char* name) {
    return parse_config("", {{"variant", "xamclr"}, {"epochs", "3"},
                             {"out_dir", (root / name).string()}});
  };
  const auto a = train(cfg_for("det_a"));
  const auto b = train(cfg_for("det_b"));
  const auto la = io::read_file(root / "det_a" / "loss_log.csv");
  const auto lb = io::read_file(root / "det_b" / "loss_log.csv");
  const bool identical = la == lb && a.params == b.params;

  TrainOptions stop;
  stop.stop_after_step = 23;  // inside the second epoch
  const auto head = train(cfg_for("det_c"), stop);
  TrainOptions resume;
  resume.resume_from = *head.checkpoint;
  const auto tail = train(cfg_for("det_c"), resume);
  const std::vector<LossLogEntry> expect(a.loss_log.begin() + 23, a.loss_log.end());
  const bool resumed = tail.loss_log == expect && tail.params == a.params &&
                       io::read_file(root / "det_c" / "loss_log.csv") == la;
  report(identical && resumed, "determinism_and_resume",
         std::string("repeat run byte-identical: ") + (identical ? "yes" : "no") +
             ", resume after step 23 bit-exact: " + (resumed ? "yes" : "no"));
}

void metric_sanity() {
  std::size_t bad = 0;
  for (const auto& r : all_records) {
    if (!r.monotone()) ++bad;
    if (r.mean && std::abs(*r.mean - table_mean(r.top1, r.top5, r.top10)) > 1e-12) ++bad;
  }
  const double spot = table_mean(13.1, 33.36, 45.1);
  const bool ok = bad == 0 && !all_records.empty() && std::abs(spot - 30.52) < 1e-12;
  report(ok, "metric_sanity",
         std::to_string(all_records.size()) + " records checked, " + std::to_string(bad) +
             " violations, mean(13.1, 33.36, 45.1) = " + fixed4(spot));
}

}  // namespace

int main() {
  const auto root = std::filesystem::temp_directory_path() / "gclr_acceptance";
  std::filesystem::remove_all(root);
  std::filesystem::create_directories(root);
  try {
    gradient_correctness();
    estimator_oracle();
    combination_counting();
    reduction_invariants();
    difference_form();
    moving_average_law();
    training_efficacy(root);
    directional(root);
    determinism_and_resume(root);
    metric_sanity();
  } catch (const std::exception& e) {
    std::cout << "FAIL acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
