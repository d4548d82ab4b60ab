#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "gclr/evaluation.hpp"
#include "gclr/experiment/config.hpp"
#include "gclr/synthetic_data.hpp"
#include "test_util.hpp"

#ifndef GCLR_CLI_PATH
#error "GCLR_CLI_PATH must point at the gclr executable"
#endif

using gclr::testing::read_lines;
using gclr::testing::scratch_dir;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result run(const std::string& args) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() / "gclr_cli_io";
  std::filesystem::create_directories(dir);
  const auto out = dir / ("out" + std::to_string(counter) + ".txt");
  const auto err = dir / ("err" + std::to_string(counter++) + ".txt");
  const std::string cmd = std::string("'") + GCLR_CLI_PATH + "' " + args + " >'" + out.string() +
                          "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

const char* kSmall =
    "--set n=200 --set class_count=10 --set latent_dim=6 --set d_img=16 --set d_txt=12 "
    "--set hidden=16 --set embed_dim=8 --set batch_size=32 --set epochs=2";

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("train --no-such-flag").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("--config /nonexistent/file.cfg train").code, 2);
}

TEST(Cli, ConfigErrorsExitTwo) {
  const auto r = run("--set bogus=1 train");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bogus"), std::string::npos) << r.err;
  EXPECT_EQ(run("--set batch_size=1 train").code, 2);
  EXPECT_EQ(run("--set noequals train").code, 2);

  const auto dir = scratch_dir("cli_cfg");
  std::ofstream(dir / "bad.cfg") << "seed = 1\nseed = 2\n";
  const auto dup = run("--config " + (dir / "bad.cfg").string() + " train");
  EXPECT_EQ(dup.code, 2);
  EXPECT_NE(dup.err.find("line 2"), std::string::npos) << dup.err;
}

TEST(Cli, TrainEvalRoundTrip) {
  const auto dir = scratch_dir("cli_train");
  const auto t = run(std::string(kSmall) + " --out " + dir.string() + " --seed 4 train");
  ASSERT_EQ(t.code, 0) << t.err;
  const auto lines = read_lines(dir / "metrics.csv");
  ASSERT_EQ(lines.size(), 7u);
  // stdout carries the final epoch's rows
  std::istringstream out(t.out);
  std::vector<std::string> printed;
  for (std::string l; std::getline(out, l);) printed.push_back(l);
  ASSERT_EQ(printed.size(), 4u);
  EXPECT_EQ(printed[0], gclr::kMetricsCsvHeader);
  EXPECT_EQ(printed[1], lines[4]);
  EXPECT_EQ(printed[1].substr(0, 13), "amclr,adamw,r");

  const auto e = run("eval --checkpoint " + (dir / "checkpoint.bin").string());
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_EQ(e.out, t.out);
  EXPECT_EQ(run("--out " + dir.string() + " eval").out, t.out);
}

TEST(Cli, StopAndResume) {
  const auto a = scratch_dir("cli_full");
  const auto b = scratch_dir("cli_part");
  ASSERT_EQ(run(std::string(kSmall) + " --out " + a.string() + " train").code, 0);
  const auto stop = run(std::string(kSmall) + " --out " + b.string() + " train --stop-after 6");
  ASSERT_EQ(stop.code, 0) << stop.err;
  EXPECT_NE(stop.out.find("stopped after step 6"), std::string::npos);
  const auto resume = run(std::string(kSmall) + " --out " + b.string() + " train --resume " +
                          (b / "checkpoint_step6.bin").string());
  ASSERT_EQ(resume.code, 0) << resume.err;
  EXPECT_EQ(read_lines(a / "loss_log.csv"), read_lines(b / "loss_log.csv"));
  EXPECT_EQ(read_lines(a / "metrics.csv"), read_lines(b / "metrics.csv"));
}

TEST(Cli, GenerateDataThenTrainOnFile) {
  const auto dir = scratch_dir("cli_data");
  const auto g = run(std::string(kSmall) + " --out " + dir.string() + " generate-data");
  ASSERT_EQ(g.code, 0) << g.err;
  ASSERT_TRUE(std::filesystem::exists(dir / "dataset.gcld"));
  const auto t = run(std::string(kSmall) + " --set dataset=" + (dir / "dataset.gcld").string() +
                     " --out " + (dir / "run").string() + " --set variant=sogclr train");
  ASSERT_EQ(t.code, 0) << t.err;
  const auto t2 = run(std::string(kSmall) + " --out " + (dir / "run2").string() +
                      " --set variant=sogclr train");
  EXPECT_EQ(t.out, t2.out);  // file and in-memory generation agree
}

TEST(Cli, NumericAbortExitsThree) {
  const auto dir = scratch_dir("cli_nan");
  auto cfg = gclr::parse_config(
      "n = 200\nclass_count = 10\nlatent_dim = 6\nd_img = 16\nd_txt = 12\n");
  auto ds = gclr::generate(cfg.data);
  for (std::size_t i = 0; i < ds.size(); ++i)
    ds.texts(i, 0) = std::numeric_limits<double>::infinity();
  gclr::save(ds, dir / "bad.gcld");
  const auto r = run(std::string(kSmall) + " --set dataset=" + (dir / "bad.gcld").string() +
                     " --out " + dir.string() + " train");
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "nan_dump.txt"));
}

TEST(Cli, Gradcheck) {
  const auto r = run("gradcheck --probes 50");
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* v : {"clip", "infonce", "sogclr", "amclr", "xamclr"})
    EXPECT_NE(r.out.find(std::string("\n") + v + " omega="), std::string::npos) << v;
  EXPECT_NE(r.out.find("probes=50"), std::string::npos);
}

TEST(Cli, OracleCompare) {
  const auto r = run("--set n=128 --set batch_size=32 --set class_count=10 oracle-compare");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("n=128"), std::string::npos);
  EXPECT_NE(r.out.find("batch_size=32 batches=4"), std::string::npos);
  EXPECT_NE(r.out.find("estimator_rel_err="), std::string::npos);
  // default dataset is too large for the exact oracle
  EXPECT_EQ(run("oracle-compare").code, 1);
}

TEST(Cli, Sweep) {
  const auto dir = scratch_dir("cli_sweep");
  const auto r = run(std::string(kSmall) + " --out " + dir.string() +
                     " sweep --variants sogclr,amclr --optimizers adamw --seeds 0,1");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_lines(dir / "sweep.csv").size(), 1 + 12u);
  EXPECT_NE(r.out.find("optimizer=adamw paired_seeds=2"), std::string::npos) << r.out;
  EXPECT_EQ(run("sweep --variants nope").code, 2);
}
