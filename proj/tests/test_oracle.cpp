#include <gtest/gtest.h>

#include "gclr/experiment/oracle.hpp"

using namespace gclr;

namespace {

ExperimentConfig oracle_config(std::size_t n) {
  return parse_config("variant = sogclr\nn = " + std::to_string(n) +
                      "\nbatch_size = 64\nclass_count = 16\n");
}

}  // namespace

TEST(Oracle, FullBatchAverageEqualsGlobalObjective) {
  const auto r = oracle_compare(oracle_config(256));
  EXPECT_EQ(r.n, 256u);
  ASSERT_EQ(r.averages.size(), 2u);
  EXPECT_EQ(r.averages[0].batch_size, 256u);
  EXPECT_EQ(r.averages[0].batches, 1u);
  EXPECT_LT(r.averages[0].rel_diff, 1e-12);
  EXPECT_EQ(r.averages[1].batches, 4u);
  EXPECT_EQ(r.averages[1].exact, r.averages[0].exact);
}

TEST(Oracle, SmallBatchesAreBiasedBelowGlobal) {
  // a smaller denominator makes each log-sum-exp smaller
  const auto r = oracle_compare(oracle_config(256));
  EXPECT_LT(r.averages[1].batch_average, r.averages[1].exact);
  EXPECT_GT(r.averages[1].rel_diff, 1e-3);
}

TEST(Oracle, EstimatorMatchesExactGradient) {
  EXPECT_LT(oracle_compare(oracle_config(256)).estimator_rel_err, 1e-8);
  EXPECT_LT(oracle_compare(oracle_config(100)).estimator_rel_err, 1e-8);
}

TEST(Oracle, ScaleGuard) {
  EXPECT_THROW(oracle_compare(oracle_config(kOracleCompareMaxSamples + 1)), OracleScaleError);
  EXPECT_NO_THROW(oracle_compare(oracle_config(kOracleCompareMaxSamples)));
}
