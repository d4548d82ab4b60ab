#include <gtest/gtest.h>

#include "gclr/experiment/checkpoint.hpp"
#include "test_util.hpp"

using namespace gclr;

namespace {

Checkpoint sample_checkpoint() {
  Architecture arch;
  arch.d_img = 7;
  arch.d_txt = 5;
  arch.hidden = 6;
  arch.embed_dim = 4;
  Checkpoint ck;
  ck.config_snapshot = "seed = 3\nvariant = amclr\n";
  ck.step = 42;
  ck.params = init_encoders(arch, 3);
  const std::size_t n = arch.parameter_count();
  ck.optimizer = OptimizerState::make(OptimizerRule::adamp, OptimizerHyper{}, n,
                                      parameter_groups(arch));
  Rng rng(4);
  for (std::size_t k = 0; k < n; ++k) {
    ck.optimizer.first[k] = rng.normal();
    ck.optimizer.second[k] = rng.uniform();
  }
  ck.optimizer.step = 41;
  ck.estimator = EstimatorState::make(20, 0.7);
  for (std::size_t i = 0; i < 20; i += 3) {
    ck.estimator.u_image[i] = 1.0 + rng.uniform();
    ck.estimator.u_text[i] = 2.0 + rng.uniform();
  }
  ck.estimator.step = 42;
  ck.rng = Rng(99).split(5).state();
  return ck;
}

}  // namespace

TEST(Checkpoint, BytesRoundTrip) {
  const Checkpoint ck = sample_checkpoint();
  const Checkpoint back = deserialize_checkpoint(serialize(ck));
  EXPECT_EQ(back, ck);
  EXPECT_EQ(back.optimizer.groups.size(), ck.optimizer.groups.size());
  EXPECT_EQ(serialize(back), serialize(ck));
}

TEST(Checkpoint, FileRoundTrip) {
  const auto dir = gclr::testing::scratch_dir("checkpoint");
  const Checkpoint ck = sample_checkpoint();
  save_checkpoint(ck, dir / "c.bin");
  EXPECT_EQ(load_checkpoint(dir / "c.bin"), ck);
}

TEST(Checkpoint, EveryPayloadByteIsProtected) {
  const auto bytes = serialize(sample_checkpoint());
  for (std::size_t k = 8; k < bytes.size(); k += 37) {
    auto bad = bytes;
    bad[k] ^= 0x10;
    EXPECT_THROW(deserialize_checkpoint(bad), Error) << "byte " << k;
  }
}

TEST(Checkpoint, TruncationAndWrongMagic) {
  const auto bytes = serialize(sample_checkpoint());
  EXPECT_THROW(deserialize_checkpoint(std::span(bytes).first(bytes.size() - 5)), Error);
  auto wrong = bytes;
  wrong[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(wrong), FormatError);
  Architecture arch;
  const auto dir = gclr::testing::scratch_dir("checkpoint_magic");
  save_params(init_encoders(arch, 1), dir / "p.bin");
  EXPECT_THROW(load_checkpoint(dir / "p.bin"), FormatError);
}
