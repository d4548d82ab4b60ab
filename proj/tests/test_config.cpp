#include <gtest/gtest.h>

#include <string>

#include "gclr/experiment/config.hpp"
#include "test_util.hpp"

using namespace gclr;

namespace {

std::string error_of(std::string_view text, const ConfigOverrides& o = {}) {
  try {
    parse_config(text, o);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, EmptyTextGivesDefaults) { EXPECT_EQ(parse_config(""), default_config()); }

TEST(Config, SerializeParseRoundTrip) {
  ExperimentConfig c = default_config();
  c.variant = Variant::xamclr;
  c.optimizer = OptimizerRule::adamp;
  c.tau = 0.07;
  c.gamma = 0.8;
  c.augment.omega = 2;
  c.augment.image_specs = {AugmentSpec::dropout(0.3)};
  c.batch_size = 64;
  c.seed = 17;
  c.denominator = Denominator::inclusive;
  c.out_dir = "runs/x";
  c.data.n = 900;
  c.data.sigma = 0.123456789012345;
  c.arch.layers = 1;
  c.arch.normalize = false;
  c.opt.lr = 3.3e-4;
  c.checkpoint_every = 7;
  c.resolve();
  const ExperimentConfig back = parse_config(serialize_config(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize_config(back), serialize_config(c));
  EXPECT_EQ(parse_config(serialize_config(default_config())), default_config());
}

TEST(Config, CommentsAndBlankLines) {
  const auto c = parse_config("# header\n\n  tau = 0.2   # inline\nseed=4\n");
  EXPECT_EQ(c.tau, 0.2);
  EXPECT_EQ(c.seed, 4u);
}

TEST(Config, UnknownKeyNamesLine) {
  const auto msg = error_of("tau = 0.1\nbogus = 3\n");
  EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("bogus"), std::string::npos) << msg;
}

TEST(Config, DuplicateKeyNamesLine) {
  const auto msg = error_of("seed = 1\n\nseed = 2\n");
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("duplicate"), std::string::npos) << msg;
}

TEST(Config, MalformedValues) {
  EXPECT_FALSE(error_of("tau\n").empty());
  EXPECT_FALSE(error_of("batch_size = twelve\n").empty());
  EXPECT_FALSE(error_of("batch_size = 12x\n").empty());
  EXPECT_FALSE(error_of("variant = simclr\n").empty());
  EXPECT_FALSE(error_of("optimizer = sgd\n").empty());
  EXPECT_FALSE(error_of("denominator = both\n").empty());
  EXPECT_FALSE(error_of("normalize = yes\n").empty());
}

TEST(Config, RangeChecks) {
  EXPECT_FALSE(error_of("batch_size = 1\n").empty());
  EXPECT_FALSE(error_of("epochs = 0\n").empty());
  EXPECT_FALSE(error_of("tau = 0\n").empty());
  EXPECT_FALSE(error_of("gamma = 0\n").empty());
  EXPECT_FALSE(error_of("gamma = 1.01\n").empty());
  EXPECT_FALSE(error_of("eval_fraction = 1\n").empty());
  EXPECT_FALSE(error_of("lr = -1\n").empty());
  EXPECT_NE(error_of("class_count = 9\n").find("class_count"), std::string::npos);
  EXPECT_TRUE(error_of("class_count = 10\n").empty());
  EXPECT_TRUE(error_of("batch_size = 2\nomega = 0\n").empty());
}

TEST(Config, SingleViewVariantsForceOmegaZero) {
  for (const char* v : {"clip", "infonce", "sogclr"}) {
    const auto c = parse_config(std::string("variant = ") + v + "\nomega = 3\n");
    EXPECT_EQ(c.augment.omega, 0u) << v;
  }
  EXPECT_EQ(parse_config("variant = amclr\nomega = 3\n").augment.omega, 3u);
}

TEST(Config, OverridesReplaceFileValues) {
  const auto c = parse_config("seed = 1\nlr = 0.5\n", {{"seed", "9"}, {"epochs", "2"}});
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.epochs, 2u);
  EXPECT_EQ(c.opt.lr, 0.5);
  EXPECT_THROW(parse_config("", {{"nope", "1"}}), ConfigError);
}

TEST(Config, ArchitectureMirrorsData) {
  const auto c = parse_config("d_img = 40\nd_txt = 30\n");
  EXPECT_EQ(c.arch.d_img, 40u);
  EXPECT_EQ(c.arch.d_txt, 30u);
}

TEST(Config, AugmentLimitTiedToBatchSize) {
  // at most batch_size / 8 augmentations
  EXPECT_TRUE(error_of("batch_size = 16\nomega = 2\n").empty());
  EXPECT_FALSE(error_of("batch_size = 15\nomega = 2\n").empty());
}

TEST(Config, LoadFromFile) {
  const auto dir = gclr::testing::scratch_dir("config");
  const auto path = dir / "run.cfg";
  io::write_file(path, std::vector<std::uint8_t>{'s', 'e', 'e', 'd', '=', '5', '\n'});
  EXPECT_EQ(load_config(path).seed, 5u);
  EXPECT_THROW(load_config(dir / "missing.cfg"), Error);
}
