#include "kerbs/config.hpp"
#include "kerbs/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

namespace kerbs {
namespace {

TEST(TrainConfig, Defaults) {
  const TrainConfig c;
  EXPECT_EQ(c.head, HeadKind::kKerbs);
  EXPECT_EQ(c.sense_ratio, 3.0);
  EXPECT_EQ(c.q, 500);
  EXPECT_NEAR(c.epsilon, std::log(0.01), 1e-15);
  EXPECT_EQ(c.beta, 0.01);
  EXPECT_EQ(c.min_senses, 1);
  EXPECT_EQ(c.max_senses, 4);
  EXPECT_EQ(c.lr, 5e-4);
  EXPECT_EQ(c.decay_rate, 0.5);
  EXPECT_EQ(c.batch_size, 32);
  EXPECT_EQ(c.patience, 3);
  EXPECT_EQ(c.dim, 32);
  EXPECT_EQ(c.hidden, 64);
  EXPECT_EQ(c.resolved_senses(2000), 6000);
}

TEST(TrainConfig, BaselineUsesOneSensePerWord) {
  TrainConfig c;
  c.head = HeadKind::kBaseline;
  c.total_senses = 123;
  EXPECT_EQ(c.resolved_senses(50), 50);
}

TEST(TrainConfig, ValidateRejectsInfeasibleSettings) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate(100));
  c.total_senses = 401;
  EXPECT_THROW(c.validate(100), ConfigError);
  c.total_senses = 99;
  EXPECT_THROW(c.validate(100), ConfigError);
  c = TrainConfig{};
  c.beta = 1.0;
  EXPECT_THROW(c.validate(100), ConfigError);
  c = TrainConfig{};
  c.q = 0;
  EXPECT_THROW(c.validate(100), ConfigError);
  c = TrainConfig{};
  c.max_senses = 0;
  EXPECT_THROW(c.validate(100), ConfigError);
}

TEST(TrainConfig, SetParsesEveryKeyAndRejectsUnknown) {
  TrainConfig c;
  c.set("head", "baseline");
  c.set("q", "20");
  c.set("epsilon", "-inf");
  c.set("lr", "0.003");
  c.set("seed", "18446744073709551615");
  EXPECT_EQ(c.head, HeadKind::kBaseline);
  EXPECT_EQ(c.q, 20);
  EXPECT_TRUE(std::isinf(c.epsilon) && c.epsilon < 0);
  EXPECT_EQ(c.lr, 0.003);
  EXPECT_EQ(c.seed, 18446744073709551615ULL);
  EXPECT_THROW(c.set("learning_rate", "1"), ConfigError);
  EXPECT_THROW(c.set("q", "2.5"), ConfigError);
  EXPECT_THROW(c.set("lr", "fast"), ConfigError);
  EXPECT_THROW(c.set("head", "mos"), ConfigError);
}

TEST(TrainConfig, TextRoundTrip) {
  TrainConfig c;
  c.head = HeadKind::kBaseline;
  c.epsilon = -std::numeric_limits<double>::infinity();
  c.lr = 0.1 + 0.2;
  c.total_senses = 77;
  c.seed = 42;
  const TrainConfig back = config_from_text(c.to_text());
  EXPECT_EQ(back.to_text(), c.to_text());
  EXPECT_EQ(back.lr, c.lr);
  EXPECT_EQ(back.epsilon, c.epsilon);
}

TEST(ParseKeyValues, SkipsCommentsAndBlankLines) {
  const auto kv = parse_key_values("# comment\n\n  q = 7 \nlr=0.5\r\n");
  ASSERT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv[0].first, "q");
  EXPECT_EQ(kv[0].second, "7");
  EXPECT_EQ(kv[1].second, "0.5");
  EXPECT_THROW(parse_key_values("novalue\n"), ConfigError);
  EXPECT_THROW(parse_key_values("=3\n"), ConfigError);
}

TEST(LoadConfig, OverridesBaseAndReportsMissingFile) {
  const auto path = std::filesystem::temp_directory_path() / "kerbs_config_test.cfg";
  {
    std::ofstream out(path);
    out << "max_epochs=2\nbatch_size=4\n";
  }
  TrainConfig base;
  base.q = 9;
  const TrainConfig c = load_config(path.string(), base);
  EXPECT_EQ(c.max_epochs, 2);
  EXPECT_EQ(c.batch_size, 4);
  EXPECT_EQ(c.q, 9);
  std::filesystem::remove(path);
  EXPECT_THROW(load_config(path.string()), IoError);
  EXPECT_THROW(config_from_text("bogus=1\n"), ConfigError);
}

}  // namespace
}  // namespace kerbs
