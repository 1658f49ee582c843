#include "kerbs/errors.hpp"
#include "kerbs/lemmas.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

namespace kerbs {
namespace {

Vector axis(int dim, int k) {
  Vector v = Vector::Zero(dim);
  v(k) = 1.0;
  return v;
}

ClusterSpec two_axes(double spread, int count) {
  ClusterSpec spec;
  spec.dim = 6;
  spec.clusters = {{axis(6, 0), spread, count, 0}, {axis(6, 1), spread, count, 1}};
  return spec;
}

TEST(SynthClusters, ZeroSpreadReproducesMeans) {
  const ClusterData d = synth_clusters(two_axes(0.0, 20), 1);
  ASSERT_EQ(d.contexts.rows(), 40);
  for (Eigen::Index i = 0; i < d.contexts.rows(); ++i) {
    const int k = d.cluster[i];
    EXPECT_NEAR((d.contexts.row(i).transpose() - axis(6, k)).norm(), 0.0, 1e-15);
    EXPECT_EQ(d.targets[i], k);
  }
}

TEST(SynthClusters, RowsAreUnitAndAnglesFollowSpread) {
  const double spread = 0.2;
  const int n = 4000;
  const ClusterData d = synth_clusters(two_axes(spread, n), 2);
  double sq = 0.0, cross = 0.0;
  for (Eigen::Index i = 0; i < d.contexts.rows(); ++i) {
    EXPECT_NEAR(d.contexts.row(i).norm(), 1.0, 1e-12);
    const int k = d.cluster[i];
    const double angle = std::acos(std::clamp(d.contexts(i, k), -1.0, 1.0));
    sq += angle * angle;
    if (k == 0) cross += d.contexts(i, 1);
  }
  EXPECT_NEAR(std::sqrt(sq / (2.0 * n)), spread, 0.01);
  // The component along the other (orthogonal) mean averages to zero.
  EXPECT_NEAR(cross / n, 0.0, 3.0 * spread / std::sqrt(static_cast<double>(n)));
}

TEST(SynthClusters, OutliersAndDeterminism) {
  ClusterSpec spec = two_axes(0.1, 100);
  spec.outlier_fraction = 0.1;
  const ClusterData a = synth_clusters(spec, 3);
  const ClusterData b = synth_clusters(spec, 3);
  EXPECT_EQ(a.contexts, b.contexts);
  EXPECT_EQ(a.targets, b.targets);
  int outliers = 0;
  for (int c : a.cluster) outliers += c == -1;
  EXPECT_EQ(outliers, 20);
  EXPECT_NE(synth_clusters(spec, 4).contexts, a.contexts);
}

TEST(SynthClusters, ValidateRejectsBadSpecs) {
  ClusterSpec spec = two_axes(0.1, 10);
  spec.clusters[0].mean *= 2.0;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = two_axes(-0.1, 10);
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = two_axes(0.1, 10);
  spec.outlier_fraction = 0.3;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = two_axes(0.1, 10);
  spec.dim = 5;
  EXPECT_THROW(spec.validate(), ConfigError);
  EXPECT_THROW(synth_clusters(spec, 1), ConfigError);
}

TEST(Lemma1, SensesSeparateOrthogonalClusters) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const LemmaReport r = lemma1_experiment(seed);
    EXPECT_TRUE(r.passed) << r.summary;
    ASSERT_EQ(r.represented.size(), 2u);
    EXPECT_EQ(r.represented[0] + r.represented[1], 2);
  }
}

TEST(Lemma1, ThreeSensesCoverAtLeastTwoOfThreeClusters) {
  Lemma1Setup setup;
  setup.clusters = 3;
  setup.senses = 3;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const LemmaReport r = lemma1_experiment(seed, setup);
    EXPECT_GE(std::accumulate(r.represented.begin(), r.represented.end(), 0), 2) << r.summary;
  }
}

TEST(Lemma1, OneSenseCannotCoverTwoClusters) {
  Lemma1Setup setup;
  setup.senses = 1;
  const LemmaReport r = lemma1_experiment(1, setup);
  EXPECT_FALSE(r.passed);
  EXPECT_LT(r.represented[0] + r.represented[1], 2);
}

TEST(Lemma1, SingleClusterControl) {
  Lemma1Setup setup;
  setup.clusters = 1;
  setup.senses = 1;
  const LemmaReport r = lemma1_experiment(2, setup);
  EXPECT_TRUE(r.passed) << r.summary;
  ASSERT_EQ(r.represented.size(), 1u);
}

TEST(Lemma1, SeededFirstSenseStaysOnItsCluster) {
  Lemma1Setup setup;
  setup.seed_first_sense = true;
  const LemmaReport r = lemma1_experiment(4, setup);
  EXPECT_TRUE(r.passed) << r.summary;
  bool found = false;
  for (const SenseOutcome& s : r.senses)
    if (s.word == 0 && s.slot == 0) {
      found = true;
      EXPECT_EQ(s.nearest_cluster, 0);
      EXPECT_GT(s.cosine, kRepresentedCosine);
    }
  EXPECT_TRUE(found);
}

TEST(Lemma1, DirectionsAreUnitAndDeterministic) {
  const Tensor a = lemma1_directions(5, {});
  EXPECT_EQ(a, lemma1_directions(5, {}));
  ASSERT_EQ(a.rows(), 2);
  for (Eigen::Index i = 0; i < a.rows(); ++i) EXPECT_NEAR(a.row(i).norm(), 1.0, 1e-12);
}

TEST(Robustness, FewOutliersBarelyMoveSenses) {
  EXPECT_LT(robustness_experiment(1, 0.0), 1e-3);
  EXPECT_LT(robustness_experiment(1, 0.05), 15.0);
}

TEST(Lemma2, WideClusterLearnsLargerTheta) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const LemmaReport r = lemma2_experiment(seed);
    EXPECT_TRUE(r.passed) << r.summary;
    ASSERT_EQ(r.word_theta.size(), 2u);
    EXPECT_GT(r.word_theta[1], r.word_theta[0]);
  }
}

TEST(Lemma2, EqualSpreadsGiveSimilarThetas) {
  Lemma2Setup setup;
  setup.narrow_spread = 0.3;
  setup.wide_spread = 0.3;
  const LemmaReport r = lemma2_experiment(1, setup);
  ASSERT_EQ(r.word_theta.size(), 2u);
  const LemmaReport wide = lemma2_experiment(1);
  EXPECT_LT(std::abs(r.word_theta[1] - r.word_theta[0]),
            std::abs(wide.word_theta[1] - wide.word_theta[0]));
}

TEST(LemmaCsv, OneRowPerSense) {
  const LemmaReport r = lemma1_experiment(1);
  std::ostringstream os;
  write_lemma_csv(os, r);
  std::istringstream in(os.str());
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  EXPECT_EQ(n, static_cast<int>(r.senses.size()) + 1);
}

}  // namespace
}  // namespace kerbs
