#pragma once

#include "kerbs/sense_table.hpp"
#include "kerbs/tensor.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace kerbs {

struct Cluster {
  Vector mean;  // unit norm
  double spread = 0.1;  // std of the rotation angle away from the mean, radians
  int count = 0;
  int word = 0;
};

struct ClusterSpec {
  int dim = 8;
  std::vector<Cluster> clusters;
  double outlier_fraction = 0.0;  // extra uniform points, relative to members

  // Throws ConfigError on a non-unit mean, negative spread, a fraction
  // outside [0, 0.2] or a dimension mismatch.
  void validate() const;
};

struct ClusterData {
  Tensor contexts;           // N x dim, unit rows
  std::vector<int> targets;  // word per row
  std::vector<int> cluster;  // source cluster per row, -1 for outliers
};

// Members are the mean rotated by an angle ~ N(0, spread) toward a random
// orthogonal direction; outliers are uniform on the sphere and carry the word
// of a random cluster.
ClusterData synth_clusters(const ClusterSpec& spec, std::uint64_t seed);

struct HeadFit {
  int steps = 400;
  double lr = 0.02;
  bool learn_theta = true;
  bool adam = true;  // plain gradient descent otherwise
};

// Full-batch Adam (or gradient descent) on the mean NLL of the targets given fixed contexts.
// Returns the final loss.
double fit_head(SenseTable& table, const ClusterData& data, const HeadFit& fit);

struct SenseOutcome {
  int word = 0;
  int slot = 0;
  int nearest_cluster = 0;
  double cosine = 0.0;
  double theta = 0.0;
};

struct LemmaReport {
  std::vector<SenseOutcome> senses;
  std::vector<int> represented;  // per cluster of the probed word: 1 when some sense is within 0.8
  std::vector<double> word_theta;  // mean theta of each word's senses
  bool passed = false;
  std::string summary;
};

inline constexpr double kRepresentedCosine = 0.8;

struct Lemma1Setup {
  int clusters = 2;        // clusters owned by word 0, pairwise orthogonal
  int senses = 2;          // senses of word 0
  double spread = 0.1;
  int points = 500;        // per cluster
  double outlier_fraction = 0.0;
  bool seed_first_sense = false;  // start sense 0 on cluster 0's mean
  int dim = 8;
};

// Word 0 owns the probed clusters (orthogonal axes, theta fixed at 1e-8,
// mutually orthogonal initial senses, gradient descent); single-sense distractor words own the bisector of every
// pair of clusters and the remaining axes. Passes when every cluster of word 0 is
// nearest to a distinct sense with cosine > 0.8.
LemmaReport lemma1_experiment(std::uint64_t seed, const Lemma1Setup& setup = {});

// Sense directions of word 0 after fitting the Lemma 1 setup.
Tensor lemma1_directions(std::uint64_t seed, const Lemma1Setup& setup);

// Largest angle in degrees between corresponding word 0 sense directions
// fitted with and without `outlier_fraction` uniform outliers.
double robustness_experiment(std::uint64_t seed, double outlier_fraction = 0.05);

struct Lemma2Setup {
  double narrow_spread = 0.05;
  double wide_spread = 0.5;
  double separation = 0.5;  // angle between the two means, radians
  int points = 500;
  int dim = 8;
};

// Single-sense words 0 (narrow) and 1 (wide) with overlapping clusters and
// free theta. Passes when theta_wide > theta_narrow.
LemmaReport lemma2_experiment(std::uint64_t seed, const Lemma2Setup& setup = {});

void write_lemma_csv(std::ostream& os, const LemmaReport& report);

}  // namespace kerbs
