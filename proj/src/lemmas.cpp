#include "kerbs/lemmas.hpp"

#include "kerbs/adam.hpp"
#include "kerbs/allocation.hpp"
#include "kerbs/errors.hpp"
#include "kerbs/kerbs_head.hpp"
#include "kerbs/kernel.hpp"
#include "kerbs/ops.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

namespace kerbs {
namespace {

Vector basis(int dim, int axis) {
  Vector v = Vector::Zero(dim);
  v[axis] = 1.0;
  return v;
}

Vector random_unit(int dim, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector v(dim);
  do {
    for (int i = 0; i < dim; ++i) v[i] = n(rng);
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

Vector random_orthogonal(const Vector& mean, Rng& rng) {
  Vector u;
  do {
    u = random_unit(static_cast<int>(mean.size()), rng);
    u -= u.dot(mean) * mean;
  } while (u.norm() < 1e-8);
  return u / u.norm();
}

double cosine_to(const Eigen::Ref<const Eigen::RowVectorXd>& w, const Vector& mean) {
  return w.dot(mean.transpose()) / std::max(w.norm(), kernel::kNormFloor);
}

// Distractor words 1.. own the basis axes not used by the probed clusters.
void add_distractors(ClusterSpec& spec, int first_axis, int first_word, int points,
                     double spread) {
  for (int axis = first_axis, word = first_word; axis < spec.dim; ++axis, ++word)
    spec.clusters.push_back({basis(spec.dim, axis), spread, points, word});
}

SenseTable lemma_table(const std::vector<int>& counts, int dim, Rng& rng, double theta) {
  SenseTable table(dim, counts);
  table.embeddings.value = random_uniform<Tensor>(table.total_senses(), dim, rng, -0.08, 0.08);
  table.theta.value.setConstant(theta);
  return table;
}

// Rows [0, n) become an orthogonal set with the same mean norm; identical
// senses of one word would otherwise receive identical gradients.
void orthogonalize_leading_rows(Tensor& embeddings, int n, Rng& rng) {
  const double scale = embeddings.topRows(n).rowwise().norm().mean();
  const Tensor g = random_uniform<Tensor>(embeddings.cols(), n, rng, -1.0, 1.0);
  const Eigen::HouseholderQR<Tensor> qr(g);
  const Tensor q = qr.householderQ() * Tensor::Identity(embeddings.cols(), n);
  embeddings.topRows(n) = scale * q.transpose();
}

struct Lemma1Problem {
  ClusterSpec spec;
  SenseTable table;
};

Lemma1Problem lemma1_problem(std::uint64_t seed, const Lemma1Setup& setup) {
  if (setup.clusters < 1 || setup.clusters > setup.dim - 1 || setup.senses < 1)
    throw ConfigError("lemma1: need 1 <= clusters < dim and senses >= 1");
  Lemma1Problem p;
  p.spec.dim = setup.dim;
  p.spec.outlier_fraction = setup.outlier_fraction;
  for (int c = 0; c < setup.clusters; ++c)
    p.spec.clusters.push_back({basis(setup.dim, c), setup.spread, setup.points, 0});
  int first_word = 1;
  // A competing word between every pair of clusters rules out a single sense
  // covering both.
  for (int a = 0; a < setup.clusters; ++a)
    for (int b = a + 1; b < setup.clusters; ++b) {
      const Vector bisector = (basis(setup.dim, a) + basis(setup.dim, b)) / std::sqrt(2.0);
      p.spec.clusters.push_back({bisector, setup.spread, setup.points / 2, first_word++});
    }
  add_distractors(p.spec, setup.clusters, first_word, setup.points / 2, setup.spread);
  const int words = first_word + setup.dim - setup.clusters;
  std::vector<int> counts(words, 1);
  counts[0] = setup.senses;
  Rng rng(seed * 7919 + 17);
  p.table = lemma_table(counts, setup.dim, rng, kReallocatedTheta);
  if (setup.senses <= setup.dim) orthogonalize_leading_rows(p.table.embeddings.value, setup.senses, rng);
  if (setup.seed_first_sense)
    p.table.embeddings.value.row(0) = 0.5 * p.spec.clusters[0].mean.transpose();
  return p;
}

constexpr HeadFit kLemma1Fit{600, 1.0, false, false};
constexpr HeadFit kLemma2Fit{600, 0.02, true};

}  // namespace

void ClusterSpec::validate() const {
  if (dim < 1) throw ConfigError("cluster spec: dim must be positive");
  if (!(outlier_fraction >= 0.0 && outlier_fraction <= 0.2))
    throw ConfigError("cluster spec: outlier fraction must lie in [0, 0.2]");
  for (const Cluster& c : clusters) {
    if (c.mean.size() != dim) throw ConfigError("cluster spec: mean has the wrong dimension");
    if (std::abs(c.mean.norm() - 1.0) > 1e-9) throw ConfigError("cluster spec: mean is not unit norm");
    if (!(c.spread >= 0.0)) throw ConfigError("cluster spec: spread must be non-negative");
    if (c.count < 0 || c.word < 0) throw ConfigError("cluster spec: negative count or word");
  }
}

ClusterData synth_clusters(const ClusterSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  Rng outlier_rng(seed ^ 0x5DEECE66DULL);
  int members = 0;
  for (const Cluster& c : spec.clusters) members += c.count;
  const int outliers = static_cast<int>(std::lround(spec.outlier_fraction * members));

  ClusterData data;
  data.contexts.resize(members + outliers, spec.dim);
  int row = 0;
  for (std::size_t k = 0; k < spec.clusters.size(); ++k) {
    const Cluster& c = spec.clusters[k];
    std::normal_distribution<double> angle(0.0, c.spread);
    for (int i = 0; i < c.count; ++i, ++row) {
      const double phi = c.spread > 0.0 ? angle(rng) : 0.0;
      const Vector u = random_orthogonal(c.mean, rng);
      data.contexts.row(row) = (std::cos(phi) * c.mean + std::sin(phi) * u).transpose();
      data.targets.push_back(c.word);
      data.cluster.push_back(static_cast<int>(k));
    }
  }
  std::uniform_int_distribution<std::size_t> pick(0, spec.clusters.empty() ? 0 : spec.clusters.size() - 1);
  for (int i = 0; i < outliers; ++i, ++row) {
    data.contexts.row(row) = random_unit(spec.dim, outlier_rng).transpose();
    data.targets.push_back(spec.clusters.empty() ? 0 : spec.clusters[pick(outlier_rng)].word);
    data.cluster.push_back(-1);
  }
  return data;
}

double fit_head(SenseTable& table, const ClusterData& data, const HeadFit& fit) {
  AdamState adam;
  adam.lr = fit.lr;
  const int width = table.max_count();
  const double scale = 1.0 / static_cast<double>(data.targets.size());
  double loss = 0.0;
  for (int step = 0; step <= fit.steps; ++step) {
    table.embeddings.zero_grad();
    table.theta.zero_grad();
    Tape tape;
    const Var ctx = tape.constant(data.contexts);
    const Var emb = tape.parameter(table.embeddings);
    const Var theta = tape.parameter(table.theta);
    const Var head = ops::kerbs_head(ctx, emb, theta, table, data.targets, width);
    const Var nll = ops::affine(ops::sum(ops::slice_cols(head, 0, 1)), -scale, 0.0);
    loss = nll.value()(0, 0);
    if (step == fit.steps) break;
    tape.backward(nll);
    if (!fit.learn_theta) table.theta.zero_grad();
    std::vector<Parameter*> params{&table.embeddings, &table.theta};
    if (fit.adam) {
      adam_step(adam, params);
    } else {
      for (Parameter* p : params) p->value -= fit.lr * p->grad;
    }
    table.theta.value =
        table.theta.value.cwiseMax(-kernel::kThetaBound).cwiseMin(kernel::kThetaBound);
  }
  return loss;
}

Tensor lemma1_directions(std::uint64_t seed, const Lemma1Setup& setup) {
  Lemma1Problem p = lemma1_problem(seed, setup);
  fit_head(p.table, synth_clusters(p.spec, seed), kLemma1Fit);
  Tensor dirs = p.table.embeddings.value.topRows(setup.senses);
  for (Eigen::Index r = 0; r < dirs.rows(); ++r)
    dirs.row(r) /= std::max(dirs.row(r).norm(), kernel::kNormFloor);
  return dirs;
}

LemmaReport lemma1_experiment(std::uint64_t seed, const Lemma1Setup& setup) {
  Lemma1Problem p = lemma1_problem(seed, setup);
  fit_head(p.table, synth_clusters(p.spec, seed), kLemma1Fit);

  LemmaReport report;
  report.represented.assign(setup.clusters, 0);
  for (int j = 0; j < setup.senses; ++j) {
    SenseOutcome s;
    s.word = 0;
    s.slot = j;
    s.theta = p.table.theta.value(j, 0);
    s.cosine = -2.0;
    for (int c = 0; c < setup.clusters; ++c) {
      const double cos = cosine_to(p.table.embeddings.value.row(j), p.spec.clusters[c].mean);
      if (cos > s.cosine) {
        s.cosine = cos;
        s.nearest_cluster = c;
      }
    }
    if (s.cosine > kRepresentedCosine) report.represented[s.nearest_cluster] = 1;
    report.senses.push_back(s);
  }
  report.word_theta.push_back(p.table.theta.value.topRows(setup.senses).mean());
  const int hit = static_cast<int>(std::count(report.represented.begin(), report.represented.end(), 1));
  report.passed = hit == std::min(setup.clusters, setup.senses);
  std::ostringstream os;
  os << "lemma1 seed=" << seed << " represented=" << hit << '/' << setup.clusters;
  report.summary = os.str();
  return report;
}

double robustness_experiment(std::uint64_t seed, double outlier_fraction) {
  Lemma1Setup clean;
  Lemma1Setup noisy = clean;
  noisy.outlier_fraction = outlier_fraction;
  const Tensor a = lemma1_directions(seed, clean);
  const Tensor b = lemma1_directions(seed, noisy);
  double worst = 0.0;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double c = std::clamp(a.row(r).dot(b.row(r)), -1.0, 1.0);
    worst = std::max(worst, std::acos(c) * 180.0 / std::numbers::pi);
  }
  return worst;
}

LemmaReport lemma2_experiment(std::uint64_t seed, const Lemma2Setup& setup) {
  ClusterSpec spec;
  spec.dim = setup.dim;
  const Vector narrow = basis(setup.dim, 0);
  const Vector wide =
      std::cos(setup.separation) * narrow + std::sin(setup.separation) * basis(setup.dim, 1);
  spec.clusters.push_back({narrow, setup.narrow_spread, setup.points, 0});
  spec.clusters.push_back({wide, setup.wide_spread, setup.points, 1});
  const int words = static_cast<int>(spec.clusters.size());
  Rng rng(seed * 104729 + 3);
  SenseTable table = lemma_table(std::vector<int>(words, 1), setup.dim, rng, kReallocatedTheta);
  fit_head(table, synth_clusters(spec, seed), kLemma2Fit);

  LemmaReport report;
  for (int w = 0; w < words; ++w) {
    SenseOutcome s;
    s.word = w;
    s.slot = w;
    s.nearest_cluster = w;
    s.cosine = cosine_to(table.embeddings.value.row(w), spec.clusters[w].mean);
    s.theta = table.theta.value(w, 0);
    report.senses.push_back(s);
    report.word_theta.push_back(s.theta);
  }
  report.represented.assign(2, 1);
  report.passed = report.word_theta[1] > report.word_theta[0];
  std::ostringstream os;
  os << std::setprecision(6) << "lemma2 seed=" << seed << " theta_narrow=" << report.word_theta[0]
     << " theta_wide=" << report.word_theta[1];
  report.summary = os.str();
  return report;
}

void write_lemma_csv(std::ostream& os, const LemmaReport& report) {
  os << "word,slot,nearest_cluster,cosine,theta\n" << std::setprecision(9);
  for (const SenseOutcome& s : report.senses)
    os << s.word << ',' << s.slot << ',' << s.nearest_cluster << ',' << s.cosine << ','
       << s.theta << '\n';
}

}  // namespace kerbs
