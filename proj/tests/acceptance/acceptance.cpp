// Prints one PASS/FAIL line per acceptance criterion; exits non-zero when any fails.

#include "kerbs/checkpoint.hpp"
#include "kerbs/eval.hpp"
#include "kerbs/kerbs_head.hpp"
#include "kerbs/kernel.hpp"
#include "kerbs/lemmas.hpp"
#include "kerbs/log.hpp"
#include "kerbs/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace kerbs {
namespace {

struct Verdict {
  bool passed = false;
  std::string detail;
};

std::string fmt(double v, int digits = 6) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

Vector normal_vector(int dim, Rng& rng) {
  return random_normal<Tensor>(dim, 1, rng, 1.0).col(0);
}

// 1. a(theta) oracles, exact zero at cos = 0, inner-product limit.
Verdict kernel_correctness() {
  const double a1 = normalization_factor(1.0);
  const double am2 = normalization_factor(-2.0);
  // -theta / (2 (e^-theta + theta - 1)), 40-digit evaluation.
  const double oracle_a1 = -1.3591409142295226177;
  const double oracle_am2 = 0.22783942092780268473;
  bool ok = std::abs(a1 - oracle_a1) < 1e-8 && std::abs(am2 - oracle_am2) < 1e-8;

  Rng rng(101);
  bool zero = true;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    Vector h = Vector::Zero(6), e = Vector::Zero(6);
    const Vector r = normal_vector(6, rng);
    h.head(3) = r.head(3);
    e.tail(3) = r.tail(3);
    for (double theta : {-3.0, -1e-6, 1e-6, 2.5}) zero &= kernel_eval(h, e, theta) == 0.0;

    const Vector x = normal_vector(8, rng), y = normal_vector(8, rng);
    for (double theta : {-1e-6, 1e-6})
      worst = std::max(worst, std::abs(kernel_eval(x, y, theta) - x.dot(y)) / (x.norm() * y.norm()));
  }
  ok &= zero && worst < 1e-5;
  return {ok, "a(1)=" + fmt(a1, 12) + " a(-2)=" + fmt(am2, 12) + " zero_at_cos0=" +
                  (zero ? "yes" : "no") + " max_rel_dev=" + fmt(worst, 3)};
}

// e^-x + x - 1, summed as a power series near 0 to avoid cancellation.
long double exp_minus_linear(long double x) {
  if (std::abs(x) > 0.25L) return std::exp(-x) + x - 1.0L;
  long double term = x * x / 2.0L, sum = 0.0L;
  for (int n = 2; n < 40; ++n) {
    sum += term;
    term *= -x / (n + 1);
  }
  return sum;
}

// Direct exponentiation of each kernel value in long double.
std::vector<long double> brute_force_posterior(const Vector& h, const SenseTable& t) {
  std::vector<long double> w(t.total_senses());
  long double total = 0.0L;
  for (int k = 0; k < t.total_senses(); ++k) {
    const Vector e = t.embeddings.value.row(k).transpose();
    const long double theta = t.theta.value(k, 0);
    const long double c = h.dot(e) / (h.norm() * e.norm());
    const long double a = -theta / (2.0L * exp_minus_linear(theta));
    w[k] = std::exp(static_cast<long double>(h.norm()) * e.norm() * a * std::expm1(-theta * c));
    total += w[k];
  }
  for (long double& v : w) v /= total;
  return w;
}

// 2. Posterior and word distribution structure.
Verdict probability_structure() {
  Rng rng(202);
  std::uniform_int_distribution<int> vocab(2, 30), dim(2, 16);
  double worst_sum = 0.0, worst_word = 0.0, worst_brute = 0.0;
  for (int draw = 0; draw < 1000; ++draw) {
    const int v = vocab(rng), d = dim(rng);
    std::uniform_int_distribution<int> extra(0, 3 * v);
    const SenseTable t = SenseTable::random(v, d, v + extra(rng), SenseBounds{1, 4}, rng, 0.5, 2.0);
    const Vector h = normal_vector(d, rng);
    const SenseDistribution dist = sense_posterior(h, t);
    const Vector words = word_probs(dist, t);
    worst_sum = std::max(worst_sum, std::abs(dist.probs.sum() - 1.0));
    worst_word = std::max(worst_word, std::abs(words.sum() - 1.0));
    const std::vector<long double> brute = brute_force_posterior(h, t);
    for (int k = 0; k < t.total_senses(); ++k)
      worst_brute = std::max(worst_brute, static_cast<double>(std::abs(dist.probs[k] - brute[k])));
  }
  const bool ok = worst_sum <= 1e-9 && worst_word <= 1e-9 && worst_brute <= 1e-12;
  return {ok, "max|sum_s-1|=" + fmt(worst_sum, 3) + " max|sum_w-1|=" + fmt(worst_word, 3) +
                  " max_brute_diff=" + fmt(worst_brute, 3)};
}

// 3. Full-model finite-difference gradient audit.
Verdict gradient_audit() {
  Rng rng(303);
  LanguageModel model = LanguageModel::create(HeadKind::kKerbs, 7, 8, 8, 11, SenseBounds{}, rng);
  const std::vector<int> tokens = random_sequence(7, 5, rng);
  const GradAuditReport r = grad_audit(model, tokens, 50, 1e-4, rng);
  const bool ok = r.passed && r.probes.size() == 200u && r.max_rel_error < 1e-4;
  return {ok, "probes=" + std::to_string(r.probes.size()) + " max_rel_error=" + fmt(r.max_rel_error, 3)};
}

// 4. One sense per word at theta = 1e-8 reduces to the softmax baseline.
Verdict degeneration() {
  Rng rng(404);
  LanguageModel base = LanguageModel::create(HeadKind::kBaseline, 40, 8, 10, 0, SenseBounds{}, rng);
  SenseTable senses = base.senses;
  senses.theta.value.setConstant(1e-8);
  LanguageModel kerbs(HeadKind::kKerbs, base.gru, base.projection, senses);
  EncodedCorpus c;
  std::uniform_int_distribution<int> len(3, 14);
  for (int i = 0; i < 16; ++i) c.sequences.push_back(random_sequence(40, len(rng), rng));
  std::vector<std::size_t> all(c.sequences.size());
  std::iota(all.begin(), all.end(), 0);
  const Batch batch = make_batch(c, all);
  Tape t1, t2;
  const double nll_k = forward_batch(t1, kerbs, batch).nll.value()(0, 0);
  const double nll_b = forward_batch(t2, base, batch).nll.value()(0, 0);
  const double diff = std::abs(nll_k - nll_b);
  return {diff < 1e-5, "kerbs=" + fmt(nll_k, 12) + " baseline=" + fmt(nll_b, 12) + " diff=" + fmt(diff, 3)};
}

// 5. Two senses represent two clusters.
Verdict lemma1() {
  int passed = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) passed += lemma1_experiment(seed).passed;
  return {passed >= 9, "seeds_passed=" + std::to_string(passed) + "/10"};
}

// 6. The wider cluster learns the larger theta.
Verdict lemma2() {
  int passed = 0;
  Lemma2Setup setup;
  setup.narrow_spread = 0.05;
  setup.wide_spread = 0.5;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) passed += lemma2_experiment(seed, setup).passed;
  return {passed >= 9, "seeds_passed=" + std::to_string(passed) + "/10"};
}

// 7. Outliers barely move the converged Lemma 1 senses.
Verdict robustness() {
  std::vector<double> angles;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) angles.push_back(robustness_experiment(seed, 0.05));
  std::sort(angles.begin(), angles.end());
  const double median = 0.5 * (angles[4] + angles[5]);
  return {median < 15.0, "median_max_angle_deg=" + fmt(median, 4) + " worst=" + fmt(angles.back(), 4)};
}

// 8. A word with two disjoint, ambiguous contexts starts with one sense and
// gains more; the table stays valid after every phase.
Verdict allocation_dynamics() {
  // Ids 0-2 are reserved; 3 is the probed word, 4-5 its contexts, 6-11 rivals.
  constexpr int kWord = 3, kVocab = 12;
  EncodedCorpus corpus;
  for (int rep = 0; rep < 24; ++rep)
    for (int ctx : {4, 5})
      for (int next : {kWord, ctx == 4 ? 6 : 9, ctx == 4 ? 7 : 10, ctx == 4 ? 8 : 11})
        corpus.sequences.push_back({kBos, ctx, next, kEos});

  TrainConfig config;
  config.dim = 8;
  config.hidden = 8;
  config.batch_size = 8;
  config.lr = 0.01;
  config.q = 100;
  config.epsilon = std::log(0.3);
  config.seed = 808;

  std::vector<int> counts(kVocab, 2);
  counts[kWord] = 1;
  const int total = std::accumulate(counts.begin(), counts.end(), 0);
  Rng rng(config.seed);
  LanguageModel shell = LanguageModel::create(HeadKind::kKerbs, kVocab, config.dim, config.hidden,
                                              total, config.bounds(), rng);
  SenseTable table(config.dim, counts);
  table.embeddings.value = random_uniform<Tensor>(total, config.dim, rng, -0.08, 0.08);
  table.theta.value = random_uniform<Tensor>(total, 1, rng, -0.5, 0.5);
  Trainer trainer(config, LanguageModel(HeadKind::kKerbs, shell.gru, shell.projection, table));

  const SenseBounds bounds = config.bounds();
  int phases = 0, violations = 0, to_word = 0, events = 0;
  BatchIterator batches(corpus, config.batch_size, config.seed);
  for (int epoch = 0; epoch < 40; ++epoch) {
    for (const Batch& b : batches.epoch(epoch)) {
      trainer.train_step(b);
      if (trainer.step() % config.q != 0) continue;
      for (const AllocationEvent& e : trainer.allocation_phase()) {
        ++events;
        to_word += e.recipient_word == kWord;
      }
      ++phases;
      const SenseTable& t = trainer.model().senses;
      const auto c = t.counts();
      const bool sums = std::accumulate(c.begin(), c.end(), 0) == total && t.total_senses() == total;
      const bool bounded = std::all_of(c.begin(), c.end(), [&](int m) {
        return m >= bounds.min_senses && m <= bounds.max_senses;
      });
      bool valid = true;
      try {
        t.validate(bounds);
      } catch (const Error&) {
        valid = false;
      }
      violations += !(sums && bounded && valid);
    }
  }
  const int final_senses = trainer.model().senses.count(kWord);
  const bool ok = to_word >= 1 && violations == 0 && phases > 0;
  return {ok, "phases=" + std::to_string(phases) + " events=" + std::to_string(events) +
                  " to_word=" + std::to_string(to_word) + " final_senses=" +
                  std::to_string(final_senses) + " invariant_violations=" + std::to_string(violations)};
}

// Configuration of the desk-scale language-model comparison.
TrainConfig lm_config(HeadKind head, std::uint64_t seed) {
  TrainConfig c;
  c.head = head;
  c.seed = seed;
  c.batch_size = 16;
  c.lr = 0.005;
  c.max_epochs = 20;
  c.q = 50;
  c.vocab_size = 2000;
  c.sense_ratio = 1.5;
  if (head == HeadKind::kBaseline) c.dim = 48;  // parameter budget of the KerBS model
  return c;
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[1];
}

// 9. Paired seeds on the bundled corpus.
Verdict language_model() {
  const std::string dir = KERBS_DATA_DIR;
  const std::vector<std::string> train_lines = read_lines(dir + "/sotu.train.txt");
  const std::vector<std::string> valid_lines = read_lines(dir + "/sotu.valid.txt");
  const std::vector<std::string> test_lines = read_lines(dir + "/sotu.test.txt");
  const Vocab vocab = Vocab::build(train_lines, 2000);
  const EncodedCorpus train = encode_corpus(vocab, train_lines, "train");
  const EncodedCorpus valid = encode_corpus(vocab, valid_lines, "valid");
  const EncodedCorpus test = encode_corpus(vocab, test_lines, "test");

  std::vector<double> ppl_kerbs, ppl_base;
  std::size_t params_kerbs = 0, params_base = 0;
  std::ostringstream runs;
  for (std::uint64_t seed : {1, 2, 3}) {
    for (HeadKind head : {HeadKind::kBaseline, HeadKind::kKerbs}) {
      const auto start = std::chrono::steady_clock::now();
      const TrainConfig config = lm_config(head, seed);
      TrainResult r = run_training(config, vocab, train, &valid);
      const double ppl = perplexity(r.checkpoint.model, test, config.batch_size);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      (head == HeadKind::kKerbs ? ppl_kerbs : ppl_base).push_back(ppl);
      (head == HeadKind::kKerbs ? params_kerbs : params_base) = r.checkpoint.model.parameter_count();
      std::printf("  lm seed=%llu head=%s test_ppl=%.3f events=%zu secs=%.0f\n",
                  static_cast<unsigned long long>(seed), std::string(head_name(head)).c_str(), ppl,
                  r.events.size(), secs);
      std::fflush(stdout);
    }
  }
  const double mk = median3(ppl_kerbs), mb = median3(ppl_base);
  return {mk <= mb, "median_test_ppl kerbs=" + fmt(mk, 6) + " baseline=" + fmt(mb, 6) +
                        " params kerbs=" + std::to_string(params_kerbs) +
                        " baseline=" + std::to_string(params_base)};
}

// 10. Same seed, same trajectory; checkpoints reproduce NLL exactly.
Verdict determinism_round_trip() {
  const std::vector<std::string> lines{"the cat sat on the mat", "a dog saw the cat",
                                       "the bird sat on a log", "a cat saw a bird",
                                       "the dog sat on the mat"};
  const Vocab vocab = Vocab::build(lines, 100);
  const EncodedCorpus corpus = encode_corpus(vocab, lines, "train");
  TrainConfig config;
  config.dim = 8;
  config.hidden = 8;
  config.batch_size = 2;
  config.max_epochs = 4;
  config.q = 3;
  config.lr = 0.01;
  config.epsilon = -0.5;
  config.patience = 1;
  const TrainResult a = run_training(config, vocab, corpus, &corpus);
  TrainResult b = run_training(config, vocab, corpus, &corpus);
  const bool same = a.losses == b.losses && a.events.size() == b.events.size();

  const std::string path =
      (std::filesystem::temp_directory_path() / "kerbs_acceptance_ckpt.bin").string();
  save_checkpoint(b.checkpoint, path);
  Checkpoint loaded = load_checkpoint(path, vocab.size());
  std::filesystem::remove(path);
  quantize_to_storage(b.checkpoint.model);
  bool exact = true;
  for (const auto& s : corpus.sequences)
    exact &= sequence_nll(loaded.model, s) == sequence_nll(b.checkpoint.model, s);
  return {same && exact, "steps=" + std::to_string(a.losses.size()) + " identical_trajectory=" +
                             (same ? "yes" : "no") + " bit_exact_nll=" + (exact ? "yes" : "no")};
}

}  // namespace
}  // namespace kerbs

int main(int argc, char** argv) {
  using namespace kerbs;
  log::logger().set_level(spdlog::level::warn);
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"kernel_correctness", kernel_correctness},
      {"probability_structure", probability_structure},
      {"gradient_audit", gradient_audit},
      {"degeneration_equivalence", degeneration},
      {"lemma1_reproduction", lemma1},
      {"lemma2_reproduction", lemma2},
      {"outlier_robustness", robustness},
      {"allocation_dynamics", allocation_dynamics},
      {"desk_scale_lm", language_model},
      {"determinism_round_trip", determinism_round_trip}};
  // Optional arguments select criteria by number; default is all of them.
  std::vector<std::size_t> selected;
  for (int a = 1; a < argc; ++a) selected.push_back(std::stoul(argv[a]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), i + 1) == selected.end())
      continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !v.passed;
    std::printf("%s %zu %s %s (%.1fs)\n", v.passed ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
