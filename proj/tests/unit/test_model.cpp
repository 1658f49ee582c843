#include "kerbs/allocation.hpp"
#include "kerbs/errors.hpp"
#include "kerbs/finite_diff.hpp"
#include "kerbs/model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace kerbs {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar-loop GRU written independently of the library's matrix form.
std::vector<double> scalar_gru(const GruDecoder& g, const std::vector<double>& h,
                               const std::vector<double>& e) {
  const int d = g.input_size, n = g.hidden_size;
  std::vector<double> z(n), r(n), out(n);
  for (int j = 0; j < n; ++j) {
    double az = g.b_z.value(0, j), ar = g.b_r.value(0, j);
    for (int i = 0; i < d; ++i) {
      az += e[i] * g.w_z.value(i, j);
      ar += e[i] * g.w_r.value(i, j);
    }
    for (int i = 0; i < n; ++i) {
      az += h[i] * g.u_z.value(i, j);
      ar += h[i] * g.u_r.value(i, j);
    }
    z[j] = sigmoid(az);
    r[j] = sigmoid(ar);
  }
  for (int j = 0; j < n; ++j) {
    double ac = g.b_h.value(0, j);
    for (int i = 0; i < d; ++i) ac += e[i] * g.w_h.value(i, j);
    for (int i = 0; i < n; ++i) ac += r[i] * h[i] * g.u_h.value(i, j);
    out[j] = (1.0 - z[j]) * h[j] + z[j] * std::tanh(ac);
  }
  return out;
}

TEST(GruStep, ZeroWeightsHalveTheState) {
  const GruDecoder g = GruDecoder::zeros(3, 4);
  Vector h(4);
  h << 1.0, -2.0, 0.5, 4.0;
  const Vector out = gru_step(g, h, Vector::Ones(3));
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(out[i], 0.5 * h[i]);
  EXPECT_EQ(gru_step(g, Vector::Zero(4), Vector::Ones(3)), Vector::Zero(4));
}

TEST(GruStep, MatchesScalarLoopOracle) {
  Rng rng(7);
  GruDecoder g = GruDecoder::random(5, 6, rng, 0.8);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector h = random_uniform<Tensor>(6, 1, rng, -1.0, 1.0);
    const Vector e = random_uniform<Tensor>(5, 1, rng, -1.0, 1.0);
    const std::vector<double> oracle =
        scalar_gru(g, std::vector<double>(h.data(), h.data() + 6), std::vector<double>(e.data(), e.data() + 5));
    const Vector direct = gru_step(g, h, e);
    Tape tape;
    const Var taped = gru_step(bind(tape, g), tape.constant(h.transpose()), tape.constant(e.transpose()));
    for (int j = 0; j < 6; ++j) {
      EXPECT_NEAR(direct[j], oracle[j], 1e-12);
      EXPECT_NEAR(taped.value()(0, j), oracle[j], 1e-12);
    }
  }
}

TEST(GruStep, ShapeMismatchThrows) {
  const GruDecoder g = GruDecoder::zeros(3, 4);
  EXPECT_THROW(gru_step(g, Vector::Zero(3), Vector::Zero(3)), DimensionError);
  EXPECT_THROW(gru_step(g, Vector::Zero(4), Vector::Zero(4)), DimensionError);
}

TEST(HeadKind, ParsesNames) {
  EXPECT_EQ(parse_head("baseline"), HeadKind::kBaseline);
  EXPECT_EQ(parse_head("kerbs"), HeadKind::kKerbs);
  EXPECT_EQ(head_name(HeadKind::kKerbs), "kerbs");
  EXPECT_THROW(parse_head("mos"), ConfigError);
}

LanguageModel kerbs_model(int vocab, int senses, int dim, int hidden, std::uint64_t seed) {
  Rng rng(seed);
  return LanguageModel::create(HeadKind::kKerbs, vocab, dim, hidden, senses, {1, 4}, rng);
}

TEST(LanguageModel, ParameterOrderAndCount) {
  LanguageModel m = kerbs_model(7, 11, 8, 6, 1);
  const auto params = m.parameters();
  ASSERT_EQ(params.size(), 12u);
  EXPECT_EQ(params[LanguageModel::kEmbeddingIndex], &m.senses.embeddings);
  EXPECT_EQ(params[LanguageModel::kThetaIndex], &m.senses.theta);
  const std::size_t gru = 3 * (8 * 6 + 6 * 6 + 6);
  EXPECT_EQ(m.parameter_count(), gru + 6 * 8 + 11 * 8 + 11);

  Rng rng(2);
  LanguageModel b = LanguageModel::create(HeadKind::kBaseline, 7, 8, 6, 0, {1, 4}, rng);
  EXPECT_EQ(b.parameters().size(), 11u);
  EXPECT_EQ(b.parameter_count(), gru + 6 * 8 + 7 * 8);
}

TEST(LanguageModel, BaselineRequiresOneSensePerWord) {
  LanguageModel m = kerbs_model(4, 7, 3, 3, 1);
  EXPECT_THROW(LanguageModel(HeadKind::kBaseline, m.gru, m.projection, m.senses), ContractError);
}

TEST(SequenceNll, SingleWordVocabularyHasZeroLoss) {
  Rng rng(3);
  LanguageModel m = LanguageModel::create(HeadKind::kBaseline, 1, 4, 4, 0, {1, 4}, rng);
  const std::vector<int> tokens{0, 0, 0};
  EXPECT_EQ(sequence_nll(m, tokens), 0.0);
}

TEST(SequenceNll, UniformLogitsGiveLengthTimesLogV) {
  Rng rng(4);
  LanguageModel m = LanguageModel::create(HeadKind::kBaseline, 9, 4, 5, 0, {1, 4}, rng);
  m.senses.embeddings.value.setZero();
  const std::vector<int> tokens{kBos, 5, 3, 7, 7, kEos};
  EXPECT_NEAR(sequence_nll(m, tokens), 5.0 * std::log(9.0), 1e-12);
}

TEST(SequenceNll, OneSenseSmallThetaMatchesBaseline) {
  Rng rng(5);
  LanguageModel base = LanguageModel::create(HeadKind::kBaseline, 10, 6, 7, 0, {1, 4}, rng);
  SenseTable senses = base.senses;
  senses.theta.value.setConstant(kReallocatedTheta);
  LanguageModel kerbs(HeadKind::kKerbs, base.gru, base.projection, senses);
  Rng seq_rng(6);
  std::uniform_int_distribution<int> word(3, 9);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<int> tokens{kBos};
    for (int i = 0; i < 8; ++i) tokens.push_back(word(seq_rng));
    tokens.push_back(kEos);
    EXPECT_NEAR(sequence_nll(kerbs, tokens), sequence_nll(base, tokens), 1e-5);
  }
}

TEST(SequenceNll, RejectsOutOfVocabularyAndShortInput) {
  LanguageModel m = kerbs_model(5, 8, 3, 3, 7);
  const std::vector<int> oov{kBos, 5, kEos};
  EXPECT_THROW(sequence_nll(m, oov), VocabError);
  const std::vector<int> short_seq{kBos};
  EXPECT_THROW(sequence_nll(m, short_seq), DataError);
}

TEST(SequenceNll, FiniteOnLongSequences) {
  LanguageModel m = kerbs_model(6, 15, 4, 4, 8);
  m.senses.embeddings.value *= 40.0;
  std::vector<int> tokens{kBos};
  for (int i = 0; i < 40; ++i) tokens.push_back(3 + i % 3);
  tokens.push_back(kEos);
  EXPECT_TRUE(std::isfinite(sequence_nll(m, tokens)));
}

double max_model_gradient_error(LanguageModel& m, const std::vector<int>& tokens) {
  m.zero_grad();
  {
    Tape tape;
    tape.backward(sequence_nll(tape, m, tokens));
  }
  double worst = 0.0;
  for (Parameter* p : m.parameters()) {
    for (Eigen::Index i = 0; i < p->size(); ++i) {
      double& coord = p->value.data()[i];
      const double saved = coord;
      const double numeric = richardson_derivative(
          [&](double x) {
            coord = x;
            return sequence_nll(m, tokens);
          },
          saved);
      coord = saved;
      worst = std::max(worst, relative_error(p->grad.data()[i], numeric));
    }
  }
  return worst;
}

TEST(SequenceNll, EveryParameterGradientMatchesFiniteDifferences) {
  LanguageModel m = kerbs_model(7, 11, 8, 8, 9);
  // Spread the weights so every group carries a sizeable gradient.
  for (Parameter* p : m.parameters()) p->value *= 6.0;
  const std::vector<int> tokens{kBos, 4, 6, 3, kEos};
  EXPECT_LT(max_model_gradient_error(m, tokens), 1e-4);

  Rng rng(10);
  LanguageModel b = LanguageModel::create(HeadKind::kBaseline, 7, 8, 8, 0, {1, 4}, rng);
  for (Parameter* p : b.parameters()) p->value *= 6.0;
  EXPECT_LT(max_model_gradient_error(b, tokens), 1e-4);
}

Batch padded_batch(const std::vector<std::vector<int>>& sequences) {
  EncodedCorpus corpus;
  corpus.sequences = sequences;
  std::vector<std::size_t> members(sequences.size());
  for (std::size_t i = 0; i < members.size(); ++i) members[i] = i;
  return make_batch(corpus, members);
}

TEST(ForwardBatch, PaddingContributesNothing) {
  LanguageModel m = kerbs_model(8, 14, 5, 5, 11);
  for (Parameter* p : m.parameters()) p->value *= 5.0;
  const std::vector<std::vector<int>> seqs{{kBos, 3, 4, 5, 6, 7, kEos}, {kBos, 6, kEos}, {kBos, 5, 5, kEos}};
  const Batch batch = padded_batch(seqs);

  m.zero_grad();
  double batch_nll = 0.0;
  {
    Tape tape;
    const ForwardResult r = forward_batch(tape, m, batch);
    batch_nll = r.nll.value()(0, 0);
    EXPECT_EQ(r.tokens, 6.0 + 2.0 + 3.0);
    tape.backward(r.nll);
  }
  std::vector<Tensor> batch_grads;
  for (Parameter* p : m.parameters()) batch_grads.push_back(p->grad);

  double separate = 0.0;
  m.zero_grad();
  for (const auto& s : seqs) {
    Tape tape;
    const Var nll = sequence_nll(tape, m, s);
    separate += nll.value()(0, 0);
    tape.backward(nll);
  }
  EXPECT_NEAR(batch_nll, separate, 1e-11);
  const auto params = m.parameters();
  for (std::size_t k = 0; k < params.size(); ++k)
    EXPECT_LT((params[k]->grad - batch_grads[k]).cwiseAbs().maxCoeff(), 1e-11) << params[k]->name;

  Parameter* theta = params[LanguageModel::kThetaIndex];
  const Tensor saved = theta->value;
  const Tensor numeric = finite_diff_grad(
      [&](const Tensor& x) {
        theta->value = x;
        Tape tape;
        return forward_batch(tape, m, batch).nll.value()(0, 0);
      },
      saved);
  theta->value = saved;
  for (Eigen::Index i = 0; i < numeric.size(); ++i)
    EXPECT_LT(relative_error(batch_grads[LanguageModel::kThetaIndex].data()[i], numeric.data()[i]), 1e-4);
}

TEST(ForwardBatch, RecordsCarryTargetSenseProbabilities) {
  LanguageModel m = kerbs_model(6, 12, 4, 4, 12);
  const Batch batch = padded_batch({{kBos, 3, 4, kEos}, {kBos, 5, kEos}});
  Tape tape;
  const ForwardResult r = forward_batch(tape, m, batch, true);
  ASSERT_EQ(r.records.size(), 5u);
  double total = 0.0;
  for (const TokenRecord& rec : r.records) {
    ASSERT_EQ(static_cast<int>(rec.sense_probs.size()), m.senses.count(rec.word));
    double s = 0.0;
    for (double p : rec.sense_probs) s += p;
    EXPECT_NEAR(s, std::exp(rec.log_prob), 1e-12);
    total -= rec.log_prob;
  }
  EXPECT_NEAR(total, r.nll.value()(0, 0), 1e-12);
}

TEST(ForwardBatch, OutOfVocabularyThrows) {
  LanguageModel m = kerbs_model(5, 8, 3, 3, 13);
  EXPECT_THROW(
      {
        Tape tape;
        forward_batch(tape, m, padded_batch({{kBos, 9, kEos}}));
      },
      VocabError);
}

// Zero GRU weights with a positive candidate bias give a positive context;
// a large aligned row then wins every argmax.
LanguageModel biased_model(HeadKind head, int vocab, int favourite) {
  const int dim = 3, hidden = 4;
  GruDecoder g = GruDecoder::zeros(dim, hidden);
  g.b_h.value.setConstant(2.0);
  Parameter proj("projection", Tensor::Ones(hidden, dim));
  SenseTable table(dim, std::vector<int>(vocab, 1));
  if (head == HeadKind::kKerbs) table = SenseTable(dim, [&] {
      std::vector<int> c(vocab, 1);
      c[favourite] = 2;
      return c;
    }());
  table.embeddings.value.setConstant(-0.1);
  for (int j = 0; j < table.count(favourite); ++j)
    table.embeddings.value.row(table.offset(favourite) + j).setConstant(3.0);
  return LanguageModel(head, g, proj, table);
}

TEST(GreedyDecode, ZeroLengthIsEmpty) {
  LanguageModel m = kerbs_model(5, 8, 3, 3, 14);
  EXPECT_TRUE(greedy_decode(m, 0).empty());
}

TEST(GreedyDecode, BiasedModelRepeatsItsFavourite) {
  for (HeadKind head : {HeadKind::kBaseline, HeadKind::kKerbs}) {
    const LanguageModel m = biased_model(head, 6, 4);
    EXPECT_EQ(greedy_decode(m, 7), std::vector<int>(7, 4)) << head_name(head);
  }
}

TEST(GreedyDecode, StopsBeforeEndOfSentence) {
  const LanguageModel m = biased_model(HeadKind::kBaseline, 6, kEos);
  EXPECT_TRUE(greedy_decode(m, 5).empty());
}

TEST(GreedyDecode, Deterministic) {
  LanguageModel a = kerbs_model(9, 20, 4, 6, 15);
  LanguageModel b = kerbs_model(9, 20, 4, 6, 15);
  for (Parameter* p : a.parameters()) p->value *= 10.0;
  for (Parameter* p : b.parameters()) p->value *= 10.0;
  EXPECT_EQ(greedy_decode(a, 12), greedy_decode(b, 12));
}

}  // namespace
}  // namespace kerbs
