#include "kerbs/model.hpp"

#include "kerbs/errors.hpp"
#include "kerbs/kerbs_head.hpp"
#include "kerbs/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kerbs {
namespace {

Parameter zeros_param(std::string name, int rows, int cols) {
  return Parameter(std::move(name), Tensor::Zero(rows, cols));
}

Parameter uniform_param(std::string name, int rows, int cols, Rng& rng, double scale) {
  return Parameter(std::move(name), random_uniform<Tensor>(rows, cols, rng, -scale, scale));
}

void check_ids(const IndexMatrix& tokens, int vocab_size) {
  for (Eigen::Index i = 0; i < tokens.size(); ++i) {
    const int id = tokens.data()[i];
    if (id < 0 || id >= vocab_size)
      throw VocabError("token id " + std::to_string(id) + " outside vocabulary of size " +
                       std::to_string(vocab_size));
  }
}

Vector sigmoid(const Vector& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

// Uniform weights over each word's senses, zero-padded to `width`.
Tensor uniform_sense_weights(const SenseTable& table, std::span<const int> words, int width) {
  Tensor w = Tensor::Zero(static_cast<Eigen::Index>(words.size()), width);
  for (std::size_t r = 0; r < words.size(); ++r) {
    const int m = table.count(words[r]);
    for (int j = 0; j < m; ++j) w(static_cast<Eigen::Index>(r), j) = 1.0 / m;
  }
  return w;
}

}  // namespace

GruDecoder GruDecoder::zeros(int input_size, int hidden_size) {
  if (input_size < 1 || hidden_size < 1) throw DimensionError("gru: sizes must be positive");
  GruDecoder g;
  g.input_size = input_size;
  g.hidden_size = hidden_size;
  g.w_z = zeros_param("gru.w_z", input_size, hidden_size);
  g.u_z = zeros_param("gru.u_z", hidden_size, hidden_size);
  g.b_z = zeros_param("gru.b_z", 1, hidden_size);
  g.w_r = zeros_param("gru.w_r", input_size, hidden_size);
  g.u_r = zeros_param("gru.u_r", hidden_size, hidden_size);
  g.b_r = zeros_param("gru.b_r", 1, hidden_size);
  g.w_h = zeros_param("gru.w_h", input_size, hidden_size);
  g.u_h = zeros_param("gru.u_h", hidden_size, hidden_size);
  g.b_h = zeros_param("gru.b_h", 1, hidden_size);
  return g;
}

GruDecoder GruDecoder::random(int input_size, int hidden_size, Rng& rng, double scale) {
  GruDecoder g = zeros(input_size, hidden_size);
  for (Parameter* p : g.parameters())
    p->value = random_uniform<Tensor>(p->value.rows(), p->value.cols(), rng, -scale, scale);
  return g;
}

std::vector<Parameter*> GruDecoder::parameters() {
  return {&w_z, &u_z, &b_z, &w_r, &u_r, &b_r, &w_h, &u_h, &b_h};
}

GruVars bind(Tape& tape, GruDecoder& g) {
  return {tape.parameter(g.w_z), tape.parameter(g.u_z), tape.parameter(g.b_z),
          tape.parameter(g.w_r), tape.parameter(g.u_r), tape.parameter(g.b_r),
          tape.parameter(g.w_h), tape.parameter(g.u_h), tape.parameter(g.b_h)};
}

Var gru_step(const GruVars& g, Var h_prev, Var e) {
  using namespace ops;
  if (h_prev.rows() != e.rows())
    throw DimensionError("gru_step: batch sizes differ: h " + shape_string(h_prev.value()) +
                         ", e " + shape_string(e.value()));
  const Var z = sigmoid(add_row(matmul(e, g.w_z) + matmul(h_prev, g.u_z), g.b_z));
  const Var r = sigmoid(add_row(matmul(e, g.w_r) + matmul(h_prev, g.u_r), g.b_r));
  const Var cand = ops::tanh(add_row(matmul(e, g.w_h) + matmul(mul(r, h_prev), g.u_h), g.b_h));
  // (1 - z) h + z h~ = h + z (h~ - h)
  return h_prev + mul(z, cand - h_prev);
}

Vector gru_step(const GruDecoder& g, const Vector& h_prev, const Vector& e) {
  if (h_prev.size() != g.hidden_size || e.size() != g.input_size)
    throw DimensionError("gru_step: expected h of size " + std::to_string(g.hidden_size) +
                         " and e of size " + std::to_string(g.input_size));
  const Vector z = sigmoid(g.w_z.value.transpose() * e + g.u_z.value.transpose() * h_prev +
                           g.b_z.value.transpose());
  const Vector r = sigmoid(g.w_r.value.transpose() * e + g.u_r.value.transpose() * h_prev +
                           g.b_r.value.transpose());
  const Vector cand = (g.w_h.value.transpose() * e +
                       g.u_h.value.transpose() * r.cwiseProduct(h_prev) + g.b_h.value.transpose())
                          .array()
                          .tanh()
                          .matrix();
  return h_prev + z.cwiseProduct(cand - h_prev);
}

std::string_view head_name(HeadKind head) {
  return head == HeadKind::kBaseline ? "baseline" : "kerbs";
}

HeadKind parse_head(std::string_view name) {
  if (name == "baseline") return HeadKind::kBaseline;
  if (name == "kerbs") return HeadKind::kKerbs;
  throw ConfigError("unknown head '" + std::string(name) + "' (expected baseline or kerbs)");
}

LanguageModel::LanguageModel(HeadKind head, GruDecoder g, Parameter proj, SenseTable table)
    : gru(std::move(g)), projection(std::move(proj)), senses(std::move(table)), head_(head) {
  if (projection.value.rows() != gru.hidden_size || projection.value.cols() != senses.dim() ||
      gru.input_size != senses.dim())
    throw DimensionError("language model: GRU, projection and sense table sizes disagree");
  if (head_ == HeadKind::kBaseline && senses.max_count() != 1)
    throw ContractError("language model: the baseline head needs one sense per word");
}

LanguageModel LanguageModel::create(HeadKind head, int vocab_size, int dim, int hidden,
                                    int total_senses, SenseBounds bounds, Rng& rng) {
  GruDecoder g = GruDecoder::random(dim, hidden, rng);
  Parameter proj = uniform_param("projection", hidden, dim, rng, 0.08);
  SenseTable table;
  if (head == HeadKind::kBaseline) {
    table = SenseTable(dim, std::vector<int>(vocab_size, 1));
    table.embeddings.value = random_uniform<Tensor>(vocab_size, dim, rng, -0.08, 0.08);
  } else {
    table = SenseTable::random(vocab_size, dim, total_senses, bounds, rng);
  }
  return LanguageModel(head, std::move(g), std::move(proj), std::move(table));
}

std::vector<Parameter*> LanguageModel::parameters() {
  std::vector<Parameter*> params = gru.parameters();
  params.push_back(&projection);
  params.push_back(&senses.embeddings);
  if (head_ == HeadKind::kKerbs) params.push_back(&senses.theta);
  return params;
}

std::size_t LanguageModel::parameter_count() const {
  std::size_t n = 0;
  for (Parameter* p : const_cast<LanguageModel*>(this)->parameters())
    n += static_cast<std::size_t>(p->size());
  return n;
}

void LanguageModel::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

ForwardResult forward_batch(Tape& tape, LanguageModel& model, const Batch& batch,
                            bool keep_records) {
  using namespace ops;
  check_ids(batch.tokens, model.vocab_size());
  const int steps = batch.steps();
  const int cols = batch.batch_size();
  if (steps < 1) throw DataError("forward_batch: batch needs at least two time steps");
  if (batch.mask.rows() != steps || batch.mask.cols() != cols)
    throw DimensionError("forward_batch: mask shape " + shape_string(batch.mask) +
                         " does not match tokens");

  const bool kerbs = model.head() == HeadKind::kKerbs;
  const SenseTable& table = model.senses;
  const int width = table.max_count();
  const GruVars g = bind(tape, model.gru);
  const Var proj = tape.parameter(model.projection);
  const Var emb = tape.parameter(model.senses.embeddings);
  const Var theta = kerbs ? tape.parameter(model.senses.theta) : Var();

  ForwardResult result;
  Var h = tape.constant(Tensor::Zero(cols, model.hidden()));
  Var head_out;
  Var total;
  std::vector<int> inputs(cols), targets(cols);
  for (int t = 0; t < steps; ++t) {
    for (int b = 0; b < cols; ++b) {
      inputs[b] = batch.tokens(t, b);
      targets[b] = batch.tokens(t + 1, b);
    }
    Var e;
    if (!kerbs) {
      e = gather_rows(emb, inputs);
    } else {
      const IndexMatrix slots = table.slot_layout(inputs, width);
      const Var weights = t == 0 ? tape.constant(uniform_sense_weights(table, inputs, width))
                                 : slice_cols(head_out, 1, width);
      e = weighted_gather_rows(emb, slots, weights);
    }
    h = gru_step(g, h, e);
    const Var context = matmul(h, proj);

    Var log_p;
    if (!kerbs) {
      log_p = pick(log_softmax_rows(matmul_nt(context, emb)), targets);
    } else {
      head_out = kerbs_head(context, emb, theta, table, targets, width);
      log_p = slice_cols(head_out, 0, 1);
    }
    const std::span<const double> mask(batch.mask.row(t).data(), cols);
    const Var step_nll = affine(masked_sum(log_p, mask), -1.0, 0.0);
    total = t == 0 ? step_nll : total + step_nll;

    if (keep_records) {
      const Tensor& out = kerbs ? head_out.value() : log_p.value();
      for (int b = 0; b < cols; ++b) {
        if (mask[b] == 0.0) continue;
        TokenRecord rec;
        rec.word = targets[b];
        rec.log_prob = out(b, 0);
        if (kerbs) {
          const double p = std::exp(rec.log_prob);
          for (int j = 0; j < table.count(rec.word); ++j) rec.sense_probs.push_back(p * out(b, 1 + j));
        }
        result.records.push_back(std::move(rec));
      }
    }
  }
  result.nll = total;
  result.tokens = batch.target_tokens();
  return result;
}

Var sequence_nll(Tape& tape, LanguageModel& model, std::span<const int> tokens) {
  if (tokens.size() < 2) throw DataError("sequence_nll: need at least BOS and one target");
  EncodedCorpus corpus;
  corpus.sequences.emplace_back(tokens.begin(), tokens.end());
  for (int id : tokens)
    if (id < 0 || id >= model.vocab_size())
      throw VocabError("sequence_nll: token id " + std::to_string(id) + " outside vocabulary");
  return forward_batch(tape, model, make_batch(corpus, {0})).nll;
}

double sequence_nll(LanguageModel& model, std::span<const int> tokens) {
  Tape tape;
  return sequence_nll(tape, model, tokens).value()(0, 0);
}

std::vector<int> greedy_decode(const LanguageModel& model, int max_len) {
  std::vector<int> out;
  if (max_len <= 0) return out;
  const SenseTable& table = model.senses;
  const bool kerbs = model.head() == HeadKind::kKerbs;
  Vector h = Vector::Zero(model.hidden());
  int word = kBos < model.vocab_size() ? kBos : 0;
  Vector weights = Vector::Constant(table.count(word), 1.0 / table.count(word));
  while (static_cast<int>(out.size()) < max_len) {
    h = gru_step(model.gru, h, compose_input_embedding(word, weights, table));
    const Vector context = model.projection.value.transpose() * h;
    Vector scores;
    SenseDistribution dist;
    if (kerbs) {
      const Vector logits = sense_logits(context, table);
      scores = word_log_probs(logits, table);
      dist.probs = softmax_stable(Tensor(logits));
    } else {
      scores = table.embeddings.value * context;
    }
    Eigen::Index best = 0;
    scores.maxCoeff(&best);
    word = static_cast<int>(best);
    if (word == kEos && model.vocab_size() > kEos) break;
    out.push_back(word);
    weights = kerbs ? conditional_sense_weights(dist, word, table) : Vector::Ones(1);
  }
  return out;
}

}  // namespace kerbs
