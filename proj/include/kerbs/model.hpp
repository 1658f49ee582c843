#pragma once

#include "kerbs/data.hpp"
#include "kerbs/sense_table.hpp"
#include "kerbs/tape.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kerbs {

// Single-layer GRU, row-vector convention (inputs are 1 x d rows):
//   z  = sigmoid(e W_z + h U_z + b_z)
//   r  = sigmoid(e W_r + h U_r + b_r)
//   h~ = tanh(e W_h + (r .* h) U_h + b_h)
//   h' = (1 - z) .* h + z .* h~
struct GruDecoder {
  int input_size = 0;
  int hidden_size = 0;
  Parameter w_z, u_z, b_z;
  Parameter w_r, u_r, b_r;
  Parameter w_h, u_h, b_h;

  static GruDecoder zeros(int input_size, int hidden_size);
  static GruDecoder random(int input_size, int hidden_size, Rng& rng, double scale = 0.08);

  std::vector<Parameter*> parameters();
};

struct GruVars {
  Var w_z, u_z, b_z, w_r, u_r, b_r, w_h, u_h, b_h;
};

GruVars bind(Tape& tape, GruDecoder& gru);

// h_prev: B x d_h, e: B x d.
Var gru_step(const GruVars& gru, Var h_prev, Var e);
Vector gru_step(const GruDecoder& gru, const Vector& h_prev, const Vector& e);

enum class HeadKind { kBaseline, kKerbs };

std::string_view head_name(HeadKind head);
// Throws ConfigError for anything but "baseline" or "kerbs".
HeadKind parse_head(std::string_view name);

// GRU decoder, a d_h -> d projection and a SenseTable shared as input lookup
// and output layer. The baseline head uses one sense per word and ignores
// theta (plain tied softmax).
class LanguageModel {
 public:
  LanguageModel() = default;
  LanguageModel(HeadKind head, GruDecoder gru, Parameter projection, SenseTable senses);

  static LanguageModel create(HeadKind head, int vocab_size, int dim, int hidden,
                              int total_senses, SenseBounds bounds, Rng& rng);

  HeadKind head() const { return head_; }
  int vocab_size() const { return senses.vocab_size(); }
  int dim() const { return senses.dim(); }
  int hidden() const { return gru.hidden_size; }

  // Trainable parameters in a fixed order: nine GRU tensors, projection,
  // sense embeddings, then theta (KerBS only).
  std::vector<Parameter*> parameters();
  std::size_t parameter_count() const;
  void zero_grad();

  static constexpr std::size_t kEmbeddingIndex = 10;
  static constexpr std::size_t kThetaIndex = 11;

  GruDecoder gru;
  Parameter projection;  // hidden x dim
  SenseTable senses;

 private:
  HeadKind head_ = HeadKind::kKerbs;
};

// One valid target position of a forward pass.
struct TokenRecord {
  int word = 0;
  double log_prob = 0.0;
  std::vector<double> sense_probs;  // P(s = <word, j>), KerBS only
};

struct ForwardResult {
  Var nll;  // 1x1 masked sum of -log P over targets
  double tokens = 0.0;
  std::vector<TokenRecord> records;
};

// Teacher-forced pass over a time-major batch. Throws VocabError for ids >= V.
ForwardResult forward_batch(Tape& tape, LanguageModel& model, const Batch& batch,
                            bool keep_records = false);

// -sum_t log P(y_t | y_<t) for one sequence (at least two tokens).
Var sequence_nll(Tape& tape, LanguageModel& model, std::span<const int> tokens);
double sequence_nll(LanguageModel& model, std::span<const int> tokens);

// Argmax decoding from BOS; stops before EOS or at max_len tokens.
std::vector<int> greedy_decode(const LanguageModel& model, int max_len);

}  // namespace kerbs
