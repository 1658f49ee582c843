#pragma once

#include "kerbs/sense_table.hpp"
#include "kerbs/tape.hpp"

#include <span>

namespace kerbs {

// P(s = <i,j>) over every slot of a SenseTable, indexed by slot.
struct SenseDistribution {
  Vector probs;
};

// Kernel logits K_{theta_k}(h, w_k) for every slot. Throws
// DegenerateVectorError when |h| = 0.
Vector sense_logits(const Vector& h, const SenseTable& table);

// Softmax over the logits of all slots jointly.
SenseDistribution sense_posterior(const Vector& h, const SenseTable& table);

// P(y = i) = sum of word i's sense probabilities.
Vector word_probs(const SenseDistribution& dist, const SenseTable& table);

// Log word probabilities straight from the logits (log-sum-exp per block).
Vector word_log_probs(const Vector& logits, const SenseTable& table);

// The word's sense probabilities renormalized to sum 1; uniform when they
// all underflow.
Vector conditional_sense_weights(const SenseDistribution& dist, int word,
                                 const SenseTable& table);

// e = sum_j weights_j w_word^j.
Vector compose_input_embedding(int word, const Vector& weights, const SenseTable& table);

namespace ops {

// Fused KerBS output layer for a batch of context rows.
//
// Returns a B x (1 + width) node: column 0 is log P(y = targets[b]), columns
// 1..count(target) are the target's conditional sense weights (zero beyond).
// The value is differentiable with respect to context, embeddings and theta.
// The caller must keep `table`'s allocation unchanged until backward() ran.
Var kerbs_head(Var context, Var embeddings, Var theta, const SenseTable& table,
               std::span<const int> targets, int width);

}  // namespace ops
}  // namespace kerbs
