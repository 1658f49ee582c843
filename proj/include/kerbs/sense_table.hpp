#pragma once

#include "kerbs/tape.hpp"
#include "kerbs/tensor.hpp"

#include <span>
#include <vector>

namespace kerbs {

struct SenseBounds {
  int min_senses = 1;
  int max_senses = 4;
};

// A slot leaving position `from` and re-entering at `to` (rows strictly
// between shift by one toward `from`). Every per-slot array is kept aligned
// by applying the same move.
struct SlotMove {
  int from = 0;
  int to = 0;
};

void apply_slot_move(Tensor& rows, SlotMove move);
void apply_slot_move(std::vector<double>& values, SlotMove move);

// Sense embeddings w_i^j, kernel parameters theta_i^j and the allocation list.
//
// Slots are stored word-major: word i owns the contiguous block
// [offset(i), offset(i) + count(i)). The allocation list L is therefore the
// sorted owner array, and a reallocation physically moves one row.
class SenseTable {
 public:
  SenseTable() = default;
  SenseTable(int dim, std::vector<int> counts);

  // Random allocation of total_senses slots: every word gets min_senses, the
  // rest are dealt uniformly among words below max_senses. Embeddings are
  // uniform(-init_scale, init_scale), thetas uniform(-theta_scale, theta_scale).
  static SenseTable random(int vocab_size, int dim, int total_senses, SenseBounds bounds,
                           Rng& rng, double init_scale = 0.08, double theta_scale = 0.5);

  int vocab_size() const { return static_cast<int>(counts_.size()); }
  int dim() const { return dim_; }
  int total_senses() const { return static_cast<int>(owner_.size()); }
  int max_count() const;

  int offset(int word) const { return offsets_[word]; }
  int count(int word) const { return counts_[word]; }
  int owner(int slot) const { return owner_[slot]; }
  std::span<const int> counts() const { return counts_; }
  std::span<const int> allocation() const { return owner_; }

  // Throws ContractError when a sense-table invariant is broken.
  void validate(SenseBounds bounds) const;

  // Reassigns `slot` to `recipient`, placing it last in the recipient's block.
  // Embedding and theta rows move with it.
  SlotMove move_slot(int slot, int recipient);

  // slots(r, j) = j-th slot of words[r], -1 past the word's count.
  IndexMatrix slot_layout(std::span<const int> words, int width) const;

  Parameter embeddings;  // total_senses x dim
  Parameter theta;       // total_senses x 1

 private:
  void rebuild_index();

  int dim_ = 0;
  std::vector<int> counts_;
  std::vector<int> offsets_;
  std::vector<int> owner_;
};

}  // namespace kerbs
