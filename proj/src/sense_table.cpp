#include "kerbs/sense_table.hpp"

#include "kerbs/errors.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace kerbs {

void apply_slot_move(Tensor& rows, SlotMove move) {
  if (move.from == move.to) return;
  const Eigen::RowVectorXd saved = rows.row(move.from);
  if (move.from < move.to) {
    for (int r = move.from; r < move.to; ++r) rows.row(r) = rows.row(r + 1);
  } else {
    for (int r = move.from; r > move.to; --r) rows.row(r) = rows.row(r - 1);
  }
  rows.row(move.to) = saved;
}

void apply_slot_move(std::vector<double>& values, SlotMove move) {
  if (move.from == move.to) return;
  auto first = values.begin();
  if (move.from < move.to)
    std::rotate(first + move.from, first + move.from + 1, first + move.to + 1);
  else
    std::rotate(first + move.to, first + move.from, first + move.from + 1);
}

SenseTable::SenseTable(int dim, std::vector<int> counts) : dim_(dim), counts_(std::move(counts)) {
  if (dim <= 0) throw DimensionError("SenseTable: dimension must be positive");
  rebuild_index();
  embeddings = Parameter("sense_embeddings", Tensor::Zero(total_senses(), dim));
  theta = Parameter("sense_theta", Tensor::Zero(total_senses(), 1));
}

SenseTable SenseTable::random(int vocab_size, int dim, int total_senses, SenseBounds bounds,
                              Rng& rng, double init_scale, double theta_scale) {
  if (vocab_size <= 0) throw ConfigError("SenseTable: vocabulary is empty");
  if (bounds.min_senses < 1 || bounds.max_senses < bounds.min_senses)
    throw ConfigError("SenseTable: invalid sense bounds");
  if (static_cast<long>(total_senses) < static_cast<long>(vocab_size) * bounds.min_senses ||
      static_cast<long>(total_senses) > static_cast<long>(vocab_size) * bounds.max_senses)
    throw ConfigError("SenseTable: total senses " + std::to_string(total_senses) +
                      " infeasible for V=" + std::to_string(vocab_size) + " within bounds [" +
                      std::to_string(bounds.min_senses) + ", " +
                      std::to_string(bounds.max_senses) + "]");
  std::vector<int> counts(vocab_size, bounds.min_senses);
  std::vector<int> open(vocab_size);
  std::iota(open.begin(), open.end(), 0);
  int remaining = total_senses - vocab_size * bounds.min_senses;
  while (remaining > 0) {
    std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
    const std::size_t k = pick(rng);
    const int word = open[k];
    if (++counts[word] == bounds.max_senses) {
      open[k] = open.back();
      open.pop_back();
    }
    --remaining;
  }
  SenseTable table(dim, std::move(counts));
  table.embeddings.value = random_uniform<Tensor>(total_senses, dim, rng, -init_scale, init_scale);
  table.theta.value = random_uniform<Tensor>(total_senses, 1, rng, -theta_scale, theta_scale);
  return table;
}

int SenseTable::max_count() const {
  return counts_.empty() ? 0 : *std::max_element(counts_.begin(), counts_.end());
}

void SenseTable::rebuild_index() {
  offsets_.assign(counts_.size(), 0);
  owner_.clear();
  for (std::size_t w = 0; w < counts_.size(); ++w) {
    if (counts_[w] < 0) throw ContractError("SenseTable: negative sense count");
    offsets_[w] = static_cast<int>(owner_.size());
    owner_.insert(owner_.end(), counts_[w], static_cast<int>(w));
  }
}

void SenseTable::validate(SenseBounds bounds) const {
  long total = 0;
  for (std::size_t w = 0; w < counts_.size(); ++w) {
    const int m = counts_[w];
    if (m < bounds.min_senses || m > bounds.max_senses)
      throw ContractError("SenseTable: word " + std::to_string(w) + " owns " +
                          std::to_string(m) + " senses, outside bounds");
    total += m;
    for (int j = 0; j < m; ++j)
      if (owner_[offsets_[w] + j] != static_cast<int>(w))
        throw ContractError("SenseTable: allocation list inconsistent with per-word index");
  }
  if (total != static_cast<long>(owner_.size()))
    throw ContractError("SenseTable: sense counts do not sum to total senses");
  if (embeddings.value.rows() != total || embeddings.value.cols() != dim_ ||
      theta.value.rows() != total)
    throw ContractError("SenseTable: parameter shapes do not match allocation");
  if (!embeddings.value.allFinite() || !theta.value.allFinite())
    throw ContractError("SenseTable: non-finite parameters");
}

SlotMove SenseTable::move_slot(int slot, int recipient) {
  if (slot < 0 || slot >= total_senses() || recipient < 0 || recipient >= vocab_size())
    throw ContractError("SenseTable::move_slot: index out of range");
  const int donor = owner_[slot];
  // Position of the slot after removal and reinsertion at the end of the
  // recipient's block.
  int to = offsets_[recipient] + counts_[recipient];
  if (slot < to) --to;
  --counts_[donor];
  ++counts_[recipient];
  rebuild_index();
  const SlotMove move{slot, to};
  apply_slot_move(embeddings.value, move);
  apply_slot_move(theta.value, move);
  if (embeddings.grad.rows() == embeddings.value.rows()) apply_slot_move(embeddings.grad, move);
  if (theta.grad.rows() == theta.value.rows()) apply_slot_move(theta.grad, move);
  return move;
}

IndexMatrix SenseTable::slot_layout(std::span<const int> words, int width) const {
  IndexMatrix slots = IndexMatrix::Constant(static_cast<Eigen::Index>(words.size()), width, -1);
  for (std::size_t r = 0; r < words.size(); ++r) {
    const int w = words[r];
    if (w < 0 || w >= vocab_size()) throw VocabError("slot_layout: word id out of range");
    for (int j = 0; j < std::min(counts_[w], width); ++j) slots(r, j) = offsets_[w] + j;
  }
  return slots;
}

}  // namespace kerbs
