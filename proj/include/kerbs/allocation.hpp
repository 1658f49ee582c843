#pragma once

#include "kerbs/sense_table.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace kerbs {

// Moving averages driving reallocation.
//   log_p[i] <- (1 - beta) log_p[i] + beta log P(y = i)       on steps with target i
//   usage[k] <- (1 - beta) usage[k] + beta P(s = k) [owner(k) = target]
struct SenseStats {
  std::vector<double> log_p;      // per word
  std::vector<double> usage;      // per slot
  std::vector<double> starve_count;  // per word, consecutive checks below epsilon
  double beta = 0.01;

  SenseStats() = default;
  // log_p = 0, usage = 1 / total_senses, starve_count = 0.
  SenseStats(int vocab_size, int total_senses, double beta);

  // Keeps per-slot arrays aligned with a SenseTable::move_slot.
  void apply(SlotMove move) { apply_slot_move(usage, move); }
};

// target_sense_probs[j] is P(s = <target, j>) for the target's j-th slot.
void update_stats(SenseStats& stats, const SenseTable& table, int target_word,
                  double word_prob, std::span<const double> target_sense_probs);

// Words whose log_p has been below epsilon for at least `patience`
// consecutive checks, worst first. Advances the starvation counters.
std::vector<int> find_starved_words(SenseStats& stats, double epsilon, int patience);

struct AllocationEvent {
  int donor_slot = 0;   // slot index before the move
  int donor_word = 0;
  int recipient_word = 0;
  int new_slot = 0;     // slot index after the move
  std::int64_t step = 0;
};

// Moves the least-used eligible slot to `recipient`: theta <- 1e-8,
// usage <- mean(usage), embedding <- recipient's usage-weighted mean sense
// plus N(0, noise^2). Returns nullopt (and changes nothing) when the
// recipient is at max_senses or no donor is eligible.
std::optional<AllocationEvent> reallocate_sense(SenseTable& table, SenseStats& stats,
                                                int recipient, SenseBounds bounds, Rng& rng,
                                                std::int64_t step = 0,
                                                double noise = 0.01);

inline constexpr double kReallocatedTheta = 1e-8;

// step<TAB>donor_word<TAB>slot<TAB>recipient_word
void write_allocation_event(std::ostream& os, const AllocationEvent& event);

}  // namespace kerbs
