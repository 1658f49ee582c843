#include "kerbs/allocation.hpp"

#include "kerbs/errors.hpp"
#include "kerbs/log.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

namespace kerbs {

SenseStats::SenseStats(int vocab_size, int total_senses, double rate)
    : log_p(vocab_size, 0.0),
      usage(total_senses, total_senses > 0 ? 1.0 / total_senses : 0.0),
      starve_count(vocab_size, 0.0),
      beta(rate) {}

void update_stats(SenseStats& stats, const SenseTable& table, int target_word,
                  double word_prob, std::span<const double> target_sense_probs) {
  if (!(word_prob > 0.0) || !std::isfinite(word_prob))
    throw NumericError("update_stats: word probability must be positive, got " +
                       std::to_string(word_prob));
  if (target_word < 0 || target_word >= table.vocab_size())
    throw VocabError("update_stats: target word out of range");
  const int off = table.offset(target_word);
  const int cnt = table.count(target_word);
  if (static_cast<int>(target_sense_probs.size()) != cnt)
    throw DimensionError("update_stats: expected one probability per target sense");

  const double keep = 1.0 - stats.beta;
  stats.log_p[target_word] = keep * stats.log_p[target_word] + stats.beta * std::log(word_prob);
  for (double& u : stats.usage) u *= keep;
  for (int j = 0; j < cnt; ++j) stats.usage[off + j] += stats.beta * target_sense_probs[j];
}

std::vector<int> find_starved_words(SenseStats& stats, double epsilon, int patience) {
  std::vector<int> starved;
  for (std::size_t w = 0; w < stats.log_p.size(); ++w) {
    if (stats.log_p[w] < epsilon) {
      stats.starve_count[w] += 1.0;
      if (stats.starve_count[w] >= patience) starved.push_back(static_cast<int>(w));
    } else {
      stats.starve_count[w] = 0.0;
    }
  }
  std::stable_sort(starved.begin(), starved.end(),
                   [&](int a, int b) { return stats.log_p[a] < stats.log_p[b]; });
  return starved;
}

std::optional<AllocationEvent> reallocate_sense(SenseTable& table, SenseStats& stats,
                                                int recipient, SenseBounds bounds, Rng& rng,
                                                std::int64_t step, double noise) {
  if (recipient < 0 || recipient >= table.vocab_size())
    throw VocabError("reallocate_sense: recipient out of range");
  if (table.count(recipient) >= bounds.max_senses) {
    log::debug("reallocate_sense: word {} already owns {} senses", recipient,
               table.count(recipient));
    return std::nullopt;
  }
  int donor_slot = -1;
  for (int k = 0; k < table.total_senses(); ++k) {
    const int owner = table.owner(k);
    if (owner == recipient || table.count(owner) <= bounds.min_senses) continue;
    if (donor_slot < 0 || stats.usage[k] < stats.usage[donor_slot]) donor_slot = k;
  }
  if (donor_slot < 0) {
    log::debug("reallocate_sense: no eligible donor for word {}", recipient);
    return std::nullopt;
  }

  const double mean_usage =
      std::accumulate(stats.usage.begin(), stats.usage.end(), 0.0) / stats.usage.size();

  // Recipient's usage-weighted mean sense, before the move.
  const int off = table.offset(recipient);
  const int cnt = table.count(recipient);
  Eigen::RowVectorXd center = Eigen::RowVectorXd::Zero(table.dim());
  double weight_total = 0.0;
  for (int j = 0; j < cnt; ++j) weight_total += stats.usage[off + j];
  for (int j = 0; j < cnt; ++j) {
    const double wj = weight_total > 0.0 ? stats.usage[off + j] / weight_total : 1.0 / cnt;
    center += wj * table.embeddings.value.row(off + j);
  }

  AllocationEvent event;
  event.donor_slot = donor_slot;
  event.donor_word = table.owner(donor_slot);
  event.recipient_word = recipient;
  event.step = step;

  const SlotMove move = table.move_slot(donor_slot, recipient);
  stats.apply(move);
  event.new_slot = move.to;

  std::normal_distribution<double> jitter(0.0, noise);
  for (int c = 0; c < table.dim(); ++c)
    table.embeddings.value(move.to, c) = center[c] + jitter(rng);
  table.theta.value(move.to, 0) = kReallocatedTheta;
  stats.usage[move.to] = mean_usage;
  // The recipient restarts its patience window.
  stats.starve_count[recipient] = 0.0;
  return event;
}

void write_allocation_event(std::ostream& os, const AllocationEvent& event) {
  os << event.step << '\t' << event.donor_word << '\t' << event.donor_slot << '\t'
     << event.recipient_word << '\n';
}

}  // namespace kerbs
