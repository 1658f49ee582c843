#include "kerbs/training.hpp"

#include "kerbs/errors.hpp"
#include "kerbs/kernel.hpp"
#include "kerbs/log.hpp"
#include "kerbs/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace kerbs {
namespace {

std::string describe_batch(const Batch& batch) {
  std::ostringstream os;
  for (int b = 0; b < batch.batch_size(); ++b) {
    os << "  seq " << (b < static_cast<int>(batch.source.size()) ? batch.source[b] : 0) << ':';
    for (Eigen::Index t = 0; t < batch.tokens.rows(); ++t) {
      if (t > 0 && batch.mask(t - 1, b) == 0.0) break;
      os << ' ' << batch.tokens(t, b);
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace

NllTotals corpus_nll(LanguageModel& model, const EncodedCorpus& corpus, int batch_size) {
  NllTotals totals;
  const std::size_t n = corpus.sequences.size();
  const std::size_t size = static_cast<std::size_t>(std::max(1, batch_size));
  for (std::size_t begin = 0; begin < n; begin += size) {
    std::vector<std::size_t> members(std::min(size, n - begin));
    std::iota(members.begin(), members.end(), begin);
    Tape tape;
    const ForwardResult fwd = forward_batch(tape, model, make_batch(corpus, members));
    totals.nll += fwd.nll.value()(0, 0);
    totals.tokens += fwd.tokens;
  }
  if (totals.tokens <= 0.0) throw DataError("corpus '" + corpus.split + "' has no target tokens");
  return totals;
}

Trainer::Trainer(TrainConfig config, LanguageModel model)
    : config_(std::move(config)),
      model_(std::move(model)),
      stats_(model_.vocab_size(), model_.senses.total_senses(), config_.beta),
      rng_(config_.seed ^ 0xA5A5A5A55A5A5A5AULL) {
  adam_.lr = config_.lr;
}

double Trainer::train_step(const Batch& batch) {
  const bool kerbs = model_.head() == HeadKind::kKerbs;
  model_.zero_grad();
  Tape tape;
  const ForwardResult fwd = forward_batch(tape, model_, batch, kerbs);
  if (fwd.tokens <= 0.0) throw DataError("train_step: batch has no target tokens");
  const Var loss = ops::affine(fwd.nll, 1.0 / fwd.tokens, 0.0);
  const double value = loss.value()(0, 0);
  if (!std::isfinite(value)) {
    log::warn("non-finite loss at step {}; offending batch:\n{}", adam_.step + 1,
              describe_batch(batch));
    throw NumericError("train_step: non-finite loss " + std::to_string(value) + " at step " +
                       std::to_string(adam_.step + 1));
  }
  tape.backward(loss);
  const std::vector<Parameter*> params = model_.parameters();
  adam_step(adam_, params);
  if (kerbs) {
    model_.senses.theta.value =
        model_.senses.theta.value.cwiseMax(-kernel::kThetaBound).cwiseMin(kernel::kThetaBound);
    for (const TokenRecord& rec : fwd.records) {
      const double p = std::max(std::exp(rec.log_prob), std::numeric_limits<double>::min());
      update_stats(stats_, model_.senses, rec.word, p, rec.sense_probs);
    }
  }
  return value;
}

void Trainer::after_slot_move(SlotMove move) {
  for (std::size_t index : {LanguageModel::kEmbeddingIndex, LanguageModel::kThetaIndex}) {
    if (adam_.m.size() <= index) continue;
    apply_slot_move(adam_.m[index], move);
    apply_slot_move(adam_.v[index], move);
    adam_.reset_row(index, move.to);
  }
}

std::vector<AllocationEvent> Trainer::allocation_phase() {
  std::vector<AllocationEvent> phase;
  if (model_.head() != HeadKind::kKerbs) return phase;
  const std::vector<int> starved =
      find_starved_words(stats_, config_.epsilon, config_.patience);
  for (int word : starved) {
    const auto event =
        reallocate_sense(model_.senses, stats_, word, config_.bounds(), rng_, adam_.step);
    if (!event) continue;
    after_slot_move({event->donor_slot, event->new_slot});
    phase.push_back(*event);
    events.push_back(*event);
  }
  if (!phase.empty())
    log::debug("allocation at step {}: {} starved, {} moved", adam_.step, starved.size(),
               phase.size());
  return phase;
}

TrainResult run_training(const TrainConfig& config, const Vocab& vocab,
                         const EncodedCorpus& train, const EncodedCorpus* valid,
                         const TrainHooks& hooks) {
  const int vocab_size = vocab.size();
  config.validate(vocab_size);
  if (train.sequences.empty() || train.target_tokens() <= 0)
    throw DataError("run_training: training corpus is empty");

  Rng init(config.seed);
  Trainer trainer(config,
                  LanguageModel::create(config.head, vocab_size, config.dim, config.hidden,
                                        config.resolved_senses(vocab_size), config.bounds(), init));
  const bool kerbs = config.head == HeadKind::kKerbs;
  const EncodedCorpus& held_out = valid && !valid->sequences.empty() ? *valid : train;
  const BatchIterator batches(train, config.batch_size, config.seed);

  TrainResult result;
  auto snapshot = [&] {
    result.checkpoint.config = config;
    result.checkpoint.vocab = vocab;
    result.checkpoint.model = trainer.model();
    result.checkpoint.stats = trainer.stats();
    result.checkpoint.adam = trainer.adam();
    result.checkpoint.step = trainer.step();
  };
  snapshot();

  double best = std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    for (const Batch& batch : batches.epoch(epoch)) {
      const double loss = trainer.train_step(batch);
      result.losses.push_back(loss);
      result.learning_rates.push_back(trainer.adam().lr);
      if (hooks.step_log)
        *hooks.step_log << trainer.step() << '\t' << loss << '\t' << trainer.adam().lr << '\n';
      if (kerbs && trainer.step() % config.q == 0) {
        for (const AllocationEvent& e : trainer.allocation_phase()) {
          result.events.push_back(e);
          if (hooks.allocation_log) write_allocation_event(*hooks.allocation_log, e);
        }
        if (hooks.after_allocation) hooks.after_allocation(trainer);
      }
    }
    const double valid_loss = corpus_nll(trainer.model(), held_out, config.batch_size).mean();
    result.valid_losses.push_back(valid_loss);
    log::info("epoch {} valid_nll {:.6f} ppl {:.3f} lr {:.3g}", epoch + 1, valid_loss,
              std::exp(valid_loss), trainer.adam().lr);
    const bool improved = best - valid_loss >= config.plateau_tol;
    if (valid_loss < best) {
      best = valid_loss;
      snapshot();
    }
    if (!improved) trainer.adam().lr *= config.decay_rate;
    if (hooks.after_epoch) hooks.after_epoch(epoch, valid_loss, trainer.adam().lr);
    if (trainer.adam().lr < config.min_lr) break;
  }
  result.checkpoint.adam.lr = trainer.adam().lr;
  return result;
}

}  // namespace kerbs
