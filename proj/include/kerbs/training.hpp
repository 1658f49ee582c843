#pragma once

#include "kerbs/adam.hpp"
#include "kerbs/allocation.hpp"
#include "kerbs/config.hpp"
#include "kerbs/data.hpp"
#include "kerbs/model.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace kerbs {

struct Checkpoint {
  TrainConfig config;
  Vocab vocab;
  LanguageModel model;
  SenseStats stats;
  AdamState adam;
  std::int64_t step = 0;
};

struct NllTotals {
  double nll = 0.0;
  double tokens = 0.0;
  double mean() const { return nll / tokens; }
};

// Teacher-forced NLL over a corpus in fixed order. Throws DataError when the
// corpus has no targets.
NllTotals corpus_nll(LanguageModel& model, const EncodedCorpus& corpus, int batch_size = 32);

// One optimizer plus statistics over a model; the adaptation and allocation
// phases of the training loop.
class Trainer {
 public:
  Trainer(TrainConfig config, LanguageModel model);

  // Mean per-token NLL of the batch before the update. Backpropagates, takes
  // one Adam step over all parameters, clamps theta, then folds every target
  // token into the stats. Throws NumericError on a non-finite loss.
  double train_step(const Batch& batch);

  // find_starved_words followed by reallocate_sense for each starved word.
  std::vector<AllocationEvent> allocation_phase();

  // Adam moments of reallocated slots follow the slot and then restart.
  void after_slot_move(SlotMove move);

  const TrainConfig& config() const { return config_; }
  LanguageModel& model() { return model_; }
  const LanguageModel& model() const { return model_; }
  SenseStats& stats() { return stats_; }
  AdamState& adam() { return adam_; }
  std::int64_t step() const { return adam_.step; }

  std::vector<AllocationEvent> events;  // every event so far

 private:
  TrainConfig config_;
  LanguageModel model_;
  SenseStats stats_;
  AdamState adam_;
  Rng rng_;
};

struct TrainHooks {
  std::ostream* step_log = nullptr;        // step<TAB>loss<TAB>lr
  std::ostream* allocation_log = nullptr;  // one line per event
  std::function<void(const Trainer&)> after_allocation;
  std::function<void(int epoch, double valid_loss, double lr)> after_epoch;
};

struct TrainResult {
  Checkpoint checkpoint;  // parameters of the best validation epoch
  std::vector<double> losses;
  std::vector<double> valid_losses;
  std::vector<double> learning_rates;  // per step
  std::vector<AllocationEvent> events;
};

// Full training loop. Without a validation corpus the train corpus is used
// for plateau detection. Throws ConfigError before training on an infeasible
// configuration and DataError on an empty corpus.
TrainResult run_training(const TrainConfig& config, const Vocab& vocab,
                         const EncodedCorpus& train, const EncodedCorpus* valid = nullptr,
                         const TrainHooks& hooks = {});

}  // namespace kerbs
