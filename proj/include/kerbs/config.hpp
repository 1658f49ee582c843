#pragma once

#include "kerbs/model.hpp"
#include "kerbs/sense_table.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace kerbs {

struct TrainConfig {
  HeadKind head = HeadKind::kKerbs;
  int total_senses = 0;  // M_sum; 0 means sense_ratio * V
  double sense_ratio = 3.0;
  int q = 500;           // optimizer steps between allocation phases
  double epsilon = -4.605170185988091;  // ln(0.01)
  double beta = 0.01;
  int min_senses = 1;
  int max_senses = 4;
  double lr = 5e-4;
  double decay_rate = 0.5;
  double min_lr = 1e-5;  // training stops once lr decays below this
  double plateau_tol = 1e-3;
  int batch_size = 32;
  int max_epochs = 10;
  std::uint64_t seed = 1;
  int patience = 3;
  int dim = 32;
  int hidden = 64;
  int vocab_size = 2000;  // cap passed to build_vocab
  int min_freq = 1;

  SenseBounds bounds() const { return {min_senses, max_senses}; }
  // M_sum for a vocabulary of size V (V for the baseline head).
  int resolved_senses(int vocab) const;

  // Throws ConfigError naming the offending key.
  void validate(int vocab) const;

  // Sets one key from its text form; throws ConfigError on unknown keys or
  // unparsable values.
  void set(const std::string& key, const std::string& value);
  // Every key as key=value lines, in a fixed order.
  std::string to_text() const;
};

// key=value lines; blank lines and lines starting with '#' are skipped.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);

TrainConfig config_from_text(const std::string& text, TrainConfig base = {});
TrainConfig load_config(const std::string& path, TrainConfig base = {});

}  // namespace kerbs
