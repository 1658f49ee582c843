#pragma once

#include "kerbs/checkpoint.hpp"
#include "kerbs/model.hpp"

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace kerbs {

// exp(total NLL / total targets), teacher forced. Throws DataError when the
// corpus has no targets.
double perplexity(LanguageModel& model, const EncodedCorpus& corpus, int batch_size = 32);

struct KernelRow {
  double theta = 0.0;
  double cos = 0.0;
  double kernel = 0.0;
};

// K for unit vectors on an evenly spaced cos grid over [-1, 1], one row per
// (theta, cos). Throws ConfigError when resolution < 2.
std::vector<KernelRow> kernel_curve_dump(std::span<const double> thetas, int resolution);
void write_kernel_csv(std::ostream& os, const std::vector<KernelRow>& rows);

struct SenseRow {
  int word = 0;
  std::string token;
  int senses = 0;
  std::vector<double> thetas;
  std::vector<double> usage;
};

// One row per word, M_i descending, then id ascending (ids are assigned by
// descending corpus frequency).
std::vector<SenseRow> sense_report(const Checkpoint& ckpt);
void write_sense_csv(std::ostream& os, const std::vector<SenseRow>& rows);

struct GradProbe {
  std::string group;
  std::string parameter;
  Eigen::Index index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradAuditReport {
  std::vector<GradProbe> probes;
  double max_rel_error = 0.0;
  double tol = 0.0;
  bool passed = true;
  std::string warning;
};

// Hook run after the analytic backward pass, before comparison; tests use
// it to corrupt gradients.
using GradientTamper = std::function<void(LanguageModel&)>;

// Finite-difference check of the sequence_nll gradient on n_probes random
// coordinates of each parameter group (gru, projection, sense_embeddings and,
// for KerBS, sense_theta).
GradAuditReport grad_audit(LanguageModel& model, std::span<const int> tokens, int n_probes,
                           double tol, Rng& rng, const GradientTamper& tamper = {});
void write_grad_audit(std::ostream& os, const GradAuditReport& report);

// Random BOS ... EOS sequence with `length` tokens over a vocabulary of V.
std::vector<int> random_sequence(int vocab_size, int length, Rng& rng);

}  // namespace kerbs
