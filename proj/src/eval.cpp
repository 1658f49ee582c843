#include "kerbs/eval.hpp"

#include "kerbs/errors.hpp"
#include "kerbs/finite_diff.hpp"
#include "kerbs/kernel.hpp"
#include "kerbs/log.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

namespace kerbs {

double perplexity(LanguageModel& model, const EncodedCorpus& corpus, int batch_size) {
  if (corpus.sequences.empty()) throw DataError("perplexity: corpus is empty");
  return std::exp(corpus_nll(model, corpus, batch_size).mean());
}

std::vector<KernelRow> kernel_curve_dump(std::span<const double> thetas, int resolution) {
  if (resolution < 2) throw ConfigError("kernel_curve_dump: resolution must be >= 2");
  std::vector<KernelRow> rows;
  rows.reserve(thetas.size() * static_cast<std::size_t>(resolution));
  for (double theta : thetas) {
    for (int i = 0; i < resolution; ++i) {
      const double c = -1.0 + 2.0 * i / (resolution - 1);
      rows.push_back({theta, c, kernel::profile(c, theta)});
    }
  }
  return rows;
}

void write_kernel_csv(std::ostream& os, const std::vector<KernelRow>& rows) {
  os << "theta,cos,kernel\n" << std::setprecision(17);
  for (const KernelRow& r : rows) os << r.theta << ',' << r.cos << ',' << r.kernel << '\n';
}

std::vector<SenseRow> sense_report(const Checkpoint& ckpt) {
  const SenseTable& table = ckpt.model.senses;
  std::vector<SenseRow> rows;
  rows.reserve(table.vocab_size());
  for (int w = 0; w < table.vocab_size(); ++w) {
    SenseRow row;
    row.word = w;
    row.token = w < ckpt.vocab.size() ? ckpt.vocab.token(w) : std::to_string(w);
    row.senses = table.count(w);
    for (int j = 0; j < row.senses; ++j) {
      const int slot = table.offset(w) + j;
      row.thetas.push_back(table.theta.value(slot, 0));
      row.usage.push_back(slot < static_cast<int>(ckpt.stats.usage.size()) ? ckpt.stats.usage[slot]
                                                                            : 0.0);
    }
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const SenseRow& a, const SenseRow& b) { return a.senses > b.senses; });
  return rows;
}

void write_sense_csv(std::ostream& os, const std::vector<SenseRow>& rows) {
  const auto join = [](const std::vector<double>& v) {
    std::ostringstream s;
    s << std::setprecision(9);
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? ";" : "") << v[i];
    return s.str();
  };
  os << "word,token,senses,thetas,usage\n";
  for (const SenseRow& r : rows)
    os << r.word << ',' << r.token << ',' << r.senses << ',' << join(r.thetas) << ','
       << join(r.usage) << '\n';
}

std::vector<int> random_sequence(int vocab_size, int length, Rng& rng) {
  if (length < 2) throw DataError("random_sequence: length must be >= 2");
  const int lo = std::min(kReservedTokens, vocab_size - 1);
  std::uniform_int_distribution<int> pick(lo, vocab_size - 1);
  std::vector<int> tokens(length);
  tokens.front() = std::min(kBos, vocab_size - 1);
  for (int i = 1; i + 1 < length; ++i) tokens[i] = pick(rng);
  tokens.back() = std::min(kEos, vocab_size - 1);
  return tokens;
}

GradAuditReport grad_audit(LanguageModel& model, std::span<const int> tokens, int n_probes,
                           double tol, Rng& rng, const GradientTamper& tamper) {
  GradAuditReport report;
  report.tol = tol;
  if (n_probes <= 0) {
    report.warning = "no probes requested; audit is vacuous";
    log::warn("grad_audit: {}", report.warning);
    return report;
  }
  model.zero_grad();
  {
    Tape tape;
    tape.backward(sequence_nll(tape, model, tokens));
  }
  if (tamper) tamper(model);

  struct Group {
    std::string name;
    std::vector<Parameter*> params;
  };
  std::vector<Parameter*> all = model.parameters();
  std::vector<Group> groups{{"gru", {all.begin(), all.begin() + 9}},
                            {"projection", {all[9]}},
                            {"sense_embeddings", {all[LanguageModel::kEmbeddingIndex]}}};
  if (model.head() == HeadKind::kKerbs)
    groups.push_back({"sense_theta", {all[LanguageModel::kThetaIndex]}});

  for (const Group& g : groups) {
    Eigen::Index group_size = 0;
    for (const Parameter* p : g.params) group_size += p->size();
    std::uniform_int_distribution<Eigen::Index> pick(0, group_size - 1);
    for (int i = 0; i < n_probes; ++i) {
      Eigen::Index flat = pick(rng);
      std::size_t which = 0;
      while (flat >= g.params[which]->size()) flat -= g.params[which++]->size();
      Parameter& p = *g.params[which];
      double& coord = p.value.data()[flat];
      const double saved = coord;
      const double numeric = richardson_derivative(
          [&](double x) {
            coord = x;
            return sequence_nll(model, tokens);
          },
          saved);
      coord = saved;
      GradProbe probe{g.name, p.name, flat, p.grad.data()[flat], numeric, 0.0};
      probe.rel_error = relative_error(probe.analytic, probe.numeric);
      report.max_rel_error = std::max(report.max_rel_error, probe.rel_error);
      report.probes.push_back(probe);
    }
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

void write_grad_audit(std::ostream& os, const GradAuditReport& report) {
  os << "group,parameter,index,analytic,numeric,rel_error\n" << std::setprecision(12);
  for (const GradProbe& p : report.probes)
    os << p.group << ',' << p.parameter << ',' << p.index << ',' << p.analytic << ','
       << p.numeric << ',' << p.rel_error << '\n';
}

}  // namespace kerbs
