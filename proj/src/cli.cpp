#include "kerbs/cli.hpp"

#include "kerbs/checkpoint.hpp"
#include "kerbs/config.hpp"
#include "kerbs/errors.hpp"
#include "kerbs/eval.hpp"
#include "kerbs/lemmas.hpp"
#include "kerbs/log.hpp"
#include "kerbs/training.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

namespace kerbs::cli {
namespace {

struct Options {
  std::string corpus, valid, test, head, config, out, ckpt, log_path, alloc_log;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::vector<double> thetas{-2.0, 0.0, 2.0};
  int resolution = 201;
  int n_probes = 50;
  double tol = 1e-4;
  int seeds = 10;
};

// Writes to --out when given, else to the command's stdout.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (path.empty()) return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw IoError("cannot write '" + path + "'");
    stream_ = file_.get();
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

std::string format_number(double v, int digits = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

TrainConfig resolve_config(const Options& o) {
  TrainConfig config = o.config.empty() ? TrainConfig{} : load_config(o.config);
  for (const std::string& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + kv + "' is not key=value");
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!o.head.empty()) config.head = parse_head(o.head);
  if (o.seed) config.seed = *o.seed;
  return config;
}

void echo_config(std::ostream& out, const TrainConfig& config) {
  std::istringstream lines(config.to_text());
  for (std::string line; std::getline(lines, line);) out << "config\t" << line << '\n';
}

void print_ppl(std::ostream& out, const std::string& split, double ppl) {
  out << "ppl\t" << split << '\t' << format_number(ppl) << '\n';
}

int cmd_train(const Options& o, std::ostream& out) {
  TrainConfig config = resolve_config(o);
  const std::vector<std::string> lines = read_lines(o.corpus);
  const Vocab vocab = Vocab::build(lines, config.vocab_size, config.min_freq);
  config.validate(vocab.size());
  echo_config(out, config);
  out << "vocab\t" << vocab.size() << '\n';

  const EncodedCorpus train = encode_corpus(vocab, lines, "train");
  std::optional<EncodedCorpus> valid, test;
  if (!o.valid.empty()) valid = encode_corpus(vocab, read_lines(o.valid), "valid");
  if (!o.test.empty()) test = encode_corpus(vocab, read_lines(o.test), "test");

  std::unique_ptr<std::ofstream> step_log, alloc_log;
  TrainHooks hooks;
  if (!o.log_path.empty()) {
    step_log = std::make_unique<std::ofstream>(o.log_path);
    if (!*step_log) throw IoError("cannot write '" + o.log_path + "'");
    hooks.step_log = step_log.get();
  }
  if (!o.alloc_log.empty()) {
    alloc_log = std::make_unique<std::ofstream>(o.alloc_log);
    if (!*alloc_log) throw IoError("cannot write '" + o.alloc_log + "'");
    hooks.allocation_log = alloc_log.get();
  }

  TrainResult result = run_training(config, vocab, train, valid ? &*valid : nullptr, hooks);
  Checkpoint& ckpt = result.checkpoint;
  out << "steps\t" << result.losses.size() << '\n'
      << "allocation_events\t" << result.events.size() << '\n'
      << "parameters\t" << ckpt.model.parameter_count() << '\n';
  if (!o.out.empty()) {
    save_checkpoint(ckpt, o.out);
    out << "checkpoint\t" << o.out << '\n';
  }
  if (valid) print_ppl(out, "valid", perplexity(ckpt.model, *valid, config.batch_size));
  if (test) print_ppl(out, "test", perplexity(ckpt.model, *test, config.batch_size));
  if (!valid && !test) print_ppl(out, "train", perplexity(ckpt.model, train, config.batch_size));
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  Checkpoint ckpt = load_checkpoint(o.ckpt);
  echo_config(out, ckpt.config);
  const std::string& path = !o.test.empty() ? o.test : !o.corpus.empty() ? o.corpus : o.valid;
  if (path.empty()) throw ConfigError("eval needs --test, --corpus or --valid");
  const EncodedCorpus corpus = encode_corpus(ckpt.vocab, read_lines(path), "eval");
  print_ppl(out, !o.test.empty() ? "test" : !o.corpus.empty() ? "corpus" : "valid",
            perplexity(ckpt.model, corpus, ckpt.config.batch_size));
  return kExitOk;
}

int cmd_lemmas(const Options& o, std::ostream& out) {
  const std::uint64_t base = o.seed.value_or(1);
  const int n = std::max(1, o.seeds);
  Sink csv(o.out, out);
  if (!o.out.empty()) *csv << "experiment,seed,word,slot,nearest_cluster,cosine,theta\n";
  int lemma1 = 0, lemma2 = 0;
  std::vector<double> angles;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t seed = base + static_cast<std::uint64_t>(i);
    const LemmaReport r1 = lemma1_experiment(seed);
    const LemmaReport r2 = lemma2_experiment(seed);
    lemma1 += r1.passed;
    lemma2 += r2.passed;
    angles.push_back(robustness_experiment(seed));
    if (!o.out.empty()) {
      for (const auto* r : {&r1, &r2})
        for (const SenseOutcome& s : r->senses)
          *csv << (r == &r1 ? "lemma1" : "lemma2") << ',' << seed << ',' << s.word << ','
               << s.slot << ',' << s.nearest_cluster << ',' << std::setprecision(9) << s.cosine
               << ',' << s.theta << '\n';
    }
    log::info("{} | {} | robustness {:.2f} deg", r1.summary, r2.summary, angles.back());
  }
  std::sort(angles.begin(), angles.end());
  const double median = n % 2 ? angles[n / 2] : 0.5 * (angles[n / 2 - 1] + angles[n / 2]);
  const int need = (9 * n + 9) / 10;
  const bool ok1 = lemma1 >= need, ok2 = lemma2 >= need, ok3 = median < 15.0;
  out << "lemma1\trepresented\t" << lemma1 << '/' << n << '\t' << (ok1 ? "PASS" : "FAIL") << '\n'
      << "lemma2\tordering\t" << lemma2 << '/' << n << '\t' << (ok2 ? "PASS" : "FAIL") << '\n'
      << "robustness\tmedian_deg\t" << format_number(median, 3) << '\t'
      << (ok3 ? "PASS" : "FAIL") << '\n';
  return ok1 && ok2 && ok3 ? kExitOk : kExitCheckFailed;
}

int cmd_senses(const Options& o, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(o.ckpt);
  Sink csv(o.out, out);
  write_sense_csv(*csv, sense_report(ckpt));
  return kExitOk;
}

int cmd_kernel_dump(const Options& o, std::ostream& out) {
  Sink csv(o.out, out);
  write_kernel_csv(*csv, kernel_curve_dump(o.thetas, o.resolution));
  return kExitOk;
}

int cmd_grad_audit(const Options& o, std::ostream& out) {
  const std::uint64_t seed = o.seed.value_or(1);
  Rng rng(seed);
  LanguageModel model;
  if (!o.ckpt.empty()) {
    model = load_checkpoint(o.ckpt).model;
  } else {
    const HeadKind head = o.head.empty() ? HeadKind::kKerbs : parse_head(o.head);
    const int vocab = 7;
    model = LanguageModel::create(head, vocab, 8, 8, head == HeadKind::kKerbs ? 11 : vocab,
                                  SenseBounds{}, rng);
  }
  const std::vector<int> tokens = random_sequence(model.vocab_size(), 5, rng);
  const GradAuditReport report = grad_audit(model, tokens, o.n_probes, o.tol, rng);
  if (!o.out.empty()) {
    Sink csv(o.out, out);
    write_grad_audit(*csv, report);
  }
  out << "grad-audit\tprobes=" << report.probes.size() << "\tmax_rel_error="
      << std::scientific << std::setprecision(3) << report.max_rel_error << "\ttol=" << o.tol
      << std::defaultfloat << '\t' << (report.passed ? "PASS" : "FAIL") << '\n';
  if (!report.warning.empty()) out << "warning\t" << report.warning << '\n';
  return report.passed ? kExitOk : kExitCheckFailed;
}

void error_line(std::ostream& err, std::string_view kind, const std::string& message) {
  std::string flat = message;
  std::replace(flat.begin(), flat.end(), '\n', ' ');
  err << "error kind=" << kind << " message=" << flat << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"KerBS language-model toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Seed for every random choice");
  };
  CLI::App* train = app.add_subcommand("train", "Train a language model");
  train->add_option("--corpus", o.corpus, "Training text, one sentence per line")->required();
  train->add_option("--valid", o.valid, "Validation text");
  train->add_option("--test", o.test, "Test text");
  train->add_option("--head", o.head, "Output layer")->check(CLI::IsMember({"baseline", "kerbs"}));
  train->add_option("--config", o.config, "key=value config file");
  train->add_option("--set", o.overrides, "Config override key=value (repeatable)");
  train->add_option("--out", o.out, "Checkpoint path");
  train->add_option("--log", o.log_path, "Per-step training log");
  train->add_option("--alloc-log", o.alloc_log, "Allocation event log");
  add_seed(train);

  CLI::App* eval = app.add_subcommand("eval", "Perplexity of a checkpoint on a corpus");
  eval->add_option("--ckpt", o.ckpt, "Checkpoint path")->required();
  eval->add_option("--test", o.test, "Corpus to score");
  eval->add_option("--corpus", o.corpus, "Corpus to score");
  eval->add_option("--valid", o.valid, "Corpus to score");

  CLI::App* lemmas = app.add_subcommand("lemmas", "Synthetic sense and theta experiments");
  lemmas->add_option("--seeds", o.seeds, "Number of consecutive seeds")->check(CLI::PositiveNumber);
  lemmas->add_option("--out", o.out, "CSV of per-sense outcomes");
  add_seed(lemmas);

  CLI::App* senses = app.add_subcommand("senses", "Sense counts, thetas and usage per word");
  senses->add_option("--ckpt", o.ckpt, "Checkpoint path")->required();
  senses->add_option("--out", o.out, "CSV path (default stdout)");

  CLI::App* dump = app.add_subcommand("kernel-dump", "Kernel value over a cosine grid");
  dump->add_option("--thetas", o.thetas, "Comma-separated theta values")->delimiter(',');
  dump->add_option("--resolution", o.resolution, "Grid points per theta");
  dump->add_option("--out", o.out, "CSV path (default stdout)");

  CLI::App* audit = app.add_subcommand("grad-audit", "Finite-difference gradient check");
  audit->add_option("--ckpt", o.ckpt, "Checkpoint path (default: fresh small model)");
  audit->add_option("--head", o.head, "Head of the fresh model")->check(CLI::IsMember({"baseline", "kerbs"}));
  audit->add_option("--n-probes", o.n_probes, "Probes per parameter group");
  audit->add_option("--tol", o.tol, "Maximum relative error");
  audit->add_option("--out", o.out, "CSV of probes");
  add_seed(audit);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    error_line(err, "usage", e.what());
    return kExitUsage;
  }

  try {
    if (*train) return cmd_train(o, out);
    if (*eval) return cmd_eval(o, out);
    if (*lemmas) return cmd_lemmas(o, out);
    if (*senses) return cmd_senses(o, out);
    if (*dump) return cmd_kernel_dump(o, out);
    if (*audit) return cmd_grad_audit(o, out);
  } catch (const ConfigError& e) {
    error_line(err, error_kind_name(e.kind()), e.what());
    return kExitUsage;
  } catch (const Error& e) {
    error_line(err, error_kind_name(e.kind()), e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    error_line(err, "internal", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace kerbs::cli
