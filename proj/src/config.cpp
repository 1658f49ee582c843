#include "kerbs/config.hpp"

#include "kerbs/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace kerbs {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& value) {
  if (value == "-inf") return -std::numeric_limits<double>::infinity();
  if (value == "inf") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ConfigError("config: key '" + key + "' expects a number, got '" + value + "'");
  return out;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& value) {
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + value + "'");
  return out;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

int TrainConfig::resolved_senses(int vocab) const {
  if (head == HeadKind::kBaseline) return vocab;
  if (total_senses > 0) return total_senses;
  return static_cast<int>(std::lround(sense_ratio * vocab));
}

void TrainConfig::validate(int vocab) const {
  const auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  if (min_senses < 1) fail("min_senses must be >= 1");
  if (max_senses < min_senses) fail("max_senses must be >= min_senses");
  if (!(beta > 0.0 && beta < 1.0)) fail("beta must lie in (0, 1)");
  if (q < 1) fail("q must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail("lr must be finite and >= 0");
  if (!(decay_rate > 0.0 && decay_rate <= 1.0)) fail("decay_rate must lie in (0, 1]");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (max_epochs < 0) fail("max_epochs must be >= 0");
  if (patience < 1) fail("patience must be >= 1");
  if (dim < 1 || hidden < 1) fail("dim and hidden must be >= 1");
  if (std::isnan(epsilon)) fail("epsilon must not be NaN");
  if (vocab >= 0 && head == HeadKind::kKerbs) {
    const long long m = resolved_senses(vocab);
    if (m < static_cast<long long>(vocab) * min_senses ||
        m > static_cast<long long>(vocab) * max_senses)
      fail("total_senses " + std::to_string(m) + " outside [V*min_senses, V*max_senses] for V=" +
           std::to_string(vocab));
  }
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  if (key == "head") head = parse_head(value);
  else if (key == "total_senses") total_senses = to_int<int>(key, value);
  else if (key == "sense_ratio") sense_ratio = to_double(key, value);
  else if (key == "q") q = to_int<int>(key, value);
  else if (key == "epsilon") epsilon = to_double(key, value);
  else if (key == "beta") beta = to_double(key, value);
  else if (key == "min_senses") min_senses = to_int<int>(key, value);
  else if (key == "max_senses") max_senses = to_int<int>(key, value);
  else if (key == "lr") lr = to_double(key, value);
  else if (key == "decay_rate") decay_rate = to_double(key, value);
  else if (key == "min_lr") min_lr = to_double(key, value);
  else if (key == "plateau_tol") plateau_tol = to_double(key, value);
  else if (key == "batch_size") batch_size = to_int<int>(key, value);
  else if (key == "max_epochs") max_epochs = to_int<int>(key, value);
  else if (key == "seed") seed = to_int<std::uint64_t>(key, value);
  else if (key == "patience") patience = to_int<int>(key, value);
  else if (key == "dim") dim = to_int<int>(key, value);
  else if (key == "hidden") hidden = to_int<int>(key, value);
  else if (key == "vocab_size") vocab_size = to_int<int>(key, value);
  else if (key == "min_freq") min_freq = to_int<int>(key, value);
  else throw ConfigError("config: unknown key '" + key + "'");
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "head=" << head_name(head) << '\n'
     << "total_senses=" << total_senses << '\n'
     << "sense_ratio=" << format_double(sense_ratio) << '\n'
     << "q=" << q << '\n'
     << "epsilon=" << format_double(epsilon) << '\n'
     << "beta=" << format_double(beta) << '\n'
     << "min_senses=" << min_senses << '\n'
     << "max_senses=" << max_senses << '\n'
     << "lr=" << format_double(lr) << '\n'
     << "decay_rate=" << format_double(decay_rate) << '\n'
     << "min_lr=" << format_double(min_lr) << '\n'
     << "plateau_tol=" << format_double(plateau_tol) << '\n'
     << "batch_size=" << batch_size << '\n'
     << "max_epochs=" << max_epochs << '\n'
     << "seed=" << seed << '\n'
     << "patience=" << patience << '\n'
     << "dim=" << dim << '\n'
     << "hidden=" << hidden << '\n'
     << "vocab_size=" << vocab_size << '\n'
     << "min_freq=" << min_freq << '\n';
  return os.str();
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(line_no) + " is not key=value");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config: empty key on line " + std::to_string(line_no));
    out.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return out;
}

TrainConfig config_from_text(const std::string& text, TrainConfig base) {
  for (const auto& [key, value] : parse_key_values(text)) base.set(key, value);
  return base;
}

TrainConfig load_config(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return config_from_text(text.str(), base);
}

}  // namespace kerbs
