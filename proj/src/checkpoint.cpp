#include "kerbs/checkpoint.hpp"

#include "kerbs/errors.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace kerbs {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

constexpr std::array<char, 4> kMagic{'K', 'B', 'S', '1'};
constexpr std::array<char, 4> kEnd{'K', 'E', 'N', 'D'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  void text(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void f32(const Tensor& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) put<float>(static_cast<float>(t.data()[i]));
  }
  void f64(const Tensor& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) put<double>(t.data()[i]);
  }
  void f64(const std::vector<double>& v) {
    for (double x : v) put<double>(x);
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void raw(char* out, std::size_t n) {
    need(n);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::string text() {
    const auto n = get<std::uint32_t>();
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  void f32(Tensor& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = get<float>();
  }
  void f64(Tensor& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = get<double>();
  }
  void f64(std::vector<double>& v) {
    for (double& x : v) x = get<double>();
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw CorruptionError("checkpoint: truncated at byte " + std::to_string(pos_));
  }

  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

std::vector<const Parameter*> stored_arrays(const LanguageModel& model) {
  auto& m = const_cast<LanguageModel&>(model);
  std::vector<const Parameter*> out;
  for (Parameter* p : m.gru.parameters()) out.push_back(p);
  out.push_back(&m.projection);
  out.push_back(&m.senses.embeddings);
  out.push_back(&m.senses.theta);
  return out;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const LanguageModel& model = ckpt.model;
  const SenseTable& table = model.senses;
  if (ckpt.vocab.size() != model.vocab_size())
    throw ContractError("save_checkpoint: vocabulary and model disagree on V");
  Writer w;
  w.raw(kMagic.data(), kMagic.size());
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.vocab_size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.dim()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.hidden()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(table.total_senses()));
  for (int c : table.counts()) w.put<std::uint16_t>(static_cast<std::uint16_t>(c));

  for (const Parameter* p : stored_arrays(model)) w.f32(p->value);

  const SenseStats& stats = ckpt.stats;
  if (static_cast<int>(stats.log_p.size()) != model.vocab_size() ||
      static_cast<int>(stats.usage.size()) != table.total_senses() ||
      stats.starve_count.size() != stats.log_p.size())
    throw ContractError("save_checkpoint: stats do not match the sense table");
  w.f64(stats.log_p);
  w.f64(stats.usage);
  w.f64(stats.starve_count);
  w.put<double>(stats.beta);

  w.put<std::uint8_t>(model.head() == HeadKind::kKerbs ? 1 : 0);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(ckpt.step));
  w.put<double>(ckpt.adam.lr);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(ckpt.adam.step));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.adam.m.size()));
  for (std::size_t k = 0; k < ckpt.adam.m.size(); ++k) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.adam.m[k].rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.adam.m[k].cols()));
    w.f64(ckpt.adam.m[k]);
    w.f64(ckpt.adam.v[k]);
  }
  w.text(ckpt.config.to_text());
  for (const std::string& tok : ckpt.vocab.plain_tokens()) w.text(tok);
  w.raw(kEnd.data(), kEnd.size());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));

  std::array<char, 4> magic{};
  try {
    r.raw(magic.data(), magic.size());
  } catch (const CorruptionError&) {
    throw FormatError("checkpoint '" + path + "': missing magic bytes");
  }
  if (magic != kMagic) throw FormatError("checkpoint '" + path + "': bad magic bytes");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint '" + path + "': unsupported version " + std::to_string(version));

  const auto vocab_size = static_cast<int>(r.get<std::uint32_t>());
  const auto dim = static_cast<int>(r.get<std::uint32_t>());
  const auto hidden = static_cast<int>(r.get<std::uint32_t>());
  const auto total = static_cast<int>(r.get<std::uint32_t>());
  if (vocab_size < 1 || dim < 1 || hidden < 1 || total < vocab_size)
    throw CorruptionError("checkpoint '" + path + "': inconsistent header");
  std::vector<int> counts(vocab_size);
  long long sum = 0;
  for (int& c : counts) {
    c = r.get<std::uint16_t>();
    sum += c;
  }
  if (sum != total) throw CorruptionError("checkpoint '" + path + "': sense counts do not sum to M_sum");

  GruDecoder gru = GruDecoder::zeros(dim, hidden);
  Parameter projection("projection", Tensor::Zero(hidden, dim));
  SenseTable table(dim, counts);
  for (Parameter* p : gru.parameters()) r.f32(p->value);
  r.f32(projection.value);
  r.f32(table.embeddings.value);
  r.f32(table.theta.value);

  SenseStats stats(vocab_size, total, 0.01);
  r.f64(stats.log_p);
  r.f64(stats.usage);
  r.f64(stats.starve_count);
  stats.beta = r.get<double>();

  const auto head_byte = r.get<std::uint8_t>();
  if (head_byte > 1) throw CorruptionError("checkpoint '" + path + "': unknown head tag");
  const HeadKind head = head_byte == 1 ? HeadKind::kKerbs : HeadKind::kBaseline;

  Checkpoint ckpt;
  ckpt.step = static_cast<std::int64_t>(r.get<std::uint64_t>());
  ckpt.adam.lr = r.get<double>();
  ckpt.adam.step = static_cast<std::int64_t>(r.get<std::uint64_t>());
  const auto moments = r.get<std::uint32_t>();
  if (moments > 64) throw CorruptionError("checkpoint '" + path + "': implausible optimizer state");
  for (std::uint32_t k = 0; k < moments; ++k) {
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    if (static_cast<std::size_t>(rows) * cols * 16 > r.remaining())
      throw CorruptionError("checkpoint '" + path + "': truncated optimizer state");
    Tensor m(rows, cols), v(rows, cols);
    r.f64(m);
    r.f64(v);
    ckpt.adam.m.push_back(std::move(m));
    ckpt.adam.v.push_back(std::move(v));
  }
  try {
    ckpt.config = config_from_text(r.text());
  } catch (const ConfigError& e) {
    throw CorruptionError("checkpoint '" + path + "': bad config echo: " + e.what());
  }
  std::vector<std::string> tokens(vocab_size - kReservedTokens > 0 ? vocab_size - kReservedTokens : 0);
  for (std::string& tok : tokens) tok = r.text();
  std::array<char, 4> end{};
  r.raw(end.data(), end.size());
  if (end != kEnd || r.remaining() != 0)
    throw CorruptionError("checkpoint '" + path + "': missing end marker");

  try {
    ckpt.vocab = Vocab::from_tokens(tokens);
    ckpt.model = LanguageModel(head, std::move(gru), std::move(projection), std::move(table));
  } catch (const Error& e) {
    throw CorruptionError("checkpoint '" + path + "': " + e.what());
  }
  if (ckpt.vocab.size() != vocab_size)
    throw CorruptionError("checkpoint '" + path + "': vocabulary size mismatch");
  ckpt.stats = std::move(stats);
  return ckpt;
}

Checkpoint load_checkpoint(const std::string& path, int expected_vocab) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.model.vocab_size() != expected_vocab)
    throw VocabError("checkpoint '" + path + "' has V=" + std::to_string(ckpt.model.vocab_size()) +
                     ", expected V=" + std::to_string(expected_vocab));
  return ckpt;
}

void quantize_to_storage(LanguageModel& model) {
  for (const Parameter* p : stored_arrays(model)) {
    auto* mut = const_cast<Parameter*>(p);
    for (Eigen::Index i = 0; i < mut->value.size(); ++i)
      mut->value.data()[i] = static_cast<double>(static_cast<float>(mut->value.data()[i]));
  }
}

}  // namespace kerbs
