#pragma once

#include "kerbs/tensor.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kerbs {

inline constexpr int kBos = 0;
inline constexpr int kEos = 1;
inline constexpr int kUnk = 2;
inline constexpr int kReservedTokens = 3;
inline constexpr int kMaxSentenceTokens = 80;

class Vocab {
 public:
  Vocab();

  // Whitespace tokens with frequency >= min_freq, most frequent first (ties
  // lexicographic), capped at max_size - 3 entries after the reserved ids.
  // Throws DataError on an empty corpus.
  static Vocab build(const std::vector<std::string>& lines, int max_size, int min_freq = 1);
  // `tokens` excludes the reserved entries.
  static Vocab from_tokens(const std::vector<std::string>& tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  int id(std::string_view token) const;  // kUnk when unknown
  const std::string& token(int id) const;
  // Non-reserved tokens in id order.
  std::vector<std::string> plain_tokens() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

std::vector<std::string> split_whitespace(std::string_view line);

// [BOS] + ids + [EOS], at most kMaxSentenceTokens words.
std::vector<int> encode_line(const Vocab& vocab, std::string_view line);
// Inverse of encode_line for in-vocabulary text (reserved tokens dropped).
std::string decode_tokens(const Vocab& vocab, const std::vector<int>& ids);

struct EncodedCorpus {
  std::string split = "train";
  std::vector<std::vector<int>> sequences;

  std::int64_t target_tokens() const;  // sum of (length - 1)
};

EncodedCorpus encode_corpus(const Vocab& vocab, const std::vector<std::string>& lines,
                            std::string split);

// Throws IoError naming the path when it cannot be read.
std::vector<std::string> read_lines(const std::string& path);
// One token per line; line n holds id n + 3.
void save_vocab(const Vocab& vocab, const std::string& path);
Vocab load_vocab(const std::string& path);

// Time-major padded batch. tokens(t, b) is the t-th token of sequence b,
// padded with EOS; mask(t, b) = 1 when tokens(t + 1, b) is a real target.
struct Batch {
  IndexMatrix tokens;
  Tensor mask;
  std::vector<std::size_t> source;  // corpus index of each column

  int batch_size() const { return static_cast<int>(tokens.cols()); }
  int steps() const { return static_cast<int>(tokens.rows()) - 1; }
  double target_tokens() const { return mask.sum(); }
};

Batch make_batch(const EncodedCorpus& corpus, const std::vector<std::size_t>& members);

// Deterministic per-epoch batching: shuffle by (seed, epoch), sort windows of
// similar length together, shuffle the batch order.
class BatchIterator {
 public:
  BatchIterator(const EncodedCorpus& corpus, int batch_size, std::uint64_t seed);

  std::vector<Batch> epoch(int index) const;

 private:
  const EncodedCorpus* corpus_;
  int batch_size_;
  std::uint64_t seed_;
};

}  // namespace kerbs
