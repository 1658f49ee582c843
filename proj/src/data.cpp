#include "kerbs/data.hpp"

#include "kerbs/errors.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>

namespace kerbs {

Vocab::Vocab() : tokens_{"<bos>", "<eos>", "<unk>"} {
  for (int i = 0; i < kReservedTokens; ++i) index_.emplace(tokens_[i], i);
}

Vocab Vocab::build(const std::vector<std::string>& lines, int max_size, int min_freq) {
  std::map<std::string, std::int64_t> freq;
  for (const std::string& line : lines)
    for (std::string& tok : split_whitespace(line)) ++freq[std::move(tok)];
  if (freq.empty()) throw DataError("build_vocab: corpus contains no tokens");

  std::vector<std::pair<std::string, std::int64_t>> ranked;
  for (auto& [tok, n] : freq)
    if (n >= min_freq) ranked.emplace_back(tok, n);
  // std::map iteration is already lexicographic; stable sort keeps that for ties.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = static_cast<std::size_t>(std::max(0, max_size - kReservedTokens));
  if (ranked.size() > keep) ranked.resize(keep);

  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [tok, n] : ranked) tokens.push_back(tok);
  return from_tokens(tokens);
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  Vocab v;
  for (const std::string& tok : tokens) {
    if (v.index_.count(tok)) throw DataError("vocab: duplicate token '" + tok + "'");
    v.index_.emplace(tok, static_cast<int>(v.tokens_.size()));
    v.tokens_.push_back(tok);
  }
  return v;
}

int Vocab::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw VocabError("vocab: id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

std::vector<std::string> Vocab::plain_tokens() const {
  return {tokens_.begin() + kReservedTokens, tokens_.end()};
}

std::vector<std::string> split_whitespace(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  };
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<int> encode_line(const Vocab& vocab, std::string_view line) {
  std::vector<int> ids{kBos};
  for (const std::string& tok : split_whitespace(line)) {
    if (static_cast<int>(ids.size()) > kMaxSentenceTokens) break;
    ids.push_back(vocab.id(tok));
  }
  ids.push_back(kEos);
  return ids;
}

std::string decode_tokens(const Vocab& vocab, const std::vector<int>& ids) {
  std::string out;
  for (int id : ids) {
    if (id < kReservedTokens) continue;
    if (!out.empty()) out += ' ';
    out += vocab.token(id);
  }
  return out;
}

std::int64_t EncodedCorpus::target_tokens() const {
  std::int64_t n = 0;
  for (const auto& s : sequences) n += static_cast<std::int64_t>(s.size()) - 1;
  return n;
}

EncodedCorpus encode_corpus(const Vocab& vocab, const std::vector<std::string>& lines,
                            std::string split) {
  EncodedCorpus corpus;
  corpus.split = std::move(split);
  corpus.sequences.reserve(lines.size());
  for (const std::string& line : lines) corpus.sequences.push_back(encode_line(vocab, line));
  return corpus;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void save_vocab(const Vocab& vocab, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (const std::string& tok : vocab.plain_tokens()) out << tok << '\n';
}

Vocab load_vocab(const std::string& path) {
  std::vector<std::string> tokens;
  for (std::string& line : read_lines(path))
    if (!line.empty()) tokens.push_back(std::move(line));
  return Vocab::from_tokens(tokens);
}

Batch make_batch(const EncodedCorpus& corpus, const std::vector<std::size_t>& members) {
  std::size_t longest = 0;
  for (std::size_t m : members) {
    if (corpus.sequences[m].size() < 2)
      throw DataError("make_batch: sequence shorter than BOS + EOS");
    longest = std::max(longest, corpus.sequences[m].size());
  }
  Batch batch;
  const auto cols = static_cast<Eigen::Index>(members.size());
  batch.tokens = IndexMatrix::Constant(static_cast<Eigen::Index>(longest), cols, kEos);
  batch.mask = Tensor::Zero(static_cast<Eigen::Index>(longest) - 1, cols);
  batch.source = members;
  for (Eigen::Index b = 0; b < cols; ++b) {
    const auto& seq = corpus.sequences[members[b]];
    for (std::size_t t = 0; t < seq.size(); ++t) batch.tokens(t, b) = seq[t];
    for (std::size_t t = 0; t + 1 < seq.size(); ++t) batch.mask(t, b) = 1.0;
  }
  return batch;
}

BatchIterator::BatchIterator(const EncodedCorpus& corpus, int batch_size, std::uint64_t seed)
    : corpus_(&corpus), batch_size_(std::max(1, batch_size)), seed_(seed) {
  if (corpus.sequences.empty()) throw DataError("batch_iter: corpus is empty");
}

std::vector<Batch> BatchIterator::epoch(int index) const {
  Rng rng(seed_ * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(index));
  std::vector<std::size_t> order(corpus_->sequences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t window = static_cast<std::size_t>(batch_size_) * 16;
  for (std::size_t begin = 0; begin < order.size(); begin += window) {
    const auto first = order.begin() + static_cast<std::ptrdiff_t>(begin);
    const auto last = order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), begin + window));
    std::stable_sort(first, last, [&](std::size_t a, std::size_t b) {
      return corpus_->sequences[a].size() < corpus_->sequences[b].size();
    });
  }

  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size_) {
    const std::size_t end = std::min(order.size(), begin + batch_size_);
    groups.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                        order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  std::shuffle(groups.begin(), groups.end(), rng);

  std::vector<Batch> batches;
  batches.reserve(groups.size());
  for (const auto& g : groups) batches.push_back(make_batch(*corpus_, g));
  return batches;
}

}  // namespace kerbs
