#include "tsnmt/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "tsnmt/errors.hpp"

namespace tsnmt {

namespace {
const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> r = {"<s>", "</s>", "<pad>", "<unk>"};
  return r;
}
}  // namespace

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
  tokens_ = reserved_tokens();
  tokens_.insert(tokens_.end(), tokens.begin(), tokens.end());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw DataError("duplicate vocabulary entry '" + tokens_[i] + "'");
    }
  }
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) > 0;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of size " +
                     std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenSequence Vocabulary::encode(const std::vector<std::string>& words) const {
  TokenSequence out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(id(w));
  return out;
}

std::vector<std::string> Vocabulary::decode(const TokenSequence& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId t : ids) out.push_back(token(t));
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno <= kNumReserved) {
      if (line != reserved_tokens()[lineno - 1]) {
        throw DataError(path.string() + ": line " + std::to_string(lineno) +
                        " must be reserved token " + reserved_tokens()[lineno - 1]);
      }
      continue;
    }
    tokens.push_back(line);
  }
  if (lineno < kNumReserved + 1) {
    throw DataError(path.string() + ": vocabulary needs at least one non-reserved token");
  }
  return Vocabulary(tokens);
}

std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& sentences, std::size_t max_size) {
  if (sentences.empty()) throw ContractError("build_vocab: empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& s : sentences) {
    for (const auto& w : s) {
      if (std::find(reserved_tokens().begin(), reserved_tokens().end(), w) == reserved_tokens().end()) {
        ++counts[w];
      }
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // std::map iteration is lexicographic, so a stable sort by count keeps the tie rule.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = max_size > kNumReserved ? max_size - kNumReserved : 0;
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < ranked.size() && i < keep; ++i) tokens.push_back(ranked[i].first);
  return Vocabulary(tokens);
}

std::vector<std::vector<std::string>> read_tokenized_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<std::vector<std::string>> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(tokenize(line));
  return lines;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::vector<std::string>>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& l : lines) {
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (i) out << ' ';
      out << l[i];
    }
    out << '\n';
  }
}

namespace {

using Lines = std::vector<std::vector<std::string>>;

std::pair<Lines, Lines> read_aligned(const std::filesystem::path& left, const std::filesystem::path& right) {
  auto l = read_tokenized_lines(left);
  auto r = read_tokenized_lines(right);
  if (l.size() != r.size()) {
    std::ostringstream msg;
    msg << "misaligned parallel files: " << left.string() << " has " << l.size() << " lines, "
        << right.string() << " has " << r.size() << " (first unmatched line "
        << std::min(l.size(), r.size()) + 1 << ")";
    throw DataError(msg.str());
  }
  if (l.empty()) throw DataError("empty parallel corpus " + left.string());
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (l[i].empty() || r[i].empty()) {
      throw DataError("empty sentence at line " + std::to_string(i + 1) + " of " +
                      (l[i].empty() ? left.string() : right.string()));
    }
  }
  return {std::move(l), std::move(r)};
}

}  // namespace

ParallelCorpus load_parallel(const std::filesystem::path& left, const std::filesystem::path& right,
                             const VocabPolicy& policy) {
  auto [l, r] = read_aligned(left, right);
  ParallelCorpus corpus;
  corpus.left = policy.left_vocab ? Vocabulary::load(*policy.left_vocab) : build_vocab(l, policy.max_size);
  corpus.right =
      policy.right_vocab ? Vocabulary::load(*policy.right_vocab) : build_vocab(r, policy.max_size);
  corpus.pairs.reserve(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) {
    corpus.pairs.push_back({corpus.left.encode(l[i]), corpus.right.encode(r[i])});
  }
  return corpus;
}

std::vector<SentencePair> load_parallel(const std::filesystem::path& left, const std::filesystem::path& right,
                                        const Vocabulary& left_vocab, const Vocabulary& right_vocab) {
  auto [l, r] = read_aligned(left, right);
  std::vector<SentencePair> pairs;
  pairs.reserve(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) pairs.push_back({left_vocab.encode(l[i]), right_vocab.encode(r[i])});
  return pairs;
}

void save_parallel(const ParallelCorpus& corpus, const std::filesystem::path& left,
                   const std::filesystem::path& right) {
  std::vector<std::vector<std::string>> l, r;
  for (const auto& p : corpus.pairs) {
    l.push_back(corpus.left.decode(p.src));
    r.push_back(corpus.right.decode(p.tgt));
  }
  write_lines(left, l);
  write_lines(right, r);
}

}  // namespace tsnmt
