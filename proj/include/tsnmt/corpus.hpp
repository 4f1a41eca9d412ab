#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tsnmt {

using TokenId = std::int32_t;
// Token ids without BOS; EOS is implied at the end when scoring.
using TokenSequence = std::vector<TokenId>;

inline constexpr TokenId kBos = 0;
inline constexpr TokenId kEos = 1;
inline constexpr TokenId kPad = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kNumReserved = 4;

// Closed token inventory with BOS/EOS/PAD/UNK at ids 0..3.
class Vocabulary {
 public:
  Vocabulary();
  // `tokens` are the non-reserved entries in id order (ids start at 4).
  explicit Vocabulary(const std::vector<std::string>& tokens);

  std::size_t size() const { return tokens_.size(); }
  TokenId id(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;

  TokenSequence encode(const std::vector<std::string>& words) const;
  std::vector<std::string> decode(const TokenSequence& ids) const;

  // One token per line in id order, reserved entries included.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct SentencePair {
  TokenSequence src;
  TokenSequence tgt;
};

struct ParallelCorpus {
  std::vector<SentencePair> pairs;
  Vocabulary left;
  Vocabulary right;
};

// Whitespace tokenization; never yields empty tokens.
std::vector<std::string> tokenize(std::string_view line);

// Most frequent tokens up to `max_size` entries (reserved ids included);
// ties broken lexicographically.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& sentences, std::size_t max_size);

struct VocabPolicy {
  std::size_t max_size = 100000;
  std::optional<std::filesystem::path> left_vocab;   // load instead of building
  std::optional<std::filesystem::path> right_vocab;
};

ParallelCorpus load_parallel(const std::filesystem::path& left, const std::filesystem::path& right,
                             const VocabPolicy& policy = {});
// Encodes with fixed vocabularies; same alignment checks as above.
std::vector<SentencePair> load_parallel(const std::filesystem::path& left, const std::filesystem::path& right,
                                        const Vocabulary& left_vocab, const Vocabulary& right_vocab);
void save_parallel(const ParallelCorpus& corpus, const std::filesystem::path& left,
                   const std::filesystem::path& right);

std::vector<std::vector<std::string>> read_tokenized_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, const std::vector<std::vector<std::string>>& lines);

// ---------------------------------------------------------------------------
// Synthetic trilingual corpora.

struct GeneratorConfig {
  std::uint64_t seed = 1;
  std::size_t xz_pairs = 5000;
  std::size_t zy_pairs = 5000;
  std::size_t dev_pairs = 500;
  std::size_t test_pairs = 500;
  std::size_t latent_vocab = 40;
  std::size_t surface_vocab = 50;
  std::size_t min_len = 3;
  std::size_t max_len = 9;
  // Consecutive blocks of this many source-language tokens are reversed.
  std::size_t reorder_window = 2;

  void validate() const;
};

// Same seed and pivot-target side; source-pivot data cut to 1/8.
GeneratorConfig small_source_pivot(GeneratorConfig cfg);

// How one synthetic language renders a latent sentence.
struct LanguageSpec {
  std::string name;                   // "x", "z" or "y"
  std::vector<std::size_t> content;   // latent symbol -> surface content index
  std::size_t function_words = 0;
  std::size_t insertion_offset = 0;   // marker inserted before t when (t + offset) % 8 == 0
  std::size_t reorder_window = 1;     // 1 = keep order

  std::string content_token(std::size_t index) const;
  std::string function_token(std::size_t index) const;
  std::vector<std::string> alphabet() const;
  std::vector<std::string> render(const std::vector<std::size_t>& latent) const;
};

struct TrilingualSentence {
  TokenSequence x;
  TokenSequence z;
  TokenSequence y;
};

struct TrilingualSplit {
  GeneratorConfig config;
  LanguageSpec lang_x, lang_z, lang_y;
  Vocabulary vocab_x, vocab_z, vocab_y;
  std::vector<SentencePair> xz_train;  // D_{x,z}
  std::vector<SentencePair> zy_train;  // D_{z,y}
  std::vector<TrilingualSentence> dev;
  std::vector<TrilingualSentence> test;

  std::vector<SentencePair> dev_xz() const;
  std::vector<SentencePair> dev_xy() const;
  std::vector<SentencePair> dev_zy() const;
  std::vector<SentencePair> test_xy() const;
  std::vector<SentencePair> test_xz() const;
};

TrilingualSplit generate_trilingual(const GeneratorConfig& cfg);

// Writes train/dev/test files and vocabularies under `dir`; returns the
// relative file names written, in a fixed order.
std::vector<std::string> write_split(const TrilingualSplit& split, const std::filesystem::path& dir);

}  // namespace tsnmt
