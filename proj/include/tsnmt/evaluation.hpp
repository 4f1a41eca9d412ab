#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tsnmt/corpus.hpp"
#include "tsnmt/model.hpp"

namespace tsnmt {

// ---------------------------------------------------------------------------
// BLEU

struct BleuReport {
  double bleu = 0.0;                    // in [0, 1]
  std::array<double, 4> precisions{};   // modified n-gram precisions p1..p4
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  double brevity_penalty = 1.0;
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;
  int max_order = 4;

  double ratio() const;
  // "BLEU = 41.23, 70.1/50.2/35.0/25.3 (BP=1.000, ratio=1.012, hyp_len=..., ref_len=...)"
  std::string summary() const;
};

using Words = std::vector<std::string>;

// Unsmoothed corpus BLEU; any zero precision gives 0.
BleuReport corpus_bleu(const std::vector<Words>& hyps, const std::vector<Words>& refs, int max_order = 4,
                       bool lowercase = false);
BleuReport corpus_bleu(const std::vector<TokenSequence>& hyps, const std::vector<TokenSequence>& refs,
                       int max_order = 4);

// Single pair; orders with no match use (m + 1) / (t + 1).
double sentence_bleu(const Words& hyp, const Words& ref);
double sentence_bleu(const TokenSequence& hyp, const TokenSequence& ref);

// ---------------------------------------------------------------------------
// Likelihood-based measures

// Mean over pairs of -log P(tgt | src).
double validation_loss(const ModelParams& params, std::span<const SentencePair> pairs);

enum class Approx { Greedy, Beam, Sampling };
std::string_view approx_name(Approx a);

struct KlEstimate {
  std::string method;       // e.g. "sent-greedy", "word-sampling", "sent-exact"
  double mean = 0.0;        // per sentence
  std::size_t sentences = 0;
  std::size_t skipped = 0;  // pairs whose teacher output was empty (sentence level only)
};

struct KlOptions {
  std::size_t beam_k = 5;
  std::uint64_t sampling_seed = 17;  // stream is the pair index, so checkpoints share samples
};

// Mode surrogate: mean of log P(y-hat | z; teacher) - log P(y-hat | x; student).
// pairs[i] = (x, z).
KlEstimate measure_j_sent(const ModelParams& student, const ModelParams& teacher,
                          std::span<const SentencePair> pairs, Approx approx, const KlOptions& opt = {});

// Mean over sentences of sum_j KL(p_T(. | z, y-hat_<j) || p_S(. | x, y-hat_<j)).
KlEstimate measure_j_word(const ModelParams& student, const ModelParams& teacher,
                          std::span<const SentencePair> pairs, Approx approx, const KlOptions& opt = {});

// Every output sequence within max_len emitted tokens: finished sequences
// carry EOS, length-max_len prefixes are truncated. Probabilities sum to 1.
std::vector<Hypothesis> enumerate_outputs(const ModelParams& params, const TokenSequence& x,
                                          std::size_t max_len);

// Exact KL(P(. | z; teacher) || P(. | x; student)) over the enumerated output space.
double exact_sentence_kl(const ModelParams& student, const ModelParams& teacher, const TokenSequence& x,
                         const TokenSequence& z, std::size_t max_len);
// Exact E_{y ~ P(. | z; teacher)} [-log P(y | x; student)].
double exact_expected_nll(const ModelParams& student, const ModelParams& teacher, const TokenSequence& x,
                          const TokenSequence& z, std::size_t max_len);

// Average probability of the argmax token along the model's own greedy path.
double peakedness(const ModelParams& params, std::span<const TokenSequence> inputs);

double word_kl(std::span<const double> p, std::span<const double> q);
double entropy(std::span<const double> p);

}  // namespace tsnmt
