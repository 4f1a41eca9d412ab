#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tsnmt/corpus.hpp"
#include "tsnmt/random.hpp"
#include "tsnmt/tensor.hpp"

namespace tsnmt {

struct ModelConfig {
  std::size_t src_vocab = 0;
  std::size_t tgt_vocab = 0;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t attention_dim = 32;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Parameter groups, used by freeze plans.
enum class ParamGroup { SourceEmbeddings, Encoder, Attention, Decoder, TargetEmbeddings, OutputProjection };
inline constexpr std::size_t kNumParamGroups = 6;
std::string_view group_name(ParamGroup g);
std::optional<ParamGroup> parse_group(std::string_view name);

// Learnable weights of the attentional GRU encoder-decoder. Row-vector
// convention throughout: activations are 1 x d and weights are in x out.
class ModelParams {
 public:
  enum Index : std::size_t {
    kSrcEmbed,
    kEncFwdWx, kEncFwdUh, kEncFwdUc, kEncFwdB,
    kEncBwdWx, kEncBwdUh, kEncBwdUc, kEncBwdB,
    kAttWq, kAttWk, kAttB, kAttV,
    kDecInitW, kDecInitB,
    kDecWx, kDecUh, kDecUc, kDecB,
    kTgtEmbed,
    kOutReadW, kOutReadB, kOutW, kOutB,
    kNumTensors
  };

  ModelParams() = default;
  static ModelParams zeros(const ModelConfig& cfg);
  // Uniform(-scale, scale) from a seeded generator.
  static ModelParams random(const ModelConfig& cfg, std::uint64_t seed, double scale = 0.08);

  const ModelConfig& config() const { return config_; }
  std::size_t size() const { return tensors_.size(); }
  Tensor& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor& operator[](std::size_t i) const { return tensors_[i]; }
  static std::string_view name(std::size_t i);
  static ParamGroup group(std::size_t i);
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t parameter_count() const;

  void save(const std::filesystem::path& path) const;
  static ModelParams load(const std::filesystem::path& path);
  std::vector<std::uint8_t> serialize() const;
  static ModelParams deserialize(const std::vector<std::uint8_t>& bytes);

  bool operator==(const ModelParams& o) const = default;

 private:
  ModelConfig config_;
  std::vector<Tensor> tensors_;
};

// ModelParams bound as leaves on one tape.
class BoundModel {
 public:
  // `trainable[i] == false` keeps tensor i out of the gradient.
  BoundModel(const ModelParams& params, Tape& tape, const std::vector<bool>* trainable = nullptr);

  const ModelParams& params() const { return *params_; }
  const ModelConfig& config() const { return params_->config(); }
  Tape& tape() const { return *tape_; }
  const Var& operator[](std::size_t i) const { return leaves_[i]; }
  // Gradients after tape().backward(); empty tensors for frozen entries.
  std::vector<Tensor> gradients() const;

 private:
  const ModelParams* params_;
  Tape* tape_;
  std::vector<Var> leaves_;
  std::vector<bool> trainable_;
};

struct EncodedSource {
  Var annotations;  // n x 2H, forward state || backward state per position
  Var keys;         // n x A, attention key projection of the annotations
  Var mean;         // 1 x 2H
  std::size_t length = 0;
};

struct DecoderState {
  Var hidden;  // 1 x H
  Var annotations;
  Var keys;
  TokenId prev = kBos;
};

struct StepOutput {
  Var log_probs;  // 1 x V_tgt
  Var hidden;     // next decoder hidden state
};

EncodedSource encode(const BoundModel& m, const TokenSequence& x);
DecoderState initial_state(const BoundModel& m, const EncodedSource& enc);
StepOutput decoder_step(const BoundModel& m, const DecoderState& state);
DecoderState advance(const DecoderState& state, const Var& hidden, TokenId emitted);

// Sum over j of log P(tokens_j | x, tokens_<j), with EOS appended when `with_eos`.
Var sequence_log_prob(const BoundModel& m, const TokenSequence& x, const TokenSequence& y,
                      bool with_eos = true);
// Per-position log-distributions along the teacher-forced prefix y (plus the
// final EOS position when `with_eos`), computed on m's tape.
std::vector<Var> forced_log_distributions(const BoundModel& m, const TokenSequence& x,
                                          const TokenSequence& y, bool with_eos = true);

// ---------------------------------------------------------------------------
// Gradient-free inference.

std::size_t default_max_len(std::size_t src_len);

double sequence_log_prob(const ModelParams& p, const TokenSequence& x, const TokenSequence& y,
                         bool with_eos = true);
std::vector<std::vector<double>> forced_distributions(const ModelParams& p, const TokenSequence& x,
                                                      const TokenSequence& y, bool with_eos = true);

struct Hypothesis {
  TokenSequence tokens;        // without BOS/EOS
  double log_prob = 0.0;       // sum of step_log_probs
  std::vector<double> step_log_probs;
  bool finished = false;       // ended with EOS (otherwise truncated at max_len)
};

// Stops at EOS or after max_len emitted tokens.
Hypothesis greedy_decode(const ModelParams& p, const TokenSequence& x, std::size_t max_len);
// Finished and truncated hypotheses, best first, at most k. Exact
// log-probabilities without length normalization; ties go to lower token ids.
std::vector<Hypothesis> beam_search(const ModelParams& p, const TokenSequence& x, std::size_t k,
                                    std::size_t max_len);
Hypothesis sample_decode(const ModelParams& p, const TokenSequence& x, std::size_t max_len, Rng& rng);

// Process-wide count of beam/greedy/sample searches started, for efficiency accounting.
std::uint64_t decode_calls();

}  // namespace tsnmt
