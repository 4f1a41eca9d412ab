#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsnmt/corpus.hpp"
#include "tsnmt/model.hpp"
#include "tsnmt/random.hpp"
#include "tsnmt/tensor.hpp"

namespace tsnmt {

enum class Method { MLE, SentGreedy, SentBeam, SentKBest, WordGreedy, WordBeam, WordSampling };

std::string_view method_name(Method m);  // "mle", "sent-greedy", ...
std::optional<Method> parse_method(std::string_view name);
const std::vector<std::string>& method_names();
bool is_teaching(Method m);
bool is_word_level(Method m);

struct TeachingConfig {
  std::size_t beam_k = 5;     // SentBeam / WordBeam take the top hypothesis of this beam
  std::size_t kbest_k = 5;
  double kbest_alpha = 5e-3;
};

struct DistillBatchLoss {
  Var loss;
  std::size_t tokens = 0;      // target positions contributing, EOS included
  std::size_t used_pairs = 0;
  std::size_t skipped_pairs = 0;
  Method method = Method::MLE;
};

// Mean over the batch of -log P(y | x).
DistillBatchLoss mle_loss(const BoundModel& model, std::span<const SentencePair> batch);

// softmax(alpha * log_probs).
std::vector<double> kbest_renormalize(std::span<const double> log_probs, double alpha);

// What the teacher contributes for one (x, z) pair. Targets are teacher
// outputs y-hat without EOS; EOS is appended when the student is scored.
struct TeacherTarget {
  std::vector<TokenSequence> sequences;  // empty when the pair is skipped
  std::vector<double> weights;           // one per sequence, sums to 1
  Tensor distributions;                  // word level: (|y-hat|+1) x V teacher probabilities
  bool skipped() const { return sequences.empty(); }
};

// Runs the teacher on z. `rng` is only used by WordSampling.
TeacherTarget teacher_target(const ModelParams& teacher, const TokenSequence& z, Method m,
                             const TeachingConfig& cfg, Rng* rng = nullptr);

// Student loss from precomputed teacher targets; batch[i].src is x.
DistillBatchLoss teaching_loss(const BoundModel& student, std::span<const SentencePair> batch,
                               std::span<const TeacherTarget> targets, Method m);

// Mean over used pairs of sum_i q_i * -log P(y-hat_i | x).
DistillBatchLoss sent_teaching_loss(const BoundModel& student, const ModelParams& teacher,
                                    std::span<const SentencePair> batch, Method m,
                                    const TeachingConfig& cfg = {});

// -sum_j sum_y p_T(y | z, y-hat_<j) log p_S(y | x, y-hat_<j), averaged per token.
DistillBatchLoss word_teaching_loss(const BoundModel& student, const ModelParams& teacher,
                                    std::span<const SentencePair> batch, Method m, Rng& rng,
                                    const TeachingConfig& cfg = {});

// Throws ConfigError unless the teacher can supervise the student.
void check_teacher_compatible(const ModelParams& student, const ModelParams& teacher);

}  // namespace tsnmt
