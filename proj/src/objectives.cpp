#include "tsnmt/objectives.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "tsnmt/errors.hpp"

namespace tsnmt {

namespace {

constexpr std::array<std::string_view, 7> kMethodNames = {
    "mle", "sent-greedy", "sent-beam", "sent-kbest", "word-greedy", "word-beam", "word-sampling"};

Var mean_of(Tape& tape, std::vector<Var>& terms, double denom) {
  if (terms.empty()) return tape.constant(0.0);
  Var total = terms.size() == 1 ? terms.front() : sum(concat_cols(terms));
  return scale(total, 1.0 / denom);
}

}  // namespace

std::string_view method_name(Method m) { return kMethodNames[static_cast<std::size_t>(m)]; }

std::optional<Method> parse_method(std::string_view name) {
  for (std::size_t i = 0; i < kMethodNames.size(); ++i) {
    if (kMethodNames[i] == name) return static_cast<Method>(i);
  }
  return std::nullopt;
}

const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names(kMethodNames.begin(), kMethodNames.end());
  return names;
}

bool is_teaching(Method m) { return m != Method::MLE; }

bool is_word_level(Method m) {
  return m == Method::WordGreedy || m == Method::WordBeam || m == Method::WordSampling;
}

void check_teacher_compatible(const ModelParams& student, const ModelParams& teacher) {
  if (student.config().tgt_vocab != teacher.config().tgt_vocab) {
    throw ConfigError("teacher target vocabulary (" + std::to_string(teacher.config().tgt_vocab) +
                      ") differs from student target vocabulary (" +
                      std::to_string(student.config().tgt_vocab) + ")");
  }
}

DistillBatchLoss mle_loss(const BoundModel& model, std::span<const SentencePair> batch) {
  if (batch.empty()) throw ContractError("mle_loss: empty batch");
  DistillBatchLoss out;
  out.method = Method::MLE;
  std::vector<Var> terms;
  for (const auto& p : batch) {
    terms.push_back(sequence_log_prob(model, p.src, p.tgt));
    out.tokens += p.tgt.size() + 1;
  }
  out.used_pairs = batch.size();
  out.loss = scale(mean_of(model.tape(), terms, static_cast<double>(batch.size())), -1.0);
  return out;
}

std::vector<double> kbest_renormalize(std::span<const double> log_probs, double alpha) {
  if (log_probs.empty()) throw ContractError("kbest_renormalize: empty list");
  if (!(alpha > 0.0)) throw ContractError("kbest_renormalize: alpha must be positive");
  double mx = -INFINITY;
  for (double lp : log_probs) mx = std::max(mx, alpha * lp);
  std::vector<double> w(log_probs.size());
  double z = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(alpha * log_probs[i] - mx);
    z += w[i];
  }
  for (double& v : w) v /= z;
  return w;
}

TeacherTarget teacher_target(const ModelParams& teacher, const TokenSequence& z, Method m,
                             const TeachingConfig& cfg, Rng* rng) {
  TeacherTarget t;
  const std::size_t max_len = default_max_len(z.size());
  switch (m) {
    case Method::SentGreedy:
    case Method::WordGreedy: {
      Hypothesis h = greedy_decode(teacher, z, max_len);
      if (!h.tokens.empty()) t.sequences.push_back(std::move(h.tokens));
      break;
    }
    case Method::SentBeam:
    case Method::WordBeam: {
      auto beam = beam_search(teacher, z, cfg.beam_k, max_len);
      if (!beam.front().tokens.empty()) t.sequences.push_back(std::move(beam.front().tokens));
      break;
    }
    case Method::WordSampling: {
      if (rng == nullptr) throw ContractError("teacher_target: word-sampling needs a random source");
      Hypothesis h = sample_decode(teacher, z, max_len, *rng);
      if (!h.tokens.empty()) t.sequences.push_back(std::move(h.tokens));
      break;
    }
    case Method::SentKBest: {
      std::vector<double> scores;
      for (auto& h : beam_search(teacher, z, cfg.kbest_k, max_len)) {
        if (h.tokens.empty()) continue;
        scores.push_back(h.log_prob);
        t.sequences.push_back(std::move(h.tokens));
      }
      if (!t.sequences.empty()) t.weights = kbest_renormalize(scores, cfg.kbest_alpha);
      return t;
    }
    case Method::MLE:
      throw ContractError("teacher_target: mle has no teacher");
  }
  if (t.sequences.empty()) return t;
  t.weights = {1.0};
  if (is_word_level(m)) {
    const auto dists = forced_distributions(teacher, z, t.sequences.front());
    const std::size_t V = teacher.config().tgt_vocab;
    t.distributions = Tensor(dists.size(), V);
    for (std::size_t j = 0; j < dists.size(); ++j) {
      std::copy(dists[j].begin(), dists[j].end(), t.distributions.data() + j * V);
    }
  }
  return t;
}

DistillBatchLoss teaching_loss(const BoundModel& student, std::span<const SentencePair> batch,
                               std::span<const TeacherTarget> targets, Method m) {
  if (batch.empty()) throw ContractError("teaching_loss: empty batch");
  if (batch.size() != targets.size()) throw ContractError("teaching_loss: one teacher target per pair required");
  if (!is_teaching(m)) throw ContractError("teaching_loss: mle is not a teaching method");
  DistillBatchLoss out;
  out.method = m;
  std::vector<Var> terms;
  const bool word = is_word_level(m);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const TeacherTarget& t = targets[i];
    if (t.skipped()) {
      ++out.skipped_pairs;
      continue;
    }
    ++out.used_pairs;
    if (word) {
      const TokenSequence& y = t.sequences.front();
      auto logp = forced_log_distributions(student, batch[i].src, y);
      if (t.distributions.rows() != logp.size() || t.distributions.cols() != student.config().tgt_vocab) {
        throw ContractError("teaching_loss: teacher distributions do not match the target");
      }
      terms.push_back(weighted_sum(concat_rows(logp), t.distributions));
      out.tokens += y.size() + 1;
    } else {
      for (std::size_t k = 0; k < t.sequences.size(); ++k) {
        Var lp = sequence_log_prob(student, batch[i].src, t.sequences[k]);
        terms.push_back(t.weights[k] == 1.0 ? lp : scale(lp, t.weights[k]));
        out.tokens += t.sequences[k].size() + 1;
      }
    }
  }
  const double denom = word ? static_cast<double>(out.tokens) : static_cast<double>(out.used_pairs);
  out.loss = scale(mean_of(student.tape(), terms, std::max(denom, 1.0)), -1.0);
  return out;
}

DistillBatchLoss sent_teaching_loss(const BoundModel& student, const ModelParams& teacher,
                                    std::span<const SentencePair> batch, Method m,
                                    const TeachingConfig& cfg) {
  if (m != Method::SentGreedy && m != Method::SentBeam && m != Method::SentKBest) {
    throw ContractError("sent_teaching_loss: not a sentence-level method");
  }
  check_teacher_compatible(student.params(), teacher);
  std::vector<TeacherTarget> targets;
  for (const auto& p : batch) targets.push_back(teacher_target(teacher, p.tgt, m, cfg));
  return teaching_loss(student, batch, targets, m);
}

DistillBatchLoss word_teaching_loss(const BoundModel& student, const ModelParams& teacher,
                                    std::span<const SentencePair> batch, Method m, Rng& rng,
                                    const TeachingConfig& cfg) {
  if (!is_word_level(m)) throw ContractError("word_teaching_loss: not a word-level method");
  check_teacher_compatible(student.params(), teacher);
  std::vector<TeacherTarget> targets;
  for (const auto& p : batch) targets.push_back(teacher_target(teacher, p.tgt, m, cfg, &rng));
  return teaching_loss(student, batch, targets, m);
}

}  // namespace tsnmt
