#include "tsnmt/evaluation.hpp"

#include <cmath>
#include <functional>

#include "tsnmt/errors.hpp"
#include "tsnmt/objectives.hpp"
#include "tsnmt/random.hpp"

namespace tsnmt {

double validation_loss(const ModelParams& params, std::span<const SentencePair> pairs) {
  if (pairs.empty()) throw ContractError("validation_loss: empty dev set");
  double total = 0.0;
  for (const auto& p : pairs) total -= sequence_log_prob(params, p.src, p.tgt);
  return total / static_cast<double>(pairs.size());
}

std::string_view approx_name(Approx a) {
  switch (a) {
    case Approx::Greedy: return "greedy";
    case Approx::Beam: return "beam";
    case Approx::Sampling: return "sampling";
  }
  return "?";
}

double word_kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DimensionError("word_kl: distributions of different sizes");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - std::log(q[i]));
  }
  return kl;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

namespace {

Hypothesis teacher_output(const ModelParams& teacher, const TokenSequence& z, Approx approx,
                          const KlOptions& opt, std::size_t index) {
  const std::size_t max_len = default_max_len(z.size());
  switch (approx) {
    case Approx::Greedy: return greedy_decode(teacher, z, max_len);
    case Approx::Beam: return beam_search(teacher, z, opt.beam_k, max_len).front();
    case Approx::Sampling: {
      Rng rng(opt.sampling_seed, index);
      return sample_decode(teacher, z, max_len, rng);
    }
  }
  throw ContractError("unknown approximation");
}

}  // namespace

KlEstimate measure_j_sent(const ModelParams& student, const ModelParams& teacher,
                          std::span<const SentencePair> pairs, Approx approx, const KlOptions& opt) {
  if (approx == Approx::Sampling) throw ContractError("measure_j_sent: sentence level uses greedy or beam");
  check_teacher_compatible(student, teacher);
  KlEstimate est;
  est.method = "sent-" + std::string(approx_name(approx));
  double total = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Hypothesis h = teacher_output(teacher, pairs[i].tgt, approx, opt, i);
    total += h.log_prob - sequence_log_prob(student, pairs[i].src, h.tokens, h.finished);
    ++est.sentences;
  }
  est.mean = est.sentences ? total / static_cast<double>(est.sentences) : 0.0;
  return est;
}

KlEstimate measure_j_word(const ModelParams& student, const ModelParams& teacher,
                          std::span<const SentencePair> pairs, Approx approx, const KlOptions& opt) {
  check_teacher_compatible(student, teacher);
  KlEstimate est;
  est.method = "word-" + std::string(approx_name(approx));
  double total = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Hypothesis h = teacher_output(teacher, pairs[i].tgt, approx, opt, i);
    const auto pt = forced_distributions(teacher, pairs[i].tgt, h.tokens, h.finished);
    const auto ps = forced_distributions(student, pairs[i].src, h.tokens, h.finished);
    for (std::size_t j = 0; j < pt.size(); ++j) total += word_kl(pt[j], ps[j]);
    ++est.sentences;
  }
  est.mean = est.sentences ? total / static_cast<double>(est.sentences) : 0.0;
  return est;
}

std::vector<Hypothesis> enumerate_outputs(const ModelParams& params, const TokenSequence& x,
                                          std::size_t max_len) {
  if (max_len < 1) throw ContractError("enumerate_outputs: max_len must be >= 1");
  Tape tape(false);
  BoundModel m(params, tape);
  const std::size_t V = params.config().tgt_vocab;
  std::vector<Hypothesis> out;
  std::function<void(const DecoderState&, Hypothesis&)> expand = [&](const DecoderState& st, Hypothesis& h) {
    if (h.tokens.size() == max_len) {
      out.push_back(h);
      return;
    }
    const StepOutput o = decoder_step(m, st);
    const Tensor& lp = o.log_probs.value();
    for (std::size_t v = 0; v < V; ++v) {
      h.step_log_probs.push_back(lp[v]);
      h.log_prob += lp[v];
      if (static_cast<TokenId>(v) == kEos) {
        h.finished = true;
        out.push_back(h);
        h.finished = false;
      } else {
        h.tokens.push_back(static_cast<TokenId>(v));
        expand(advance(st, o.hidden, static_cast<TokenId>(v)), h);
        h.tokens.pop_back();
      }
      h.log_prob -= lp[v];
      h.step_log_probs.pop_back();
    }
  };
  Hypothesis root;
  expand(initial_state(m, encode(m, x)), root);
  // Recompute the sums so each carries exactly the sum of its step terms.
  for (auto& h : out) {
    h.log_prob = 0.0;
    for (double s : h.step_log_probs) h.log_prob += s;
  }
  return out;
}

double exact_sentence_kl(const ModelParams& student, const ModelParams& teacher, const TokenSequence& x,
                         const TokenSequence& z, std::size_t max_len) {
  check_teacher_compatible(student, teacher);
  double kl = 0.0;
  for (const auto& h : enumerate_outputs(teacher, z, max_len)) {
    const double p = std::exp(h.log_prob);
    kl += p * (h.log_prob - sequence_log_prob(student, x, h.tokens, h.finished));
  }
  return kl;
}

double exact_expected_nll(const ModelParams& student, const ModelParams& teacher, const TokenSequence& x,
                          const TokenSequence& z, std::size_t max_len) {
  check_teacher_compatible(student, teacher);
  double e = 0.0;
  for (const auto& h : enumerate_outputs(teacher, z, max_len)) {
    e -= std::exp(h.log_prob) * sequence_log_prob(student, x, h.tokens, h.finished);
  }
  return e;
}

double peakedness(const ModelParams& params, std::span<const TokenSequence> inputs) {
  double total = 0.0;
  std::size_t steps = 0;
  for (const auto& x : inputs) {
    const Hypothesis h = greedy_decode(params, x, default_max_len(x.size()));
    // The greedy token is the argmax, so its step probability is the peak mass.
    for (double lp : h.step_log_probs) {
      total += std::exp(lp);
      ++steps;
    }
  }
  if (steps == 0) throw ContractError("peakedness: no inputs");
  return total / static_cast<double>(steps);
}

}  // namespace tsnmt
