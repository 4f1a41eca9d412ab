#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>

#include "tsnmt/errors.hpp"
#include "tsnmt/evaluation.hpp"

namespace tsnmt {

namespace {

template <typename T>
using NgramCounts = std::map<std::vector<T>, std::size_t>;

template <typename T>
NgramCounts<T> count_ngrams(const std::vector<T>& s, int n) {
  NgramCounts<T> out;
  const auto len = static_cast<std::ptrdiff_t>(s.size());
  for (std::ptrdiff_t i = 0; i + n <= len; ++i) ++out[std::vector<T>(s.begin() + i, s.begin() + i + n)];
  return out;
}

// Adds clipped matches and totals of one pair into the running sums.
template <typename T>
void accumulate(const std::vector<T>& hyp, const std::vector<T>& ref, int max_order, BleuReport& r) {
  r.hyp_length += hyp.size();
  r.ref_length += ref.size();
  for (int n = 1; n <= max_order; ++n) {
    const auto h = count_ngrams(hyp, n);
    const auto g = count_ngrams(ref, n);
    for (const auto& [gram, c] : h) {
      auto it = g.find(gram);
      if (it != g.end()) r.matches[n - 1] += std::min(c, it->second);
    }
    if (static_cast<int>(hyp.size()) >= n) r.totals[n - 1] += hyp.size() - static_cast<std::size_t>(n) + 1;
  }
}

void finish(BleuReport& r, bool smooth) {
  double log_sum = 0.0;
  bool zero = r.hyp_length == 0;
  for (int n = 0; n < r.max_order; ++n) {
    if (smooth && r.matches[n] == 0) {
      r.precisions[n] = 1.0 / static_cast<double>(r.totals[n] + 1);
    } else {
      r.precisions[n] = r.totals[n] ? static_cast<double>(r.matches[n]) / static_cast<double>(r.totals[n]) : 0.0;
    }
    if (r.precisions[n] <= 0.0) zero = true;
    else log_sum += std::log(r.precisions[n]);
  }
  r.brevity_penalty = 1.0;
  if (r.hyp_length > 0 && r.hyp_length < r.ref_length) {
    r.brevity_penalty = std::exp(1.0 - static_cast<double>(r.ref_length) / static_cast<double>(r.hyp_length));
  }
  r.bleu = zero ? 0.0 : r.brevity_penalty * std::exp(log_sum / r.max_order);
  r.bleu = std::min(r.bleu, 1.0);
}

Words lowered(const Words& w) {
  Words out = w;
  for (auto& s : out) {
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  return out;
}

template <typename T>
BleuReport corpus_bleu_impl(const std::vector<std::vector<T>>& hyps, const std::vector<std::vector<T>>& refs,
                            int max_order) {
  if (hyps.size() != refs.size()) {
    throw ContractError("corpus_bleu: " + std::to_string(hyps.size()) + " hypotheses but " +
                        std::to_string(refs.size()) + " references");
  }
  if (max_order < 1 || max_order > 4) throw ContractError("corpus_bleu: max_order must be in 1..4");
  BleuReport r;
  r.max_order = max_order;
  for (std::size_t i = 0; i < hyps.size(); ++i) accumulate(hyps[i], refs[i], max_order, r);
  finish(r, false);
  return r;
}

template <typename T>
double sentence_bleu_impl(const std::vector<T>& hyp, const std::vector<T>& ref) {
  if (ref.empty()) throw ContractError("sentence_bleu: empty reference");
  BleuReport r;
  accumulate(hyp, ref, 4, r);
  finish(r, true);
  return r.bleu;
}

}  // namespace

double BleuReport::ratio() const {
  return ref_length ? static_cast<double>(hyp_length) / static_cast<double>(ref_length) : 0.0;
}

std::string BleuReport::summary() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "BLEU = %.2f, %.1f/%.1f/%.1f/%.1f (BP=%.3f, ratio=%.3f, hyp_len=%zu, ref_len=%zu)",
                100 * bleu, 100 * precisions[0], 100 * precisions[1], 100 * precisions[2], 100 * precisions[3],
                brevity_penalty, ratio(), hyp_length, ref_length);
  return buf;
}

BleuReport corpus_bleu(const std::vector<Words>& hyps, const std::vector<Words>& refs, int max_order,
                       bool lowercase) {
  if (!lowercase) return corpus_bleu_impl(hyps, refs, max_order);
  std::vector<Words> h, g;
  for (const auto& s : hyps) h.push_back(lowered(s));
  for (const auto& s : refs) g.push_back(lowered(s));
  return corpus_bleu_impl(h, g, max_order);
}

BleuReport corpus_bleu(const std::vector<TokenSequence>& hyps, const std::vector<TokenSequence>& refs,
                       int max_order) {
  return corpus_bleu_impl(hyps, refs, max_order);
}

double sentence_bleu(const Words& hyp, const Words& ref) { return sentence_bleu_impl(hyp, ref); }
double sentence_bleu(const TokenSequence& hyp, const TokenSequence& ref) { return sentence_bleu_impl(hyp, ref); }

}  // namespace tsnmt
