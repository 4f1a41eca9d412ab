#include "tsnmt/pivot.hpp"

#include "tsnmt/errors.hpp"

namespace tsnmt {

void PivotChain::validate() const {
  if (source_pivot == nullptr || pivot_target == nullptr) throw ConfigError("pivot chain: missing model");
  if (k < 1) throw ConfigError("pivot chain: beam width must be >= 1");
  if (source_pivot->config().tgt_vocab != pivot_target->config().src_vocab) {
    throw ConfigError("pivot chain: source->pivot target vocabulary (" +
                      std::to_string(source_pivot->config().tgt_vocab) +
                      ") differs from pivot->target source vocabulary (" +
                      std::to_string(pivot_target->config().src_vocab) + ")");
  }
}

TokenSequence direct_decode(const ModelParams& params, const TokenSequence& x, std::size_t k) {
  return beam_search(params, x, k, default_max_len(x.size())).front().tokens;
}

PivotResult two_step_decode(const PivotChain& chain, const TokenSequence& x) {
  chain.validate();
  PivotResult r;
  r.pivot = direct_decode(*chain.source_pivot, x, chain.k);
  if (r.pivot.empty()) {
    r.ok = false;
    r.diagnostic = "empty pivot translation";
    return r;
  }
  r.target = direct_decode(*chain.pivot_target, r.pivot, chain.k);
  return r;
}

}  // namespace tsnmt
