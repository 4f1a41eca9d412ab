#pragma once

#include <string>

#include "tsnmt/corpus.hpp"
#include "tsnmt/model.hpp"

namespace tsnmt {

// Source->pivot and pivot->target models decoded in sequence.
struct PivotChain {
  const ModelParams* source_pivot = nullptr;
  const ModelParams* pivot_target = nullptr;
  std::size_t k = 5;

  // Throws ConfigError when the pivot vocabularies disagree.
  void validate() const;
};

struct PivotResult {
  TokenSequence pivot;   // z-hat
  TokenSequence target;  // y-hat, empty when failed
  bool ok = true;
  std::string diagnostic;
};

// z-hat = top beam output of the first model on x; y-hat = top beam output of
// the second model on z-hat. An empty z-hat fails the pair.
PivotResult two_step_decode(const PivotChain& chain, const TokenSequence& x);

// Top beam hypothesis (k = 1 is greedy).
TokenSequence direct_decode(const ModelParams& params, const TokenSequence& x, std::size_t k);

}  // namespace tsnmt
