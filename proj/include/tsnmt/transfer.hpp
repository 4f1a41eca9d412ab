#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "tsnmt/model.hpp"

namespace tsnmt {

struct FreezePlan {
  std::array<bool, kNumParamGroups> frozen{};

  static FreezePlan none() { return {}; }
  // Target side copied from the teacher stays fixed: decoder, target
  // embeddings, output projection. Source embeddings, encoder and attention train.
  static FreezePlan transfer_default();
  // Group name -> frozen flag; unknown names are a ConfigError.
  static FreezePlan from_map(const std::map<std::string, bool>& groups);
  std::map<std::string, bool> to_map() const;

  bool is_frozen(ParamGroup g) const { return frozen[static_cast<std::size_t>(g)]; }
  void set(ParamGroup g, bool f) { frozen[static_cast<std::size_t>(g)] = f; }
  // Per-tensor flags in ModelParams order.
  std::vector<bool> trainable_mask() const;
  bool operator==(const FreezePlan&) const = default;
};

// Groups taken over from the teacher.
inline constexpr std::array<ParamGroup, 4> kTransferredGroups = {
    ParamGroup::Attention, ParamGroup::Decoder, ParamGroup::TargetEmbeddings, ParamGroup::OutputProjection};

// Copy of `student` with the transferred groups replaced by the teacher's.
ModelParams init_from_teacher(const ModelParams& student, const ModelParams& teacher);

}  // namespace tsnmt
