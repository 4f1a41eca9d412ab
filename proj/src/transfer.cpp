#include "tsnmt/transfer.hpp"

#include <algorithm>

#include "tsnmt/errors.hpp"

namespace tsnmt {

FreezePlan FreezePlan::transfer_default() {
  FreezePlan p;
  p.set(ParamGroup::Decoder, true);
  p.set(ParamGroup::TargetEmbeddings, true);
  p.set(ParamGroup::OutputProjection, true);
  return p;
}

FreezePlan FreezePlan::from_map(const std::map<std::string, bool>& groups) {
  FreezePlan p;
  for (const auto& [name, f] : groups) {
    auto g = parse_group(name);
    if (!g) {
      std::string valid;
      for (std::size_t i = 0; i < kNumParamGroups; ++i) {
        valid += (i ? ", " : "") + std::string(group_name(static_cast<ParamGroup>(i)));
      }
      throw ConfigError("unknown parameter group '" + name + "' (valid: " + valid + ")");
    }
    p.set(*g, f);
  }
  return p;
}

std::map<std::string, bool> FreezePlan::to_map() const {
  std::map<std::string, bool> out;
  for (std::size_t i = 0; i < kNumParamGroups; ++i) out[std::string(group_name(static_cast<ParamGroup>(i)))] = frozen[i];
  return out;
}

std::vector<bool> FreezePlan::trainable_mask() const {
  std::vector<bool> mask(ModelParams::kNumTensors);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = !is_frozen(ModelParams::group(i));
  return mask;
}

ModelParams init_from_teacher(const ModelParams& student, const ModelParams& teacher) {
  const ModelConfig& s = student.config();
  const ModelConfig& t = teacher.config();
  if (s.tgt_vocab != t.tgt_vocab || s.embed_dim != t.embed_dim || s.hidden_dim != t.hidden_dim ||
      s.attention_dim != t.attention_dim) {
    // Report the first transferred group whose shapes disagree.
    for (std::size_t i = 0; i < ModelParams::kNumTensors; ++i) {
      const ParamGroup g = ModelParams::group(i);
      if (std::find(kTransferredGroups.begin(), kTransferredGroups.end(), g) == kTransferredGroups.end()) continue;
      if (!student[i].same_shape(teacher[i])) {
        throw ConfigError("init_from_teacher: group " + std::string(group_name(g)) + " differs (" +
                          std::string(ModelParams::name(i)) + ": student " + student[i].shape_string() +
                          ", teacher " + teacher[i].shape_string() + ")");
      }
    }
    throw ConfigError("init_from_teacher: teacher and student dimension configs differ");
  }
  ModelParams out = student;
  for (std::size_t i = 0; i < ModelParams::kNumTensors; ++i) {
    const ParamGroup g = ModelParams::group(i);
    if (std::find(kTransferredGroups.begin(), kTransferredGroups.end(), g) != kTransferredGroups.end()) {
      out[i] = teacher[i];
    }
  }
  return out;
}

}  // namespace tsnmt
