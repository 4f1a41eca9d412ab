#pragma once

#include <cstdint>
#include <vector>

#include "tsnmt/model.hpp"
#include "tsnmt/tensor.hpp"

namespace tsnmt {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // global L2 norm; <= 0 disables clipping

  bool operator==(const AdamConfig&) const = default;
};

// Adam with bias correction and global-norm clipping.
class Adam {
 public:
  Adam() = default;
  Adam(const ModelParams& params, AdamConfig cfg);

  // grads[i] may be empty (frozen tensor); such tensors are left untouched.
  // Returns the pre-clipping global gradient norm.
  double step(ModelParams& params, const std::vector<Tensor>& grads);

  const AdamConfig& config() const { return cfg_; }
  std::uint64_t steps() const { return steps_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

  std::vector<std::uint8_t> serialize() const;
  static Adam deserialize(const std::vector<std::uint8_t>& bytes);
  bool operator==(const Adam&) const = default;

 private:
  AdamConfig cfg_;
  std::uint64_t steps_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace tsnmt
