#include "tsnmt/optimizer.hpp"

#include <bit>
#include <cmath>

#include "tsnmt/errors.hpp"

namespace tsnmt {

Adam::Adam(const ModelParams& params, AdamConfig cfg) : cfg_(cfg) {
  if (!(cfg.lr > 0.0) || !(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0) ||
      !(cfg.eps > 0.0)) {
    throw ConfigError("adam: invalid hyperparameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.emplace_back(params[i].rows(), params[i].cols(), 0.0);
    v_.emplace_back(params[i].rows(), params[i].cols(), 0.0);
  }
}

double Adam::step(ModelParams& params, const std::vector<Tensor>& grads) {
  if (grads.size() != params.size() || m_.size() != params.size()) {
    throw DimensionError("adam: gradient list does not match the parameter list");
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].empty()) continue;
    if (!grads[i].same_shape(params[i])) {
      throw DimensionError("adam: gradient of " + std::string(ModelParams::name(i)) + " has shape " +
                           grads[i].shape_string() + ", parameter has " + params[i].shape_string());
    }
    if (!grads[i].all_finite()) {
      throw NumericError("non-finite gradient in parameter " + std::string(ModelParams::name(i)));
    }
    for (double g : grads[i].values()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  const double factor = cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm ? cfg_.clip_norm / norm : 1.0;

  ++steps_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].empty()) continue;
    double* p = params[i].data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    const double* g = grads[i].data();
    for (std::size_t k = 0; k < grads[i].size(); ++k) {
      const double gk = g[k] * factor;
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * gk;
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * gk * gk;
      p[k] -= cfg_.lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg_.eps);
    }
  }
  return norm;
}

namespace {

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw DataError("optimizer state truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[pos++]) << (8 * i);
  return v;
}

}  // namespace

// Layout: hyperparameters, step count, tensor count, then (rows, cols, m..., v...) per tensor.
std::vector<std::uint8_t> Adam::serialize() const {
  std::vector<std::uint8_t> out;
  for (double d : {cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.eps, cfg_.clip_norm}) put_u64(out, std::bit_cast<std::uint64_t>(d));
  put_u64(out, steps_);
  put_u64(out, m_.size());
  for (std::size_t i = 0; i < m_.size(); ++i) {
    put_u64(out, m_[i].rows());
    put_u64(out, m_[i].cols());
    for (double d : m_[i].values()) put_u64(out, std::bit_cast<std::uint64_t>(d));
    for (double d : v_[i].values()) put_u64(out, std::bit_cast<std::uint64_t>(d));
  }
  return out;
}

Adam Adam::deserialize(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  auto f64 = [&] { return std::bit_cast<double>(get_u64(bytes, pos)); };
  Adam a;
  a.cfg_.lr = f64();
  a.cfg_.beta1 = f64();
  a.cfg_.beta2 = f64();
  a.cfg_.eps = f64();
  a.cfg_.clip_norm = f64();
  a.steps_ = get_u64(bytes, pos);
  const std::uint64_t n = get_u64(bytes, pos);
  if (n > 1024) throw DataError("optimizer state: implausible tensor count");
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t r = get_u64(bytes, pos), c = get_u64(bytes, pos);
    if (r * c > bytes.size()) throw DataError("optimizer state truncated");
    Tensor m(r, c), v(r, c);
    for (double& d : m.values()) d = f64();
    for (double& d : v.values()) d = f64();
    a.m_.push_back(std::move(m));
    a.v_.push_back(std::move(v));
  }
  if (pos != bytes.size()) throw DataError("optimizer state has trailing bytes");
  return a;
}

}  // namespace tsnmt
