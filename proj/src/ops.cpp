#include <algorithm>
#include <cmath>
#include <sstream>

#include "tsnmt/errors.hpp"
#include "tsnmt/tensor.hpp"

namespace tsnmt {
namespace {

Tape& common_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands live on different tapes");
  return a.tape();
}

std::string shapes(const char* op, const Tensor& a, const Tensor& b) {
  std::ostringstream s;
  s << op << ": incompatible shapes " << a.shape_string() << " and " << b.shape_string();
  return s.str();
}

// c[m x n] += a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m x k] += g[m x n] * b[k x n]^T
void gemm_nt(const double* g, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      c[i * k + p] += acc;
    }
  }
}

// c[k x n] += a[m x k]^T * g[m x n]
void gemm_tn(const double* a, const double* g, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

enum class BinaryKind { Add, Sub, Mul };

Var binary(BinaryKind kind, const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool a_scalar = av.size() == 1 && bv.size() != 1;
  const bool b_scalar = bv.size() == 1 && av.size() != 1;
  if (!a_scalar && !b_scalar && !av.same_shape(bv)) {
    const char* name = kind == BinaryKind::Add ? "add" : kind == BinaryKind::Sub ? "sub" : "mul";
    throw DimensionError(shapes(name, av, bv));
  }
  const Tensor& shape = a_scalar ? bv : av;
  Tensor out(shape.rows(), shape.cols());
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a_scalar ? av[0] : av[i];
    const double y = b_scalar ? bv[0] : bv[i];
    switch (kind) {
      case BinaryKind::Add: out[i] = x + y; break;
      case BinaryKind::Sub: out[i] = x - y; break;
      case BinaryKind::Mul: out[i] = x * y; break;
    }
  }
  const std::uint32_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), a.requires_grad() || b.requires_grad(),
                  [kind, ia, ib, a_scalar, b_scalar](Tape& tp, std::uint32_t self) {
                    const Tensor& g = tp.grad_of(self);
                    const std::size_t n = g.size();
                    if (tp.requires_grad(ia)) {
                      Tensor& ga = tp.grad_buffer(ia);
                      const Tensor& bv = tp.value_of(ib);
                      for (std::size_t i = 0; i < n; ++i) {
                        double d = g[i];
                        if (kind == BinaryKind::Mul) d *= b_scalar ? bv[0] : bv[i];
                        ga[a_scalar ? 0 : i] += d;
                      }
                    }
                    if (tp.requires_grad(ib)) {
                      Tensor& gb = tp.grad_buffer(ib);
                      const Tensor& av = tp.value_of(ia);
                      for (std::size_t i = 0; i < n; ++i) {
                        double d = g[i];
                        if (kind == BinaryKind::Sub) d = -d;
                        if (kind == BinaryKind::Mul) d *= a_scalar ? av[0] : av[i];
                        gb[b_scalar ? 0 : i] += d;
                      }
                    }
                  });
}

// Unary op whose derivative is expressed through input x and output y.
template <typename F, typename D>
Var unary(const Var& a, F f, D dfdx) {
  Tape& t = a.tape();
  const Tensor& av = a.value();
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  const std::uint32_t ia = a.id();
  return t.record(std::move(out), a.requires_grad(), [ia, dfdx](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad_of(self);
    const Tensor& x = tp.value_of(ia);
    const Tensor& y = tp.value_of(self);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx(x[i], y[i]);
  });
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) throw DimensionError(shapes("matmul", av, bv));
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out(m, n);
  gemm_nn(av.data(), bv.data(), out.data(), m, k, n);
  const std::uint32_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), a.requires_grad() || b.requires_grad(),
                  [ia, ib, m, k, n](Tape& tp, std::uint32_t self) {
                    const Tensor& g = tp.grad_of(self);
                    if (tp.requires_grad(ia)) {
                      gemm_nt(g.data(), tp.value_of(ib).data(), tp.grad_buffer(ia).data(), m, k, n);
                    }
                    if (tp.requires_grad(ib)) {
                      gemm_tn(tp.value_of(ia).data(), g.data(), tp.grad_buffer(ib).data(), m, k, n);
                    }
                  });
}

Var add(const Var& a, const Var& b) { return binary(BinaryKind::Add, a, b); }
Var sub(const Var& a, const Var& b) { return binary(BinaryKind::Sub, a, b); }
Var mul(const Var& a, const Var& b) { return binary(BinaryKind::Mul, a, b); }

Var add(const Var& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var sub(double s, const Var& a) {
  return unary(a, [s](double x) { return s - x; }, [](double, double) { return -1.0; });
}

Var scale(const Var& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  const Tensor& av = a.value();
  for (std::size_t i = 0; i < av.size(); ++i) {
    if (!(av[i] > 0.0)) {
      std::ostringstream msg;
      msg << "log of non-positive value " << av[i] << " at index " << i;
      throw DomainError(msg.str());
    }
  }
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var elementwise(ElementwiseOp op, std::span<const Var> args) {
  const bool is_binary = op == ElementwiseOp::Add || op == ElementwiseOp::Sub ||
                         op == ElementwiseOp::Mul;
  if (args.size() != (is_binary ? 2u : 1u)) {
    throw ContractError("elementwise: wrong number of arguments");
  }
  switch (op) {
    case ElementwiseOp::Add: return add(args[0], args[1]);
    case ElementwiseOp::Sub: return sub(args[0], args[1]);
    case ElementwiseOp::Mul: return mul(args[0], args[1]);
    case ElementwiseOp::Tanh: return tanh(args[0]);
    case ElementwiseOp::Sigmoid: return sigmoid(args[0]);
    case ElementwiseOp::Exp: return exp(args[0]);
    case ElementwiseOp::Log: return log(args[0]);
  }
  throw ContractError("elementwise: unknown op");
}

Var softmax(const Var& logits) {
  const Tensor& x = logits.value();
  if (x.cols() == 0) throw DimensionError("softmax: empty last axis");
  Tensor out(x.rows(), x.cols());
  const std::size_t d = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* xr = x.data() + r * d;
    double* yr = out.data() + r * d;
    const double mx = *std::max_element(xr, xr + d);
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      z += yr[j];
    }
    for (std::size_t j = 0; j < d; ++j) yr[j] /= z;
  }
  const std::uint32_t ia = logits.id();
  return logits.tape().record(std::move(out), logits.requires_grad(),
                              [ia, d](Tape& tp, std::uint32_t self) {
                                const Tensor& g = tp.grad_of(self);
                                const Tensor& y = tp.value_of(self);
                                Tensor& ga = tp.grad_buffer(ia);
                                for (std::size_t r = 0; r < y.rows(); ++r) {
                                  const std::size_t o = r * d;
                                  double dot = 0.0;
                                  for (std::size_t j = 0; j < d; ++j) dot += g[o + j] * y[o + j];
                                  for (std::size_t j = 0; j < d; ++j) {
                                    ga[o + j] += y[o + j] * (g[o + j] - dot);
                                  }
                                }
                              });
}

Var log_softmax(const Var& logits) {
  const Tensor& x = logits.value();
  if (x.cols() == 0) throw DimensionError("log_softmax: empty last axis");
  Tensor out(x.rows(), x.cols());
  const std::size_t d = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* xr = x.data() + r * d;
    double* yr = out.data() + r * d;
    const double mx = *std::max_element(xr, xr + d);
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) z += std::exp(xr[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < d; ++j) yr[j] = xr[j] - lse;
  }
  const std::uint32_t ia = logits.id();
  return logits.tape().record(std::move(out), logits.requires_grad(),
                              [ia, d](Tape& tp, std::uint32_t self) {
                                const Tensor& g = tp.grad_of(self);
                                const Tensor& y = tp.value_of(self);
                                Tensor& ga = tp.grad_buffer(ia);
                                for (std::size_t r = 0; r < y.rows(); ++r) {
                                  const std::size_t o = r * d;
                                  double gs = 0.0;
                                  for (std::size_t j = 0; j < d; ++j) gs += g[o + j];
                                  for (std::size_t j = 0; j < d; ++j) {
                                    ga[o + j] += g[o + j] - std::exp(y[o + j]) * gs;
                                  }
                                }
                              });
}

Var gather_rows(const Var& table, std::span<const std::int32_t> ids) {
  const Tensor& tv = table.value();
  const std::size_t d = tv.cols();
  for (std::int32_t id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= tv.rows()) {
      std::ostringstream msg;
      msg << "gather_rows: id " << id << " out of range for table with " << tv.rows() << " rows";
      throw IndexError(msg.str());
    }
  }
  Tensor out(ids.size(), d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  const std::uint32_t ia = table.id();
  std::vector<std::int32_t> idv(ids.begin(), ids.end());
  return table.tape().record(std::move(out), table.requires_grad(),
                             [ia, d, idv = std::move(idv)](Tape& tp, std::uint32_t self) {
                               const Tensor& g = tp.grad_of(self);
                               Tensor& ga = tp.grad_buffer(ia);
                               for (std::size_t i = 0; i < idv.size(); ++i) {
                                 double* dst = ga.data() + static_cast<std::size_t>(idv[i]) * d;
                                 const double* src = g.data() + i * d;
                                 for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                               }
                             });
}

Var sum(const Var& a) {
  const Tensor& av = a.value();
  double s = 0.0;
  for (double x : av.values()) s += x;
  const std::uint32_t ia = a.id();
  return a.tape().record(Tensor::scalar(s), a.requires_grad(), [ia](Tape& tp, std::uint32_t self) {
    const double g = tp.grad_of(self)[0];
    Tensor& ga = tp.grad_buffer(ia);
    for (double& x : ga.values()) x += g;
  });
}

Var sum_rows(const Var& a) {
  const Tensor& av = a.value();
  const std::size_t n = av.rows(), d = av.cols();
  Tensor out(1, d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) out[j] += av(r, j);
  }
  const std::uint32_t ia = a.id();
  return a.tape().record(std::move(out), a.requires_grad(),
                         [ia, n, d](Tape& tp, std::uint32_t self) {
                           const Tensor& g = tp.grad_of(self);
                           Tensor& ga = tp.grad_buffer(ia);
                           for (std::size_t r = 0; r < n; ++r) {
                             for (std::size_t j = 0; j < d; ++j) ga(r, j) += g[j];
                           }
                         });
}

Var transpose(const Var& a) {
  const Tensor& av = a.value();
  const std::size_t n = av.rows(), d = av.cols();
  Tensor out(d, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) out(c, r) = av(r, c);
  }
  const std::uint32_t ia = a.id();
  return a.tape().record(std::move(out), a.requires_grad(),
                         [ia, n, d](Tape& tp, std::uint32_t self) {
                           const Tensor& g = tp.grad_of(self);
                           Tensor& ga = tp.grad_buffer(ia);
                           for (std::size_t r = 0; r < n; ++r) {
                             for (std::size_t c = 0; c < d; ++c) ga(r, c) += g(c, r);
                           }
                         });
}

Var broadcast_rows(const Var& row, std::size_t n) {
  const Tensor& rv = row.value();
  if (rv.rows() != 1) throw DimensionError("broadcast_rows: expected a row, got " + rv.shape_string());
  const std::size_t d = rv.cols();
  Tensor out(n, d);
  for (std::size_t r = 0; r < n; ++r) std::copy_n(rv.data(), d, out.data() + r * d);
  const std::uint32_t ia = row.id();
  return row.tape().record(std::move(out), row.requires_grad(),
                           [ia, n, d](Tape& tp, std::uint32_t self) {
                             const Tensor& g = tp.grad_of(self);
                             Tensor& ga = tp.grad_buffer(ia);
                             for (std::size_t r = 0; r < n; ++r) {
                               for (std::size_t j = 0; j < d; ++j) ga[j] += g(r, j);
                             }
                           });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t count) {
  const Tensor& av = a.value();
  if (begin + count > av.cols()) {
    std::ostringstream msg;
    msg << "slice_cols: [" << begin << ", " << begin + count << ") out of " << av.shape_string();
    throw DimensionError(msg.str());
  }
  const std::size_t n = av.rows(), d = av.cols();
  Tensor out(n, count);
  for (std::size_t r = 0; r < n; ++r) std::copy_n(av.data() + r * d + begin, count, out.data() + r * count);
  const std::uint32_t ia = a.id();
  return a.tape().record(std::move(out), a.requires_grad(),
                         [ia, n, d, begin, count](Tape& tp, std::uint32_t self) {
                           const Tensor& g = tp.grad_of(self);
                           Tensor& ga = tp.grad_buffer(ia);
                           for (std::size_t r = 0; r < n; ++r) {
                             for (std::size_t j = 0; j < count; ++j) ga(r, begin + j) += g(r, j);
                           }
                         });
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t count) {
  const Tensor& av = a.value();
  if (begin + count > av.rows()) {
    std::ostringstream msg;
    msg << "slice_rows: [" << begin << ", " << begin + count << ") out of " << av.shape_string();
    throw DimensionError(msg.str());
  }
  const std::size_t d = av.cols();
  Tensor out(count, d);
  std::copy_n(av.data() + begin * d, count * d, out.data());
  const std::uint32_t ia = a.id();
  return a.tape().record(std::move(out), a.requires_grad(),
                         [ia, d, begin, count](Tape& tp, std::uint32_t self) {
                           const Tensor& g = tp.grad_of(self);
                           double* dst = tp.grad_buffer(ia).data() + begin * d;
                           for (std::size_t i = 0; i < count * d; ++i) dst[i] += g[i];
                         });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t n = parts[0].rows();
  std::size_t total = 0;
  bool needs_grad = false;
  for (const Var& p : parts) {
    if (p.rows() != n) throw DimensionError(shapes("concat_cols", parts[0].value(), p.value()));
    if (&p.tape() != &parts[0].tape()) throw ContractError("operands live on different tapes");
    total += p.cols();
    needs_grad = needs_grad || p.requires_grad();
  }
  Tensor out(n, total);
  std::vector<std::pair<std::uint32_t, std::size_t>> layout;  // (id, width)
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t r = 0; r < n; ++r) {
      std::copy_n(pv.data() + r * pv.cols(), pv.cols(), out.data() + r * total + off);
    }
    layout.emplace_back(p.id(), pv.cols());
    off += pv.cols();
  }
  return parts[0].tape().record(
      std::move(out), needs_grad, [layout = std::move(layout), n, total](Tape& tp, std::uint32_t self) {
        const Tensor& g = tp.grad_of(self);
        std::size_t off = 0;
        for (const auto& [id, w] : layout) {
          if (tp.requires_grad(id)) {
            Tensor& gp = tp.grad_buffer(id);
            for (std::size_t r = 0; r < n; ++r) {
              for (std::size_t j = 0; j < w; ++j) gp(r, j) += g[r * total + off + j];
            }
          }
          off += w;
        }
      });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t d = parts[0].cols();
  std::size_t total = 0;
  bool needs_grad = false;
  for (const Var& p : parts) {
    if (p.cols() != d) throw DimensionError(shapes("concat_rows", parts[0].value(), p.value()));
    if (&p.tape() != &parts[0].tape()) throw ContractError("operands live on different tapes");
    total += p.rows();
    needs_grad = needs_grad || p.requires_grad();
  }
  Tensor out(total, d);
  std::vector<std::pair<std::uint32_t, std::size_t>> layout;  // (id, rows)
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    std::copy_n(pv.data(), pv.size(), out.data() + off * d);
    layout.emplace_back(p.id(), pv.rows());
    off += pv.rows();
  }
  return parts[0].tape().record(
      std::move(out), needs_grad, [layout = std::move(layout), d](Tape& tp, std::uint32_t self) {
        const Tensor& g = tp.grad_of(self);
        std::size_t off = 0;
        for (const auto& [id, rows] : layout) {
          if (tp.requires_grad(id)) {
            double* dst = tp.grad_buffer(id).data();
            const double* src = g.data() + off * d;
            for (std::size_t i = 0; i < rows * d; ++i) dst[i] += src[i];
          }
          off += rows;
        }
      });
}

Var weighted_sum(const Var& a, const Tensor& weights) {
  const Tensor& av = a.value();
  if (!av.same_shape(weights)) throw DimensionError(shapes("weighted_sum", av, weights));
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += weights[i] * av[i];
  const std::uint32_t ia = a.id();
  return a.tape().record(Tensor::scalar(s), a.requires_grad(),
                         [ia, weights](Tape& tp, std::uint32_t self) {
                           const double g = tp.grad_of(self)[0];
                           Tensor& ga = tp.grad_buffer(ia);
                           for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * weights[i];
                         });
}

// ---------------------------------------------------------------------------

double gradient_relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-5);
}

GradCheckResult finite_difference_check(const ScalarFn& f, std::vector<Tensor>& params,
                                        double eps) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const Tensor& p : params) leaves.push_back(tape.leaf(p));
    Var loss = f(tape, leaves);
    tape.backward(loss);
    for (const Var& l : leaves) analytic.push_back(tape.grad(l));
  }
  auto evaluate = [&]() {
    Tape tape(false);
    std::vector<Var> leaves;
    for (const Tensor& p : params) leaves.push_back(tape.leaf(p, false));
    return f(tape, leaves).item();
  };
  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + eps;
      const double fp = evaluate();
      p[i] = saved - eps;
      const double fm = evaluate();
      p[i] = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[pi][i];
      const double rel = gradient_relative_error(a, numeric);
      if (rel > result.max_rel_error) {
        result = {rel, pi, i, a, numeric};
      }
    }
  }
  return result;
}

}  // namespace tsnmt
