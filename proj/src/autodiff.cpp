#include "mona/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mona/errors.hpp"

namespace mona {

const Tensor& Var::value() const { return tape_->value(*this); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  value.set_requires_grad(requires_grad);
  Node node;
  node.needs_grad = requires_grad;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  Node node;
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (&in.tape() != this) throw ContractError("operation mixes variables from different tapes");
    node.inputs.push_back(in.id());
    node.needs_grad = node.needs_grad || nodes_[in.id()].needs_grad;
  }
  if (node.needs_grad && !backward) throw ContractError("differentiable op recorded without backward");
  node.backward = std::move(backward);
  node.value = std::move(value);
  node.value.set_requires_grad(node.needs_grad);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var output) {
  if (output.value().size() != 1) {
    throw ContractError("backward() needs a scalar output, got " +
                        std::to_string(output.value().size()) + " elements");
  }
  for (Node& n : nodes_) {
    n.grad = Tensor();
    n.has_grad = false;
  }
  Node& root = nodes_[output.id()];
  root.grad = Tensor(root.value.shape(), 1.0);
  root.has_grad = true;

  std::vector<const Tensor*> inputs;
  std::vector<Tensor*> input_grads;
  for (std::size_t k = output.id() + 1; k-- > 0;) {
    Node& node = nodes_[k];
    if (!node.has_grad || !node.needs_grad || !node.backward) continue;
    inputs.clear();
    input_grads.clear();
    for (std::size_t in : node.inputs) {
      Node& src = nodes_[in];
      inputs.push_back(&src.value);
      if (src.needs_grad) {
        if (!src.has_grad) {
          src.grad = Tensor::zeros_like(src.value);
          src.has_grad = true;
        }
        input_grads.push_back(&src.grad);
      } else {
        input_grads.push_back(nullptr);
      }
    }
    node.backward(node.value, node.grad, inputs, input_grads);
  }
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  return n.has_grad ? n.grad : Tensor::zeros_like(n.value);
}

namespace {

struct Shape2 {
  std::size_t rows, cols;
};

Shape2 shape2(const Tensor& t) { return {t.rows(), t.cols()}; }

std::vector<std::size_t> broadcast_shape(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return a.shape();
  const Shape2 sa = shape2(a), sb = shape2(b);
  auto dim = [](std::size_t x, std::size_t y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    throw DimensionError("cannot broadcast " + std::to_string(x) + " against " +
                         std::to_string(y));
  };
  const std::size_t r = dim(sa.rows, sb.rows), c = dim(sa.cols, sb.cols);
  if (a.size() == r * c) return a.shape();
  if (b.size() == r * c) return b.shape();
  return {r, c};
}

inline double at(const Tensor& t, std::size_t r, std::size_t c) {
  const std::size_t tr = t.rows() == 1 ? 0 : r;
  const std::size_t tc = t.cols() == 1 ? 0 : c;
  return t[tr * t.cols() + tc];
}

inline double& at(Tensor& t, std::size_t r, std::size_t c) {
  const std::size_t tr = t.rows() == 1 ? 0 : r;
  const std::size_t tc = t.cols() == 1 ? 0 : c;
  return t[tr * t.cols() + tc];
}

// f(x, y) with partials (df/dx, df/dy) evaluated from x, y and the output.
template <typename F, typename DF>
Var binary(Var a, Var b, F f, DF df) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(broadcast_shape(av, bv));
  const std::size_t r = out.rows(), c = out.cols();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = f(at(av, i, j), at(bv, i, j));
  return a.tape().record(std::move(out), {a, b},
                         [df](const Tensor& y, const Tensor& gy, std::span<const Tensor* const> in,
                              std::span<Tensor* const> gin) {
                           const std::size_t rr = y.rows(), cc = y.cols();
                           for (std::size_t i = 0; i < rr; ++i) {
                             for (std::size_t j = 0; j < cc; ++j) {
                               const double x0 = at(*in[0], i, j), x1 = at(*in[1], i, j);
                               const auto [d0, d1] = df(x0, x1, y[i * cc + j]);
                               const double g = gy[i * cc + j];
                               if (gin[0]) at(*gin[0], i, j) += g * d0;
                               if (gin[1]) at(*gin[1], i, j) += g * d1;
                             }
                           }
                         });
}

// Elementwise unary op; df receives (x, y).
template <typename F, typename DF>
Var unary(Var a, F f, DF df) {
  Tensor out = a.value();
  for (double& v : out.data()) v = f(v);
  return a.tape().record(std::move(out), {a},
                         [df](const Tensor& y, const Tensor& gy, std::span<const Tensor* const> in,
                              std::span<Tensor* const> gin) {
                           const Tensor& x = *in[0];
                           Tensor& gx = *gin[0];
                           for (std::size_t i = 0; i < y.size(); ++i) gx[i] += gy[i] * df(x[i], y[i]);
                         });
}

}  // namespace

Var add(Var a, Var b) {
  return binary(a, b, [](double x, double y) { return x + y; },
                [](double, double, double) { return std::pair{1.0, 1.0}; });
}

Var sub(Var a, Var b) {
  return binary(a, b, [](double x, double y) { return x - y; },
                [](double, double, double) { return std::pair{1.0, -1.0}; });
}

Var mul(Var a, Var b) {
  return binary(a, b, [](double x, double y) { return x * y; },
                [](double x, double y, double) { return std::pair{y, x}; });
}

Var div(Var a, Var b) {
  return binary(a, b, [](double x, double y) { return x / y; },
                [](double x, double y, double) { return std::pair{1.0 / y, -x / (y * y)}; });
}

Var neg(Var a) {
  return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var scale(Var a, double factor) {
  return unary(a, [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double offset) {
  return unary(a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sqrt(Var a) {
  return unary(a, [](double x) { return std::sqrt(x); },
               [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;
}  // namespace

double gelu_value(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double gelu_derivative(double x) {
  const double u = kGeluC * (x + kGeluA * x * x * x);
  const double t = std::tanh(u);
  const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

Var gelu(Var a) {
  return unary(a, gelu_value, [](double x, double) { return gelu_derivative(x); });
}

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2) throw DimensionError("matmul needs rank-2 operands");
  const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
  if (bv.rows() != k) {
    throw DimensionError("matmul inner dimensions differ: " + std::to_string(k) + " vs " +
                         std::to_string(bv.rows()));
  }
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double x = av[i * k + p];
      if (x == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) out[i * m + j] += x * bv[p * m + j];
    }
  return a.tape().record(
      std::move(out), {a, b},
      [n, k, m](const Tensor&, const Tensor& gy, std::span<const Tensor* const> in,
                std::span<Tensor* const> gin) {
        const Tensor& A = *in[0];
        const Tensor& B = *in[1];
        if (gin[0]) {  // dA = gy * B^T
          Tensor& gA = *gin[0];
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              double s = 0.0;
              for (std::size_t j = 0; j < m; ++j) s += gy[i * m + j] * B[p * m + j];
              gA[i * k + p] += s;
            }
        }
        if (gin[1]) {  // dB = A^T * gy
          Tensor& gB = *gin[1];
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              const double x = A[i * k + p];
              if (x == 0.0) continue;
              for (std::size_t j = 0; j < m; ++j) gB[p * m + j] += x * gy[i * m + j];
            }
        }
      });
}

Var transpose(Var a) {
  return a.tape().record(a.value().transposed(), {a},
                         [](const Tensor&, const Tensor& gy, std::span<const Tensor* const>,
                            std::span<Tensor* const> gin) { *gin[0] += gy.transposed(); });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape().record(Tensor::scalar(s), {a},
                         [](const Tensor&, const Tensor& gy, std::span<const Tensor* const>,
                            std::span<Tensor* const> gin) {
                           const double g = gy[0];
                           for (double& v : gin[0]->data()) v += g;
                         });
}

Var mean(Var a) {
  const auto n = static_cast<double>(a.value().size());
  if (n == 0) throw PreconditionError("mean of an empty tensor");
  return scale(sum(a), 1.0 / n);
}

Var sum_axis(Var a, int axis) {
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  if (axis != 0 && axis != 1) throw DimensionError("sum_axis: axis must be 0 or 1");
  Tensor out = axis == 0 ? Tensor({1, c}) : Tensor({r, 1});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[axis == 0 ? j : i] += av[i * c + j];
  return a.tape().record(std::move(out), {a},
                         [r, c, axis](const Tensor&, const Tensor& gy,
                                      std::span<const Tensor* const>, std::span<Tensor* const> gin) {
                           Tensor& g = *gin[0];
                           for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < c; ++j) g[i * c + j] += gy[axis == 0 ? j : i];
                         });
}

Var mean_axis(Var a, int axis) {
  const double n = static_cast<double>(axis == 0 ? a.value().rows() : a.value().cols());
  return scale(sum_axis(a, axis), 1.0 / n);
}

Var select_cols(Var a, std::span<const std::size_t> cols) {
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  Tensor out({r, idx.size()});
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (idx[j] >= c) throw DimensionError("select_cols index out of range");
    for (std::size_t i = 0; i < r; ++i) out[i * idx.size() + j] = av[i * c + idx[j]];
  }
  return a.tape().record(std::move(out), {a},
                         [idx = std::move(idx), r, c](const Tensor&, const Tensor& gy,
                                                      std::span<const Tensor* const>,
                                                      std::span<Tensor* const> gin) {
                           Tensor& g = *gin[0];
                           const std::size_t m = idx.size();
                           for (std::size_t j = 0; j < m; ++j)
                             for (std::size_t i = 0; i < r; ++i) g[i * c + idx[j]] += gy[i * m + j];
                         });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw PreconditionError("concat_cols of nothing");
  const std::size_t r = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.value().rows() != r) throw DimensionError("concat_cols row counts differ");
    widths.push_back(p.value().cols());
    total += widths.back();
  }
  Tensor out({r, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out[i * total + offset + j] = v[i * widths[k] + j];
    offset += widths[k];
  }
  return parts[0].tape().record(
      std::move(out), std::vector<Var>(parts.begin(), parts.end()),
      [widths, r, total](const Tensor&, const Tensor& gy, std::span<const Tensor* const>,
                         std::span<Tensor* const> gin) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
          if (gin[k]) {
            Tensor& g = *gin[k];
            for (std::size_t i = 0; i < r; ++i)
              for (std::size_t j = 0; j < widths[k]; ++j)
                g[i * widths[k] + j] += gy[i * total + offset + j];
          }
          offset += widths[k];
        }
      });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw PreconditionError("concat_rows of nothing");
  const std::size_t c = parts[0].value().cols();
  std::vector<std::size_t> heights;
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.value().cols() != c) throw DimensionError("concat_rows column counts differ");
    heights.push_back(p.value().rows());
    total += heights.back();
  }
  std::vector<double> data;
  data.reserve(total * c);
  for (const Var& p : parts) data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  return parts[0].tape().record(
      Tensor({total, c}, std::move(data)), std::vector<Var>(parts.begin(), parts.end()),
      [heights, c](const Tensor&, const Tensor& gy, std::span<const Tensor* const>,
                   std::span<Tensor* const> gin) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < heights.size(); ++k) {
          const std::size_t n = heights[k] * c;
          if (gin[k]) {
            Tensor& g = *gin[k];
            for (std::size_t i = 0; i < n; ++i) g[i] += gy[offset + i];
          }
          offset += n;
        }
      });
}

Var shift_cols(Var a, int offset) {
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out({r, c});
  const auto cc = static_cast<long>(c);
  for (long t = 0; t < cc; ++t) {
    const long s = t + offset;
    if (s < 0 || s >= cc) continue;
    for (std::size_t i = 0; i < r; ++i) out[i * c + t] = av[i * c + s];
  }
  return a.tape().record(std::move(out), {a},
                         [r, c, offset](const Tensor&, const Tensor& gy,
                                        std::span<const Tensor* const>, std::span<Tensor* const> gin) {
                           Tensor& g = *gin[0];
                           const auto cc = static_cast<long>(c);
                           for (long t = 0; t < cc; ++t) {
                             const long s = t + offset;
                             if (s < 0 || s >= cc) continue;
                             for (std::size_t i = 0; i < r; ++i) g[i * c + s] += gy[i * c + t];
                           }
                         });
}

Var gather(Var a, std::span<const std::pair<std::size_t, std::size_t>> cells) {
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  std::vector<std::size_t> flat;
  flat.reserve(cells.size());
  Tensor out({cells.size()});
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const auto [i, j] = cells[k];
    if (i >= r || j >= c) throw DimensionError("gather index out of range");
    flat.push_back(i * c + j);
    out[k] = av[flat.back()];
  }
  return a.tape().record(std::move(out), {a},
                         [flat = std::move(flat)](const Tensor&, const Tensor& gy,
                                                  std::span<const Tensor* const>,
                                                  std::span<Tensor* const> gin) {
                           for (std::size_t k = 0; k < flat.size(); ++k) (*gin[0])[flat[k]] += gy[k];
                         });
}

Var logsumexp_rows(Var a, const Tensor& include) {
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  if (include.rows() != r || include.cols() != c) throw DimensionError("logsumexp_rows mask shape");
  Tensor out({r});
  for (std::size_t i = 0; i < r; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j)
      if (include[i * c + j] != 0.0) m = std::max(m, av[i * c + j]);
    if (!std::isfinite(m)) continue;
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j)
      if (include[i * c + j] != 0.0) s += std::exp(av[i * c + j] - m);
    out[i] = m + std::log(s);
  }
  return a.tape().record(std::move(out), {a},
                         [include, r, c](const Tensor& y, const Tensor& gy,
                                         std::span<const Tensor* const> in,
                                         std::span<Tensor* const> gin) {
                           const Tensor& x = *in[0];
                           Tensor& g = *gin[0];
                           for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < c; ++j)
                               if (include[i * c + j] != 0.0)
                                 g[i * c + j] += gy[i] * std::exp(x[i * c + j] - y[i]);
                         });
}

Var cosine_matrix(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const std::size_t f = A.rows();
  if (B.rows() != f) {
    throw DimensionError("cosine_matrix feature dimensions differ: " + std::to_string(f) + " vs " +
                         std::to_string(B.rows()));
  }
  const std::size_t la = A.cols(), lb = B.cols();
  auto norms = [f](const Tensor& m) {
    std::vector<double> n(m.cols(), 0.0);
    for (std::size_t i = 0; i < f; ++i)
      for (std::size_t j = 0; j < m.cols(); ++j) n[j] += m[i * m.cols() + j] * m[i * m.cols() + j];
    for (double& v : n) v = std::sqrt(v);
    return n;
  };
  std::vector<double> na = norms(A), nb = norms(B);
  Tensor out({la, lb});
  for (std::size_t i = 0; i < la; ++i)
    for (std::size_t j = 0; j < lb; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < f; ++k) dot += A[k * la + i] * B[k * lb + j];
      out[i * lb + j] = dot / std::max(na[i] * nb[j], kCosineEps);
    }
  return a.tape().record(
      std::move(out), {a, b},
      [f, la, lb, na = std::move(na), nb = std::move(nb)](
          const Tensor& y, const Tensor& gy, std::span<const Tensor* const> in,
          std::span<Tensor* const> gin) {
        const Tensor& A = *in[0];
        const Tensor& B = *in[1];
        for (std::size_t i = 0; i < la; ++i)
          for (std::size_t j = 0; j < lb; ++j) {
            const double g = gy[i * lb + j];
            if (g == 0.0) continue;
            const double denom = na[i] * nb[j];
            const double cij = y[i * lb + j];
            if (denom > kCosineEps) {
              // d/da = b / (|a||b|) - c a / |a|^2, symmetric for b.
              for (std::size_t k = 0; k < f; ++k) {
                const double ak = A[k * la + i], bk = B[k * lb + j];
                if (gin[0]) (*gin[0])[k * la + i] += g * (bk / denom - cij * ak / (na[i] * na[i]));
                if (gin[1]) (*gin[1])[k * lb + j] += g * (ak / denom - cij * bk / (nb[j] * nb[j]));
              }
            } else {
              for (std::size_t k = 0; k < f; ++k) {
                if (gin[0]) (*gin[0])[k * la + i] += g * B[k * lb + j] / kCosineEps;
                if (gin[1]) (*gin[1])[k * lb + j] += g * A[k * la + i] / kCosineEps;
              }
            }
          }
      });
}

namespace {

// View a vector as an F x 1 column without copying semantics on the tape.
Var as_column(Var v) {
  const Tensor& t = v.value();
  if (t.rank() == 2 && t.cols() == 1) return v;
  const std::size_t n = t.size();
  return v.tape().record(Tensor({n, 1}, t.values()), {v},
                         [](const Tensor&, const Tensor& gy, std::span<const Tensor* const>,
                            std::span<Tensor* const> gin) { *gin[0] += gy; });
}

}  // namespace

Var cosine_similarity(Var a, Var b) {
  if (a.value().size() != b.value().size()) {
    throw DimensionError("cosine_similarity length mismatch: " + std::to_string(a.value().size()) +
                         " vs " + std::to_string(b.value().size()));
  }
  if (a.value().size() == 0) throw DimensionError("cosine_similarity of empty vectors");
  Var m = cosine_matrix(as_column(a), as_column(b));
  return sum(m);
}

std::vector<Tensor> grad(const ScalarFunction& f, std::span<const Tensor> inputs) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(tape.leaf(t, true));
  Var out = f(tape, vars);
  if (out.value().size() != 1) {
    throw ContractError("grad() needs a scalar-valued function, got " +
                        std::to_string(out.value().size()) + " outputs");
  }
  tape.backward(out);
  std::vector<Tensor> grads;
  grads.reserve(vars.size());
  for (const Var& v : vars) grads.push_back(tape.grad(v));
  return grads;
}

double evaluate(const ScalarFunction& f, std::span<const Tensor> inputs) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(tape.constant(t));
  Var out = f(tape, vars);
  if (out.value().size() != 1) throw ContractError("evaluate() needs a scalar-valued function");
  return out.value()[0];
}

std::vector<Tensor> finite_difference_gradient(const ScalarFunction& f,
                                               std::span<const Tensor> inputs, double h) {
  if (!(h > 0.0)) throw PreconditionError("finite difference step must be positive");
  std::vector<Tensor> work(inputs.begin(), inputs.end());
  std::vector<Tensor> grads;
  grads.reserve(work.size());
  for (std::size_t k = 0; k < work.size(); ++k) {
    Tensor g = Tensor::zeros_like(work[k]);
    for (std::size_t i = 0; i < work[k].size(); ++i) {
      const double x0 = work[k][i];
      work[k][i] = x0 + h;
      const double up = evaluate(f, work);
      work[k][i] = x0 - h;
      const double down = evaluate(f, work);
      work[k][i] = x0;
      g[i] = (up - down) / (2.0 * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

Tensor grad(const std::function<Var(Var)>& f, const Tensor& x) {
  return grad([&f](Tape&, std::span<const Var> v) { return f(v[0]); }, std::span(&x, 1)).front();
}

Tensor finite_difference_gradient(const std::function<Var(Var)>& f, const Tensor& x, double h) {
  return finite_difference_gradient([&f](Tape&, std::span<const Var> v) { return f(v[0]); },
                                    std::span(&x, 1), h)
      .front();
}

double max_relative_error(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw DimensionError("max_relative_error size mismatch");
  // Entries below the floor are compared on an absolute scale.
  constexpr double kFloor = 1e-6;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), kFloor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace mona
