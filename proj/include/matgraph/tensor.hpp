#pragma once

// Dense row-major tensors and a reverse-mode tape.
//
// The engine is templated on the scalar so the same model code runs in
// 32-bit for training and in 64-bit for finite-difference checks. Only the
// shapes the GNN needs are supported; there is no general broadcasting.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "matgraph/errors.hpp"

namespace matgraph::ad {

template <typename T>
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;
  bool requires_grad = false;
  std::vector<T> grad;  // empty until the first accumulation

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, T fill = T(0)) : rows(r), cols(c), data(r * c, fill) {}
  Tensor(std::size_t r, std::size_t c, std::vector<T> values) : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) throw ShapeError("tensor: data length does not match shape");
  }

  std::size_t size() const { return data.size(); }
  T& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  T* row(std::size_t r) { return data.data() + r * cols; }
  const T* row(std::size_t r) const { return data.data() + r * cols; }

  void zero_grad() { grad.assign(data.size(), T(0)); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(rows, cols);
    std::transform(data.begin(), data.end(), out.data.begin(), [](T v) { return static_cast<U>(v); });
    out.requires_grad = requires_grad;
    return out;
  }
};

/// Handle to a value recorded on a Tape.
struct Var {
  std::uint32_t id = std::numeric_limits<std::uint32_t>::max();
  bool valid() const { return id != std::numeric_limits<std::uint32_t>::max(); }
};

/// Running statistics owned by a batch-norm layer.
template <typename T>
struct BatchNormBuffers {
  Tensor<T>* running_mean = nullptr;
  Tensor<T>* running_var = nullptr;
  T momentum = T(0.1);
  T eps = T(1e-5);
};

template <typename T>
class Tape {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Map = Eigen::Map<Mat>;
  using CMap = Eigen::Map<const Mat>;

  static constexpr T kProbFloor = T(1e-12);

  Var constant(Tensor<T> value) { return push(std::move(value), false, nullptr); }

  /// Records a parameter. Gradients reach `param.grad` on backward() when
  /// the parameter requires them. The tensor must outlive the tape.
  Var leaf(Tensor<T>& param) {
    Var v = push(param, param.requires_grad, nullptr);
    nodes_[v.id].param = &param;
    return v;
  }

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
  std::span<const T> grad(Var v) const { return nodes_.at(v.id).grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a 1x1 output. Each recorded node is visited once.
  void backward(Var out) {
    check(value(out).rows == 1 && value(out).cols == 1, "backward", "output must be 1x1");
    grad_buf(out)[0] += T(1);
    for (std::size_t i = out.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.needs_grad || n.grad.empty()) continue;
      if (n.back) n.back(*this);
      if (n.param) {
        if (n.param->grad.size() != n.param->data.size()) n.param->zero_grad();
        for (std::size_t k = 0; k < n.grad.size(); ++k) n.param->grad[k] += n.grad[k];
      }
    }
  }

  // ---- primitives -------------------------------------------------------

  Var matmul(Var a, Var b) {
    const auto& A = value(a);
    const auto& B = value(b);
    check(A.cols == B.rows, "matmul", "inner dimensions differ");
    Tensor<T> out(A.rows, B.cols);
    if (A.rows && B.cols) {
      // Coefficient-wise product: a row's result does not depend on where the
      // row sits in A, so relabelling nodes permutes outputs bit for bit.
      // Blocked GEMM rounds tail rows differently.
      row_product(A, B, out);
    }
    return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, Var o) {
      const auto& A = t.value(a);
      const auto& B = t.value(b);
      CMap G(t.nodes_[o.id].grad.data(), A.rows, B.cols);
      if (t.needs(a) && A.size()) Map(t.grad_buf(a).data(), A.rows, A.cols).noalias() += G * cmap(B).transpose();
      if (t.needs(b) && B.size()) Map(t.grad_buf(b).data(), B.rows, B.cols).noalias() += cmap(A).transpose() * G;
    });
  }

  /// Elementwise sum. `b` may also be a 1 x cols row added to every row of `a`.
  Var add(Var a, Var b) {
    const auto& A = value(a);
    const auto& B = value(b);
    const bool row_bias = B.rows == 1 && B.cols == A.cols && A.rows != 1;
    check(row_bias || (A.rows == B.rows && A.cols == B.cols), "add", "shapes differ");
    Tensor<T> out = A;
    out.requires_grad = false;
    out.grad.clear();
    for (std::size_t r = 0; r < A.rows; ++r)
      for (std::size_t c = 0; c < A.cols; ++c) out.at(r, c) += row_bias ? B.data[c] : B.at(r, c);
    return push(std::move(out), needs(a) || needs(b), [a, b, row_bias](Tape& t, Var o) {
      const auto& g = t.nodes_[o.id].grad;
      if (t.needs(a)) axpy(t.grad_buf(a), g, T(1));
      if (t.needs(b)) {
        auto& gb = t.grad_buf(b);
        if (!row_bias) {
          axpy(gb, g, T(1));
        } else {
          const std::size_t cols = gb.size();
          for (std::size_t k = 0; k < g.size(); ++k) gb[k % cols] += g[k];
        }
      }
    });
  }

  Var scale(Var a, T s) {
    Tensor<T> out = plain(value(a));
    for (auto& v : out.data) v *= s;
    return push(std::move(out), needs(a), [a, s](Tape& t, Var o) { axpy(t.grad_buf(a), t.nodes_[o.id].grad, s); });
  }

  /// Multiplies row r by the constant factors[r].
  Var scale_rows(Var a, std::vector<T> factors) {
    const auto& A = value(a);
    check(factors.size() == A.rows, "scale_rows", "one factor per row required");
    Tensor<T> out = plain(A);
    for (std::size_t r = 0; r < A.rows; ++r)
      for (std::size_t c = 0; c < A.cols; ++c) out.at(r, c) *= factors[r];
    return push(std::move(out), needs(a), [a, f = std::move(factors)](Tape& t, Var o) {
      auto& ga = t.grad_buf(a);
      const auto& g = t.nodes_[o.id].grad;
      const std::size_t cols = t.value(a).cols;
      for (std::size_t r = 0; r < f.size(); ++r)
        for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += f[r] * g[r * cols + c];
    });
  }

  Var concat_cols(const std::vector<Var>& parts) {
    check(!parts.empty(), "concat_cols", "no inputs");
    const std::size_t rows = value(parts[0]).rows;
    std::size_t cols = 0;
    bool any = false;
    for (Var p : parts) {
      check(value(p).rows == rows, "concat_cols", "row counts differ");
      cols += value(p).cols;
      any = any || needs(p);
    }
    Tensor<T> out(rows, cols);
    std::size_t off = 0;
    for (Var p : parts) {
      const auto& P = value(p);
      for (std::size_t r = 0; r < rows; ++r) std::copy(P.row(r), P.row(r) + P.cols, out.row(r) + off);
      off += P.cols;
    }
    return push(std::move(out), any, [parts](Tape& t, Var o) {
      const auto& g = t.nodes_[o.id].grad;
      const std::size_t total = t.value(o).cols;
      std::size_t off = 0;
      for (Var p : parts) {
        const std::size_t pc = t.value(p).cols;
        if (t.needs(p)) {
          auto& gp = t.grad_buf(p);
          for (std::size_t r = 0; r < t.value(p).rows; ++r)
            for (std::size_t c = 0; c < pc; ++c) gp[r * pc + c] += g[r * total + off + c];
        }
        off += pc;
      }
    });
  }

  Var slice_cols(Var a, std::size_t begin, std::size_t width) {
    const auto& A = value(a);
    check(begin + width <= A.cols, "slice_cols", "range exceeds columns");
    Tensor<T> out(A.rows, width);
    for (std::size_t r = 0; r < A.rows; ++r) std::copy(A.row(r) + begin, A.row(r) + begin + width, out.row(r));
    return push(std::move(out), needs(a), [a, begin, width](Tape& t, Var o) {
      auto& ga = t.grad_buf(a);
      const auto& g = t.nodes_[o.id].grad;
      const std::size_t cols = t.value(a).cols;
      for (std::size_t r = 0; r < t.value(a).rows; ++r)
        for (std::size_t c = 0; c < width; ++c) ga[r * cols + begin + c] += g[r * width + c];
    });
  }

  Var relu(Var a) { return leaky_relu(a, T(0)); }

  Var leaky_relu(Var a, T alpha) {
    Tensor<T> out = plain(value(a));
    for (auto& v : out.data) v = v > T(0) ? v : alpha * v;
    return push(std::move(out), needs(a), [a, alpha](Tape& t, Var o) {
      auto& ga = t.grad_buf(a);
      const auto& x = t.value(a).data;
      const auto& g = t.nodes_[o.id].grad;
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += x[k] > T(0) ? g[k] : alpha * g[k];
    });
  }

  /// Leaky ReLU whose negative slope is the learned 1x1 value `alpha`.
  Var prelu(Var a, Var alpha) {
    check(value(alpha).size() == 1, "prelu", "slope must be 1x1");
    const T s = value(alpha).data[0];
    Tensor<T> out = plain(value(a));
    for (auto& v : out.data) v = v > T(0) ? v : s * v;
    return push(std::move(out), needs(a) || needs(alpha), [a, alpha](Tape& t, Var o) {
      const T s = t.value(alpha).data[0];
      const auto& x = t.value(a).data;
      const auto& g = t.nodes_[o.id].grad;
      if (t.needs(a)) {
        auto& ga = t.grad_buf(a);
        for (std::size_t k = 0; k < g.size(); ++k) ga[k] += x[k] > T(0) ? g[k] : s * g[k];
      }
      if (t.needs(alpha)) {
        T acc = T(0);
        for (std::size_t k = 0; k < g.size(); ++k)
          if (x[k] <= T(0)) acc += g[k] * x[k];
        t.grad_buf(alpha)[0] += acc;
      }
    });
  }

  /// Column-wise batch normalisation over rows. Training mode uses batch
  /// statistics and updates the running buffers; eval mode is the affine map
  /// defined by the frozen running statistics.
  Var batch_norm(Var x, Var gamma, Var beta, const BatchNormBuffers<T>& buf, bool training) {
    const auto& X = value(x);
    const std::size_t n = X.rows, c = X.cols;
    check(value(gamma).size() == c && value(beta).size() == c, "batch_norm", "gamma/beta width differs from input");
    check(buf.running_mean && buf.running_var && buf.running_mean->size() == c && buf.running_var->size() == c,
          "batch_norm", "running buffers missing or mis-sized");
    check(!training || n > 0, "batch_norm", "empty batch");
    std::vector<T> mean(c), invstd(c);
    if (training) {
      for (std::size_t j = 0; j < c; ++j) {
        T m = T(0);
        for (std::size_t r = 0; r < n; ++r) m += X.at(r, j);
        m /= T(n);
        T v = T(0);
        for (std::size_t r = 0; r < n; ++r) v += (X.at(r, j) - m) * (X.at(r, j) - m);
        v /= T(n);
        mean[j] = m;
        invstd[j] = T(1) / std::sqrt(v + buf.eps);
        const T unbiased = n > 1 ? v * T(n) / T(n - 1) : v;
        buf.running_mean->data[j] = (T(1) - buf.momentum) * buf.running_mean->data[j] + buf.momentum * m;
        buf.running_var->data[j] = (T(1) - buf.momentum) * buf.running_var->data[j] + buf.momentum * unbiased;
      }
    } else {
      for (std::size_t j = 0; j < c; ++j) {
        mean[j] = buf.running_mean->data[j];
        invstd[j] = T(1) / std::sqrt(buf.running_var->data[j] + buf.eps);
      }
    }
    Tensor<T> xhat(n, c);
    Tensor<T> out(n, c);
    const auto& G = value(gamma).data;
    const auto& B = value(beta).data;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < c; ++j) {
        xhat.at(r, j) = (X.at(r, j) - mean[j]) * invstd[j];
        out.at(r, j) = G[j] * xhat.at(r, j) + B[j];
      }
    return push(std::move(out), needs(x) || needs(gamma) || needs(beta),
                [x, gamma, beta, training, xhat = std::move(xhat), invstd = std::move(invstd)](Tape& t, Var o) {
                  const auto& g = t.nodes_[o.id].grad;
                  const std::size_t n = xhat.rows, c = xhat.cols;
                  std::vector<T> sum_g(c, T(0)), sum_gx(c, T(0));
                  for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t j = 0; j < c; ++j) {
                      sum_g[j] += g[r * c + j];
                      sum_gx[j] += g[r * c + j] * xhat.at(r, j);
                    }
                  if (t.needs(gamma)) axpy(t.grad_buf(gamma), sum_gx, T(1));
                  if (t.needs(beta)) axpy(t.grad_buf(beta), sum_g, T(1));
                  if (!t.needs(x)) return;
                  const auto& G = t.value(gamma).data;
                  auto& gx = t.grad_buf(x);
                  for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t j = 0; j < c; ++j) {
                      const T gr = g[r * c + j];
                      if (training) {
                        gx[r * c + j] += G[j] * invstd[j] / T(n) *
                                         (T(n) * gr - sum_g[j] - xhat.at(r, j) * sum_gx[j]);
                      } else {
                        gx[r * c + j] += G[j] * invstd[j] * gr;
                      }
                    }
                });
  }

  Var softmax_rows(Var a) {
    const auto& A = value(a);
    Tensor<T> out(A.rows, A.cols);
    for (std::size_t r = 0; r < A.rows; ++r) {
      if (A.cols == 0) continue;
      const T mx = *std::max_element(A.row(r), A.row(r) + A.cols);
      T z = T(0);
      for (std::size_t c = 0; c < A.cols; ++c) z += (out.at(r, c) = std::exp(A.at(r, c) - mx));
      for (std::size_t c = 0; c < A.cols; ++c) out.at(r, c) /= z;
    }
    return push(std::move(out), needs(a), [a](Tape& t, Var o) {
      const auto& Y = t.value(o);
      const auto& g = t.nodes_[o.id].grad;
      auto& ga = t.grad_buf(a);
      for (std::size_t r = 0; r < Y.rows; ++r) {
        T dot = T(0);
        for (std::size_t c = 0; c < Y.cols; ++c) dot += g[r * Y.cols + c] * Y.at(r, c);
        for (std::size_t c = 0; c < Y.cols; ++c) ga[r * Y.cols + c] += Y.at(r, c) * (g[r * Y.cols + c] - dot);
      }
    });
  }

  /// Pointwise part of an LSTM cell. `gates` holds pre-activations in
  /// (input, forget, cell, output) order, each of width H. Output is [h' | c'].
  Var lstm_pointwise(Var gates, Var cell) {
    const auto& Gt = value(gates);
    const auto& C = value(cell);
    check(Gt.cols == 4 * C.cols && Gt.rows == C.rows, "lstm_cell_step", "gates must be n x 4H for an n x H cell");
    const std::size_t n = C.rows, h = C.cols;
    Tensor<T> act(n, 4 * h);  // activated gates
    Tensor<T> out(n, 2 * h);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < h; ++j) {
        const T i = sigmoid(Gt.at(r, j));
        const T f = sigmoid(Gt.at(r, h + j));
        const T g = std::tanh(Gt.at(r, 2 * h + j));
        const T o = sigmoid(Gt.at(r, 3 * h + j));
        const T c2 = f * C.at(r, j) + i * g;
        act.at(r, j) = i;
        act.at(r, h + j) = f;
        act.at(r, 2 * h + j) = g;
        act.at(r, 3 * h + j) = o;
        out.at(r, j) = o * std::tanh(c2);
        out.at(r, h + j) = c2;
      }
    return push(std::move(out), needs(gates) || needs(cell), [gates, cell, act = std::move(act)](Tape& t, Var o) {
      const auto& C = t.value(cell);
      const auto& Y = t.value(o);
      const auto& g = t.nodes_[o.id].grad;
      const std::size_t n = C.rows, h = C.cols;
      std::vector<T>* gg = t.needs(gates) ? &t.grad_buf(gates) : nullptr;
      std::vector<T>* gc = t.needs(cell) ? &t.grad_buf(cell) : nullptr;
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < h; ++j) {
          const T i = act.at(r, j), f = act.at(r, h + j), gv = act.at(r, 2 * h + j), ov = act.at(r, 3 * h + j);
          const T tc = std::tanh(Y.at(r, h + j));
          const T dh = g[r * 2 * h + j];
          const T dc = g[r * 2 * h + h + j] + dh * ov * (T(1) - tc * tc);
          if (gg) {
            T* row = gg->data() + r * 4 * h;
            row[j] += dc * gv * i * (T(1) - i);
            row[h + j] += dc * C.at(r, j) * f * (T(1) - f);
            row[2 * h + j] += dc * i * (T(1) - gv * gv);
            row[3 * h + j] += dh * tc * ov * (T(1) - ov);
          }
          if (gc) (*gc)[r * h + j] += dc * f;
        }
    });
  }

  /// Column means: (n x c) -> (1 x c).
  Var mean_rows(Var a) {
    const auto& A = value(a);
    check(A.rows > 0, "mean_rows", "no rows");
    Tensor<T> out(1, A.cols);
    for (std::size_t r = 0; r < A.rows; ++r)
      for (std::size_t c = 0; c < A.cols; ++c) out.data[c] += A.at(r, c);
    for (auto& v : out.data) v /= T(A.rows);
    return push(std::move(out), needs(a), [a](Tape& t, Var o) {
      auto& ga = t.grad_buf(a);
      const auto& g = t.nodes_[o.id].grad;
      const std::size_t cols = g.size();
      const T inv = T(1) / T(t.value(a).rows);
      for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g[k % cols] * inv;
    });
  }

  Var sum(Var a) {
    T s = T(0);
    for (T v : value(a).data) s += v;
    return push(Tensor<T>(1, 1, s), needs(a), [a](Tape& t, Var o) {
      const T g = t.nodes_[o.id].grad[0];
      for (auto& v : t.grad_buf(a)) v += g;
    });
  }

  /// Gathers rows: out[i] = a[index[i]].
  Var index_select_rows(Var a, std::vector<std::int32_t> index) {
    const auto& A = value(a);
    Tensor<T> out(index.size(), A.cols);
    for (std::size_t i = 0; i < index.size(); ++i) {
      check(index[i] >= 0 && static_cast<std::size_t>(index[i]) < A.rows, "index_select_rows", "index out of range");
      std::copy(A.row(index[i]), A.row(index[i]) + A.cols, out.row(i));
    }
    return push(std::move(out), needs(a), [a, idx = std::move(index)](Tape& t, Var o) {
      auto& ga = t.grad_buf(a);
      const auto& g = t.nodes_[o.id].grad;
      const std::size_t cols = t.value(a).cols;
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t c = 0; c < cols; ++c) ga[idx[i] * cols + c] += g[i * cols + c];
    });
  }

  /// Accumulates rows into an n_out x cols result: out[index[i]] += a[i].
  /// Rows are added in the order they appear in `a`.
  Var scatter_add_rows(Var a, std::vector<std::int32_t> index, std::size_t n_out) {
    const auto& A = value(a);
    check(index.size() == A.rows, "scatter_add_rows", "one index per row required");
    Tensor<T> out(n_out, A.cols);
    for (std::size_t i = 0; i < index.size(); ++i) {
      check(index[i] >= 0 && static_cast<std::size_t>(index[i]) < n_out, "scatter_add_rows", "index out of range");
      T* dst = out.row(index[i]);
      const T* src = A.row(i);
      for (std::size_t c = 0; c < A.cols; ++c) dst[c] += src[c];
    }
    return push(std::move(out), needs(a), [a, idx = std::move(index)](Tape& t, Var o) {
      auto& ga = t.grad_buf(a);
      const auto& g = t.nodes_[o.id].grad;
      const std::size_t cols = t.value(a).cols;
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t c = 0; c < cols; ++c) ga[i * cols + c] += g[idx[i] * cols + c];
    });
  }

  /// Sum over masked rows of w[y] * -log p[y], divided by the sum of those weights.
  /// Probabilities are floored at 1e-12 before the log. An empty selection gives 0.
  Var weighted_cross_entropy(Var probs, std::vector<std::int32_t> labels, std::vector<T> weights,
                             std::vector<std::uint8_t> mask) {
    const auto& P = value(probs);
    check(labels.size() == P.rows && mask.size() == P.rows, "weighted_cross_entropy", "labels/mask length differs from rows");
    check(weights.size() == P.cols, "weighted_cross_entropy", "one weight per class required");
    T num = T(0), den = T(0);
    for (std::size_t r = 0; r < P.rows; ++r) {
      if (!mask[r]) continue;
      check(labels[r] >= 0 && static_cast<std::size_t>(labels[r]) < P.cols, "weighted_cross_entropy", "label out of range");
      const T w = weights[labels[r]];
      num += w * -std::log(std::max(P.at(r, labels[r]), kProbFloor));
      den += w;
    }
    const T loss = den > T(0) ? num / den : T(0);
    return push(Tensor<T>(1, 1, loss), needs(probs) && den > T(0),
                [probs, den, y = std::move(labels), w = std::move(weights), m = std::move(mask)](Tape& t, Var o) {
                  const auto& P = t.value(probs);
                  const T g = t.nodes_[o.id].grad[0];
                  auto& gp = t.grad_buf(probs);
                  for (std::size_t r = 0; r < P.rows; ++r) {
                    if (!m[r]) continue;
                    const T p = P.at(r, y[r]);
                    if (p > kProbFloor) gp[r * P.cols + y[r]] -= g * w[y[r]] / (den * p);
                  }
                });
  }

 private:
  struct Node {
    Tensor<T> value;
    std::vector<T> grad;
    bool needs_grad = false;
    Tensor<T>* param = nullptr;
    std::function<void(Tape&)> back;
  };

  static void check(bool ok, const char* op, const char* what) {
    if (!ok) throw ShapeError(std::string(op) + ": " + what);
  }
  static T sigmoid(T x) { return T(1) / (T(1) + std::exp(-x)); }
  static void axpy(std::vector<T>& dst, const std::vector<T>& src, T s) {
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += s * src[k];
  }
  static CMap cmap(const Tensor<T>& t) { return CMap(t.data.data(), t.rows, t.cols); }
  static Tensor<T> plain(const Tensor<T>& t) { return Tensor<T>(t.rows, t.cols, t.data); }

  /// out = A B, accumulating each output row over k in ascending order.
  /// Zero entries of A are skipped; node features are mostly zero blocks.
  static void row_product(const Tensor<T>& A, const Tensor<T>& B, Tensor<T>& out) {
    using RowVec = Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>;
    using CRowVec = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;
    for (std::size_t i = 0; i < A.rows; ++i) {
      RowVec acc(out.row(i), B.cols);
      const T* a = A.row(i);
      for (std::size_t k = 0; k < A.cols; ++k)
        if (a[k] != T(0)) acc.noalias() += a[k] * CRowVec(B.row(k), B.cols);
    }
  }

  bool needs(Var v) const { return nodes_.at(v.id).needs_grad; }

  std::vector<T>& grad_buf(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.empty()) n.grad.assign(n.value.size(), T(0));
    return n.grad;
  }

  Var push(Tensor<T> value, bool needs_grad, std::function<void(Tape&, Var)> back) {
    Var v{static_cast<std::uint32_t>(nodes_.size())};
    Node n;
    n.value = std::move(value);
    n.value.requires_grad = false;
    n.value.grad.clear();
    n.needs_grad = needs_grad;
    if (back) {
      n.back = [fn = std::move(back), v](Tape& t) { fn(t, v); };
    }
    nodes_.push_back(std::move(n));
    return v;
  }

  std::vector<Node> nodes_;
};

/// One LSTM step: gates = x W_ih + h W_hh + b, then the pointwise cell update.
template <typename T>
std::pair<Var, Var> lstm_cell_step(Tape<T>& tape, Var x, Var h, Var c, Var w_ih, Var w_hh, Var bias) {
  const std::size_t hidden = tape.value(c).cols;
  Var gates = tape.add(tape.add(tape.matmul(x, w_ih), tape.matmul(h, w_hh)), bias);
  Var hc = tape.lstm_pointwise(gates, c);
  return {tape.slice_cols(hc, 0, hidden), tape.slice_cols(hc, hidden, hidden)};
}

}  // namespace matgraph::ad
