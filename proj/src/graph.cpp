#include "skelcap/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace skelcap::nn {

namespace {

template <typename T>
void require(bool ok, const char* op, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (!ok)
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) +
                     " and " + shape_string(b.shape()));
}

template <typename T>
void require_matrix(const BasicTensor<T>& a, const char* op) {
  if (a.shape().size() != 2)
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
}

}  // namespace

template <typename T>
Var BasicGraph<T>::push(TensorT value, bool requires_grad,
                        std::function<void(BasicGraph&, std::size_t)> backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad && track_;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
std::vector<T>& BasicGraph<T>::grad_of(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(value(Var{id}).size(), T(0));
  return n.grad;
}

template <typename T>
void BasicGraph<T>::check_finite(const TensorT& t, const char* op) const {
  if (!t.all_finite()) throw NonFiniteError(std::string("non-finite value produced by ") + op);
}

template <typename T>
Var BasicGraph<T>::constant(TensorT value) {
  check_finite(value, "constant");
  return push(std::move(value), false);
}

template <typename T>
Var BasicGraph<T>::parameter(BasicParameter<T>& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var{it->second};
  // Parameter values are read in place; they must not change while the
  // graph is alive.
  if (!track_) return frozen(p);
  Var v = push(TensorT{}, true, [](BasicGraph&, std::size_t) {});
  nodes_[v.id].param = &p;
  nodes_[v.id].source = &p;
  param_nodes_.emplace(&p, v.id);
  return v;
}

template <typename T>
Var BasicGraph<T>::frozen(const BasicParameter<T>& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var{it->second};
  Var v = push(TensorT{}, false);
  nodes_[v.id].source = &p;
  param_nodes_.emplace(&p, v.id);
  return v;
}

template <typename T>
Var BasicGraph<T>::matmul(Var av, Var bv) {
  const auto& a = value(av);
  const auto& b = value(bv);
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  require(a.cols() == b.rows(), "matmul", a, b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  TensorT out = TensorT::matrix(m, n);
  gemm(a.data(), b.data(), out.data(), m, k, n);
  check_finite(out, "matmul");
  bool rg = requires_grad(av) || requires_grad(bv);
  return push(std::move(out), rg, [av, bv, m, k, n](BasicGraph& g, std::size_t self) {
    const auto& go = g.nodes_[self].grad;
    const auto& a = g.value(av);
    const auto& b = g.value(bv);
    if (g.requires_grad(av)) gemm(go.data(), b.data(), g.grad_of(av.id).data(), m, n, k, true, false, true);
    if (g.requires_grad(bv)) gemm(a.data(), go.data(), g.grad_of(bv.id).data(), k, m, n, true, true, false);
  });
}

template <typename T>
Var BasicGraph<T>::add(Var av, Var bv) {
  const auto& a = value(av);
  const auto& b = value(bv);
  bool same = a.shape() == b.shape();
  bool bcast = !same && b.rows() == 1 && b.cols() == a.cols() && a.shape().size() == 2;
  require(same || bcast, "add", a, b);
  TensorT out = a;
  const std::size_t n = a.cols();
  if (same) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  } else {
    for (std::size_t r = 0; r < a.rows(); ++r)
      for (std::size_t j = 0; j < n; ++j) out[r * n + j] += b[j];
  }
  check_finite(out, "add");
  bool rg = requires_grad(av) || requires_grad(bv);
  return push(std::move(out), rg, [av, bv, same, n](BasicGraph& g, std::size_t self) {
    const auto& go = g.nodes_[self].grad;
    if (g.requires_grad(av)) {
      auto& ga = g.grad_of(av.id);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    }
    if (g.requires_grad(bv)) {
      auto& gb = g.grad_of(bv.id);
      if (same) {
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
      } else {
        for (std::size_t r = 0; r < go.size() / n; ++r)
          for (std::size_t j = 0; j < n; ++j) gb[j] += go[r * n + j];
      }
    }
  });
}

template <typename T>
Var BasicGraph<T>::sub(Var av, Var bv) {
  const auto& a = value(av);
  const auto& b = value(bv);
  require(a.shape() == b.shape(), "sub", a, b);
  TensorT out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  check_finite(out, "sub");
  bool rg = requires_grad(av) || requires_grad(bv);
  return push(std::move(out), rg, [av, bv](BasicGraph& g, std::size_t self) {
    const auto& go = g.nodes_[self].grad;
    if (g.requires_grad(av)) {
      auto& ga = g.grad_of(av.id);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    }
    if (g.requires_grad(bv)) {
      auto& gb = g.grad_of(bv.id);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
    }
  });
}

template <typename T>
Var BasicGraph<T>::mul(Var av, Var bv) {
  const auto& a = value(av);
  const auto& b = value(bv);
  require(a.shape() == b.shape(), "mul", a, b);
  TensorT out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  check_finite(out, "mul");
  bool rg = requires_grad(av) || requires_grad(bv);
  return push(std::move(out), rg, [av, bv](BasicGraph& g, std::size_t self) {
    const auto& go = g.nodes_[self].grad;
    const auto& a = g.value(av);
    const auto& b = g.value(bv);
    if (g.requires_grad(av)) {
      auto& ga = g.grad_of(av.id);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * b[i];
    }
    if (g.requires_grad(bv)) {
      auto& gb = g.grad_of(bv.id);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * a[i];
    }
  });
}

template <typename T>
Var BasicGraph<T>::scale(Var av, T factor) {
  TensorT out = value(av);
  for (auto& v : out.values()) v *= factor;
  check_finite(out, "scale");
  return push(std::move(out), requires_grad(av), [av, factor](BasicGraph& g, std::size_t self) {
    const auto& go = g.nodes_[self].grad;
    auto& ga = g.grad_of(av.id);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * factor;
  });
}

template <typename T>
Var BasicGraph<T>::tanh(Var av) {
  TensorT out = value(av);
  // tanh(x) = sign(x) (1 - 2 / (exp(2|x|) + 1)); much cheaper than std::tanh.
  for (auto& v : out.values()) {
    T y = T(1) - T(2) / (std::exp(T(2) * std::abs(v)) + T(1));
    v = v < T(0) ? -y : y;
  }
  return push(std::move(out), requires_grad(av), [av](BasicGraph& g, std::size_t self) {
    const auto& go = g.nodes_[self].grad;
    const auto& y = g.value(Var{self});
    auto& ga = g.grad_of(av.id);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * (T(1) - y[i] * y[i]);
  });
}

template <typename T>
Var BasicGraph<T>::sigmoid(Var av) {
  TensorT out = value(av);
  for (auto& v : out.values()) v = T(1) / (T(1) + std::exp(-v));
  check_finite(out, "sigmoid");
  return push(std::move(out), requires_grad(av), [av](BasicGraph& g, std::size_t self) {
    const auto& go = g.nodes_[self].grad;
    const auto& y = g.value(Var{self});
    auto& ga = g.grad_of(av.id);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * y[i] * (T(1) - y[i]);
  });
}

template <typename T>
Var BasicGraph<T>::softmax(Var av, int axis) {
  const auto& a = value(av);
  require_matrix(a, "softmax");
  if (axis != 0 && axis != 1) throw ShapeError("softmax: axis must be 0 or 1");
  const std::size_t rows = a.rows(), cols = a.cols();
  // Lines are rows for axis 1 and columns for axis 0.
  const std::size_t lines = axis == 1 ? rows : cols;
  const std::size_t len = axis == 1 ? cols : rows;
  const std::size_t stride = axis == 1 ? 1 : cols;
  auto at = [=](std::size_t line, std::size_t i) {
    return axis == 1 ? line * cols + i * stride : i * stride + line;
  };
  TensorT out = a;
  for (std::size_t l = 0; l < lines; ++l) {
    T mx = a[at(l, 0)];
    for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, a[at(l, i)]);
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      T e = std::exp(a[at(l, i)] - mx);
      out[at(l, i)] = e;
      s += e;
    }
    for (std::size_t i = 0; i < len; ++i) out[at(l, i)] = static_cast<T>(out[at(l, i)] / s);
  }
  check_finite(out, "softmax");
  return push(std::move(out), requires_grad(av), [av, lines, len, at](BasicGraph& g, std::size_t self) {
    const auto& go = g.nodes_[self].grad;
    const auto& y = g.value(Var{self});
    auto& ga = g.grad_of(av.id);
    for (std::size_t l = 0; l < lines; ++l) {
      double dot = 0.0;
      for (std::size_t i = 0; i < len; ++i) dot += static_cast<double>(go[at(l, i)]) * y[at(l, i)];
      for (std::size_t i = 0; i < len; ++i)
        ga[at(l, i)] += static_cast<T>(y[at(l, i)] * (go[at(l, i)] - dot));
    }
  });
}

template <typename T>
Var BasicGraph<T>::concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  std::vector<Var> ins(parts.begin(), parts.end());
  const auto& first = value(ins[0]);
  require_matrix(first, "concat");
  bool rg = false;
  std::size_t total = 0;
  for (Var v : ins) {
    const auto& t = value(v);
    require_matrix(t, "concat");
    if (axis == 1) require(t.rows() == first.rows(), "concat", first, t);
    if (axis == 0) require(t.cols() == first.cols(), "concat", first, t);
    total += axis == 1 ? t.cols() : t.rows();
    rg = rg || requires_grad(v);
  }
  TensorT out = axis == 1 ? TensorT::matrix(first.rows(), total) : TensorT::matrix(total, first.cols());
  if (axis == 1) {
    std::size_t off = 0;
    for (Var v : ins) {
      const auto& t = value(v);
      for (std::size_t r = 0; r < t.rows(); ++r)
        std::copy_n(t.data() + r * t.cols(), t.cols(), out.data() + r * total + off);
      off += t.cols();
    }
  } else {
    std::size_t off = 0;
    for (Var v : ins) {
      const auto& t = value(v);
      std::copy_n(t.data(), t.size(), out.data() + off);
      off += t.size();
    }
  }
  return push(std::move(out), rg, [ins, axis, total](BasicGraph& g, std::size_t self) {
    const auto& go = g.nodes_[self].grad;
    std::size_t off = 0;
    for (Var v : ins) {
      const auto& t = g.value(v);
      if (g.requires_grad(v)) {
        auto& gv = g.grad_of(v.id);
        if (axis == 1) {
          for (std::size_t r = 0; r < t.rows(); ++r)
            for (std::size_t j = 0; j < t.cols(); ++j) gv[r * t.cols() + j] += go[r * total + off + j];
        } else {
          for (std::size_t i = 0; i < t.size(); ++i) gv[i] += go[off + i];
        }
      }
      off += axis == 1 ? t.cols() : t.size();
    }
  });
}

template <typename T>
Var BasicGraph<T>::slice_cols(Var av, std::size_t begin, std::size_t end) {
  const auto& a = value(av);
  require_matrix(a, "slice_cols");
  if (begin >= end || end > a.cols())
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") outside " + shape_string(a.shape()));
  const std::size_t rows = a.rows(), cols = a.cols(), w = end - begin;
  TensorT out = TensorT::matrix(rows, w);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(a.data() + r * cols + begin, w, out.data() + r * w);
  return push(std::move(out), requires_grad(av), [av, begin, rows, cols, w](BasicGraph& g, std::size_t self) {
    const auto& go = g.nodes_[self].grad;
    auto& ga = g.grad_of(av.id);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < w; ++j) ga[r * cols + begin + j] += go[r * w + j];
  });
}

template <typename T>
Var BasicGraph<T>::lookup(Var tv, std::span<const int> indices) {
  const auto& table = value(tv);
  require_matrix(table, "lookup");
  const std::size_t width = table.cols();
  std::vector<int> idx(indices.begin(), indices.end());
  TensorT out = TensorT::matrix(idx.size(), width);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || static_cast<std::size_t>(idx[r]) >= table.rows())
      throw std::out_of_range("lookup: index " + std::to_string(idx[r]) + " outside table of " +
                              std::to_string(table.rows()) + " rows");
    std::copy_n(table.data() + static_cast<std::size_t>(idx[r]) * width, width, out.data() + r * width);
  }
  return push(std::move(out), requires_grad(tv), [tv, idx, width](BasicGraph& g, std::size_t self) {
    const auto& go = g.nodes_[self].grad;
    auto& gt = g.grad_of(tv.id);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      T* dst = gt.data() + static_cast<std::size_t>(idx[r]) * width;
      for (std::size_t j = 0; j < width; ++j) dst[j] += go[r * width + j];
    }
  });
}

template <typename T>
Var BasicGraph<T>::reshape(Var av, std::size_t rows, std::size_t cols) {
  TensorT out = value(av);
  out.reshape({rows, cols});
  return push(std::move(out), requires_grad(av), [av](BasicGraph& g, std::size_t self) {
    const auto& go = g.nodes_[self].grad;
    auto& ga = g.grad_of(av.id);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
  });
}

template <typename T>
Var BasicGraph<T>::sum(Var av) {
  const auto& a = value(av);
  double s = 0.0;
  for (T v : a.values()) s += v;
  TensorT out = TensorT::matrix(1, 1, static_cast<T>(s));
  check_finite(out, "sum");
  return push(std::move(out), requires_grad(av), [av](BasicGraph& g, std::size_t self) {
    T go = g.nodes_[self].grad[0];
    auto& ga = g.grad_of(av.id);
    for (auto& x : ga) x += go;
  });
}

template <typename T>
Var BasicGraph<T>::mean(Var av) {
  const auto& a = value(av);
  if (a.size() == 0) throw ShapeError("mean: empty tensor");
  double s = 0.0;
  for (T v : a.values()) s += v;
  const std::size_t n = a.size();
  TensorT out = TensorT::matrix(1, 1, static_cast<T>(s / static_cast<double>(n)));
  check_finite(out, "mean");
  return push(std::move(out), requires_grad(av), [av, n](BasicGraph& g, std::size_t self) {
    T go = g.nodes_[self].grad[0] / static_cast<T>(n);
    auto& ga = g.grad_of(av.id);
    for (auto& x : ga) x += go;
  });
}

template <typename T>
Var BasicGraph<T>::group_mean(Var av, std::size_t group) {
  const auto& a = value(av);
  require_matrix(a, "group_mean");
  if (group == 0 || a.rows() % group != 0)
    throw ShapeError("group_mean: " + std::to_string(a.rows()) + " rows not divisible by " +
                     std::to_string(group));
  const std::size_t batch = a.rows() / group, n = a.cols();
  TensorT out = TensorT::matrix(batch, n);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < group; ++k) s += a[(b * group + k) * n + j];
      out[b * n + j] = static_cast<T>(s / static_cast<double>(group));
    }
  return push(std::move(out), requires_grad(av), [av, batch, group, n](BasicGraph& g, std::size_t self) {
    const auto& go = g.nodes_[self].grad;
    auto& ga = g.grad_of(av.id);
    const T inv = T(1) / static_cast<T>(group);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t k = 0; k < group; ++k)
        for (std::size_t j = 0; j < n; ++j) ga[(b * group + k) * n + j] += go[b * n + j] * inv;
  });
}

template <typename T>
Var BasicGraph<T>::add_grouped(Var av, Var bv, std::size_t group) {
  const auto& a = value(av);
  const auto& b = value(bv);
  require_matrix(a, "add_grouped");
  require_matrix(b, "add_grouped");
  require(group > 0 && a.cols() == b.cols() && a.rows() == b.rows() * group, "add_grouped", a, b);
  const std::size_t batch = b.rows(), n = a.cols();
  TensorT out = a;
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t k = 0; k < group; ++k)
      for (std::size_t j = 0; j < n; ++j) out[(r * group + k) * n + j] += b[r * n + j];
  check_finite(out, "add_grouped");
  bool rg = requires_grad(av) || requires_grad(bv);
  return push(std::move(out), rg, [av, bv, batch, group, n](BasicGraph& g, std::size_t self) {
    const auto& go = g.nodes_[self].grad;
    if (g.requires_grad(av)) {
      auto& ga = g.grad_of(av.id);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    }
    if (g.requires_grad(bv)) {
      auto& gb = g.grad_of(bv.id);
      for (std::size_t r = 0; r < batch; ++r)
        for (std::size_t k = 0; k < group; ++k)
          for (std::size_t j = 0; j < n; ++j) gb[r * n + j] += go[(r * group + k) * n + j];
    }
  });
}

template <typename T>
Var BasicGraph<T>::weighted_pool(Var alpha_v, Var values_v) {
  const auto& alpha = value(alpha_v);
  const auto& vals = value(values_v);
  require_matrix(alpha, "weighted_pool");
  require_matrix(vals, "weighted_pool");
  const std::size_t batch = alpha.rows(), group = alpha.cols(), d = vals.cols();
  require(vals.rows() == batch * group, "weighted_pool", alpha, vals);
  TensorT out = TensorT::matrix(batch, d);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t k = 0; k < group; ++k) {
      const T w = alpha[b * group + k];
      const T* src = vals.data() + (b * group + k) * d;
      T* dst = out.data() + b * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += w * src[j];
    }
  check_finite(out, "weighted_pool");
  bool rg = requires_grad(alpha_v) || requires_grad(values_v);
  return push(std::move(out), rg, [alpha_v, values_v, batch, group, d](BasicGraph& g, std::size_t self) {
    const auto& go = g.nodes_[self].grad;
    const auto& alpha = g.value(alpha_v);
    const auto& vals = g.value(values_v);
    if (g.requires_grad(alpha_v)) {
      auto& ga = g.grad_of(alpha_v.id);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t k = 0; k < group; ++k) {
          T s = 0;
          const T* src = vals.data() + (b * group + k) * d;
          for (std::size_t j = 0; j < d; ++j) s += go[b * d + j] * src[j];
          ga[b * group + k] += s;
        }
    }
    if (g.requires_grad(values_v)) {
      auto& gv = g.grad_of(values_v.id);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t k = 0; k < group; ++k) {
          const T w = alpha[b * group + k];
          for (std::size_t j = 0; j < d; ++j) gv[(b * group + k) * d + j] += w * go[b * d + j];
        }
    }
  });
}

template <typename T>
Var BasicGraph<T>::cross_entropy(Var logits_v, std::span<const int> targets) {
  const auto& z = value(logits_v);
  require_matrix(z, "cross_entropy");
  const std::size_t rows = z.rows(), q = z.cols();
  if (targets.size() != rows)
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(rows) + " rows");
  std::vector<int> tg(targets.begin(), targets.end());
  // Softmax rows are kept for the backward pass.
  std::vector<T> probs(z.size());
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (tg[r] < -1 || tg[r] >= static_cast<int>(q))
      throw std::out_of_range("cross_entropy: target " + std::to_string(tg[r]) + " outside [0," +
                              std::to_string(q) + ")");
    const T* row = z.data() + r * q;
    T mx = *std::max_element(row, row + q);
    double s = 0.0;
    for (std::size_t j = 0; j < q; ++j) s += std::exp(static_cast<double>(row[j] - mx));
    for (std::size_t j = 0; j < q; ++j)
      probs[r * q + j] = static_cast<T>(std::exp(static_cast<double>(row[j] - mx)) / s);
    if (tg[r] >= 0) loss += std::log(s) - static_cast<double>(row[tg[r]] - mx);
  }
  TensorT out = TensorT::matrix(1, 1, static_cast<T>(loss));
  check_finite(out, "cross_entropy");
  return push(std::move(out), requires_grad(logits_v),
              [logits_v, tg = std::move(tg), probs = std::move(probs), q](BasicGraph& g, std::size_t self) {
                T go = g.nodes_[self].grad[0];
                auto& gz = g.grad_of(logits_v.id);
                for (std::size_t r = 0; r < tg.size(); ++r) {
                  if (tg[r] < 0) continue;
                  for (std::size_t j = 0; j < q; ++j) gz[r * q + j] += go * probs[r * q + j];
                  gz[r * q + static_cast<std::size_t>(tg[r])] -= go;
                }
              });
}

template <typename T>
void BasicGraph<T>::backward(Var loss) {
  if (value(loss).size() != 1)
    throw ShapeError("backward: loss must be a scalar, got " + shape_string(value(loss).shape()));
  for (auto& n : nodes_) n.grad.clear();
  grad_of(loss.id)[0] = T(1);
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    auto& n = nodes_[id];
    if (n.grad.empty() || !n.requires_grad) continue;
    if (n.backward) n.backward(*this, id);
  }
  for (auto& n : nodes_) {
    if (!n.param || n.grad.empty()) continue;
    auto& pg = n.param->grad;
    if (pg.empty()) pg.assign(n.grad.size(), T(0));
    for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += n.grad[i];
    for (T v : pg)
      if (!std::isfinite(v)) throw NonFiniteError("non-finite gradient for " + n.param->name);
  }
}

template class BasicGraph<float>;
template class BasicGraph<double>;

}  // namespace skelcap::nn
