#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <unordered_map>
#include <vector>

#include "skelcap/params.hpp"
#include "skelcap/tensor.hpp"

namespace skelcap::nn {

// Handle to a value recorded on a graph.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
  bool valid() const { return id != static_cast<std::size_t>(-1); }
};

// Eager reverse-mode tape. Each operation computes its value immediately
// and, when any input needs a gradient, records a backward closure.
// Operations work on matrices (rows x cols); a scalar is a 1x1 matrix.
template <typename T>
class BasicGraph {
 public:
  using TensorT = BasicTensor<T>;

  // A graph built with track_gradients = false records no backward closures.
  explicit BasicGraph(bool track_gradients = true) : track_(track_gradients) {}
  BasicGraph(const BasicGraph&) = delete;
  BasicGraph& operator=(const BasicGraph&) = delete;

  Var constant(TensorT value);
  // Leaf bound to a parameter; repeated calls return the same node.
  Var parameter(BasicParameter<T>& p);
  // Read-only view of a parameter; never receives gradients.
  Var frozen(const BasicParameter<T>& p);

  const TensorT& value(Var v) const {
    const auto& n = nodes_[v.id];
    return n.source ? n.source->value : n.value;
  }
  // Gradient of a node after backward(); empty for constants.
  const std::vector<T>& grad(Var v) const { return nodes_[v.id].grad; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  // Same shape, or b a single row broadcast over the rows of a.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, T factor);
  Var affine(Var x, Var w, Var b) { return add(matmul(x, w), b); }
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var softmax(Var a, int axis = 1);
  Var concat(std::span<const Var> parts, int axis = 1);
  Var concat(std::initializer_list<Var> parts, int axis = 1) {
    std::vector<Var> v(parts);
    return concat(std::span<const Var>(v), axis);
  }
  Var slice_cols(Var a, std::size_t begin, std::size_t end);
  // Rows of `table` selected by index.
  Var lookup(Var table, std::span<const int> indices);
  Var reshape(Var a, std::size_t rows, std::size_t cols);
  Var sum(Var a);
  Var mean(Var a);
  // Row-wise mean over consecutive groups of `group` rows: [B*K, n] -> [B, n].
  Var group_mean(Var a, std::size_t group);
  // a[B*K, n] + b[B, n] with row b added to each of its K rows.
  Var add_grouped(Var a, Var b, std::size_t group);
  // Attention pooling: out[b] = sum_k alpha[b, k] * values[b*K + k].
  Var weighted_pool(Var alpha, Var values);
  // Sum over rows of -log softmax(logits)[row, target]; target -1 skips a row.
  Var cross_entropy(Var logits, std::span<const int> targets);

  // Populates gradients of every node reachable from the scalar `loss` and
  // accumulates them into bound parameters.
  void backward(Var loss);

 private:
  struct Node {
    TensorT value;
    std::vector<T> grad;
    bool requires_grad = false;
    std::function<void(BasicGraph&, std::size_t)> backward;
    const BasicParameter<T>* source = nullptr;
    BasicParameter<T>* param = nullptr;
  };

  Var push(TensorT value, bool requires_grad,
           std::function<void(BasicGraph&, std::size_t)> backward = {});
  std::vector<T>& grad_of(std::size_t id);
  void check_finite(const TensorT& t, const char* op) const;

  std::vector<Node> nodes_;
  std::unordered_map<const BasicParameter<T>*, std::size_t> param_nodes_;
  bool track_ = true;
};

using Graph = BasicGraph<float>;

}  // namespace skelcap::nn
