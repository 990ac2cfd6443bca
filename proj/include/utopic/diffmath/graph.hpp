#pragma once

#include <deque>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "utopic/diffmath/params.hpp"
#include "utopic/diffmath/tensor.hpp"

namespace utopic::diffmath {

class Graph;

/// Handle to a value recorded on a Graph. Cheap to copy; valid while the
/// graph is alive.
class Var {
 public:
  Var() = default;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Graph* graph() const { return graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so the tape is
/// already topologically sorted and backward is a single reverse sweep.
class Graph {
 public:
  /// Called during backward with the node's accumulated output gradient.
  using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor t) { return push(std::move(t), false, {}); }

  /// A differentiable input that is not a named parameter.
  Var leaf(Tensor t) { return push(std::move(t), true, {}); }

  /// Registers (once per graph) the named parameter of `store` as a leaf.
  Var param(const ParamStore& store, const std::string& name) {
    if (auto it = param_ids_.find(name); it != param_ids_.end()) return Var(this, it->second);
    Var v = push(store.at(name), true, {});
    param_ids_.emplace(name, v.id());
    return v;
  }

  /// Records an op result. `backward` may be empty when no input needs grad.
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
    if (!value.all_finite()) throw ContractError("non-finite value produced by a forward op");
    bool needs = false;
    for (const Var& v : inputs) needs = needs || nodes_[v.id()].requires_grad;
    return push(std::move(value), needs, needs ? std::move(backward) : BackwardFn{});
  }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(const Var& v) const { return nodes_[v.id()].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Adds `g` into the gradient slot of `v` (no-op for constants).
  void accumulate(const Var& v, const Tensor& g) {
    Node& n = nodes_[v.id()];
    if (!n.requires_grad) return;
    if (!n.has_grad) {
      n.grad = g;
      n.has_grad = true;
      return;
    }
    n.grad += g;
  }

  /// Mutable gradient buffer of `v`, zero-initialised on first touch. Lets
  /// ops scatter into the gradient without building a temporary.
  Tensor* grad_buffer(const Var& v) {
    Node& n = nodes_[v.id()];
    if (!n.requires_grad) return nullptr;
    if (!n.has_grad) {
      n.grad = Tensor(n.value.shape(), std::vector<double>(n.value.size(), 0.0));
      n.has_grad = true;
    }
    return &n.grad;
  }

  /// Gradient of `v` after backward(); zeros when `v` did not influence the loss.
  Tensor grad(const Var& v) const {
    const Node& n = nodes_[v.id()];
    if (n.has_grad) return n.grad;
    return Tensor(n.value.shape(), std::vector<double>(n.value.size(), 0.0));
  }

  /// Runs the reverse sweep from a scalar loss. Each node is visited once.
  void backward(const Var& loss) {
    if (loss.graph() != this) throw ContractError("backward: loss belongs to another graph");
    if (nodes_[loss.id()].value.size() != 1) {
      throw ContractError("backward: loss must be scalar, got " + nodes_[loss.id()].value.shape_string());
    }
    for (auto& n : nodes_) {
      n.has_grad = false;
      n.grad = Tensor();
    }
    accumulate(loss, Tensor(nodes_[loss.id()].value.shape(), {1.0}));
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad || !n.backward) continue;
      // Closures only touch their inputs' gradients, and no node is appended
      // during the sweep, so the reference stays valid.
      n.backward(*this, n.grad);
    }
  }

  /// d(loss)/d(param) for every parameter of `store`; untouched ones get zeros.
  Gradients gradients(const ParamStore& store) const {
    Gradients out;
    for (const auto& [name, t] : store.tensors()) {
      auto it = param_ids_.find(name);
      if (it == param_ids_.end() || !nodes_[it->second].has_grad) {
        out.emplace(name, Tensor(t.shape(), std::vector<double>(t.size(), 0.0)));
      } else {
        out.emplace(name, nodes_[it->second].grad);
      }
    }
    return out;
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(Tensor t, bool requires_grad, BackwardFn fn) {
    nodes_.push_back(Node{std::move(t), Tensor(), false, requires_grad, std::move(fn)});
    return Var(this, nodes_.size() - 1);
  }

  // A deque keeps Var::value() references valid while later ops append.
  std::deque<Node> nodes_;
  std::map<std::string, std::size_t> param_ids_;
};

inline const Tensor& Var::value() const { return graph_->value(id_); }

}  // namespace utopic::diffmath
