#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "tt/parameters.hpp"
#include "tt/tensor.hpp"

namespace tt {

class Graph;

// Lightweight handle to a node in a Graph.
struct Var {
  Graph* graph = nullptr;
  int32_t id = -1;

  bool valid() const { return graph != nullptr && id >= 0; }
  const Tensor& value() const;
  const std::vector<Index>& shape() const;
  Index dim(Index axis) const { return shape().at(static_cast<size_t>(axis)); }
  Index size() const;
};

// Reverse-mode tape. Nodes are appended in forward order; backward() sweeps
// them in reverse, which is a valid topological order because every node's
// inputs were created before it. All accumulation happens in a fixed order,
// so gradients are bit-reproducible for a given forward trace.
class Graph {
 public:
  // backward callback: receives the graph and the node's own id; reads the
  // node's grad and accumulates into the grads of its input nodes (and into
  // a bound Parameter, for param leaves).
  using BackwardFn = std::function<void(Graph&, int32_t)>;

  Var leaf(Tensor value) { return push(std::move(value), nullptr, nullptr); }

  // Leaf tied to an external Parameter; backward adds into p.grad.
  Var param(Parameter& p) {
    Parameter* bound = &p;
    return push(p.value, bound,
                [](Graph& g, int32_t id) { g.node(id).bound->grad.array() += g.grad_of(id).array(); });
  }

  Var make(Tensor value, BackwardFn backward) { return push(std::move(value), nullptr, std::move(backward)); }

  const Tensor& value_of(int32_t id) const { return nodes_[static_cast<size_t>(id)].value; }

  // Gradient buffer of a node, allocated (zeroed) on first touch.
  Tensor& grad_of(int32_t id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.grad_live) {
      n.grad = Tensor(n.value.shape());
      n.grad_live = true;
    }
    return n.grad;
  }

  bool grad_live(int32_t id) const { return nodes_[static_cast<size_t>(id)].grad_live; }

  // Seeds d(root)/d(root) = 1 and runs the reverse sweep. root must be a
  // scalar (size-1) node.
  void backward(Var root) {
    if (root.graph != this) throw ShapeError("backward: var belongs to a different graph");
    if (value_of(root.id).size() != 1) throw ShapeError("backward: root must be a scalar");
    grad_of(root.id)[0] = 1.0;
    for (int32_t id = static_cast<int32_t>(nodes_.size()) - 1; id >= 0; --id) {
      Node& n = nodes_[static_cast<size_t>(id)];
      if (n.grad_live && n.backward) n.backward(*this, id);
    }
  }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool grad_live = false;
    Parameter* bound = nullptr;
    BackwardFn backward;
  };

  Node& node(int32_t id) { return nodes_[static_cast<size_t>(id)]; }

  Var push(Tensor value, Parameter* bound, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    n.bound = bound;
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int32_t>(nodes_.size() - 1)};
  }

  // Deque so references returned by value_of/grad_of stay valid while new
  // nodes are appended.
  std::deque<Node> nodes_;
};

inline const Tensor& Var::value() const { return graph->value_of(id); }
inline const std::vector<Index>& Var::shape() const { return graph->value_of(id).shape(); }
inline Index Var::size() const { return graph->value_of(id).size(); }

}  // namespace tt
