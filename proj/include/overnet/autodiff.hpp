#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "overnet/common.hpp"
#include "overnet/tensor.hpp"

namespace overnet {

// Reverse-mode tape over Tensor4 values. The graph is a DAG of shared_ptr
// nodes rebuilt on every forward pass; backward() walks it once in reverse
// topological order and then drops buffers eagerly, so peak memory is the
// forward graph, not twice it.
template <typename T>
struct Node {
  Tensor4<T> val;
  Tensor4<T> grad;  // allocated on first touch during backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad (and any captured state) and accumulates into
  // parent grads via accum_grad. Empty for leaves.
  std::function<void(Node&)> backprop;
  // External gradient slot (an optimizer-owned buffer). Receives this
  // node's grad once it is final.
  Tensor4<T>* grad_sink = nullptr;
  const char* op = "leaf";
  // Sign pattern at this op's non-smooth sites (relu inputs, absolute-value
  // arguments), captured at forward time when kink_recording() is on. A
  // finite-difference probe whose two endpoints disagree here has stepped
  // across a kink, where central differences are not a valid oracle.
  std::vector<signed char> kink_signs;
};

// Toggles kink-sign capture; off outside gradient checking.
inline bool& kink_recording() {
  static bool on = false;
  return on;
}

template <typename T>
using Value = std::shared_ptr<Node<T>>;

template <typename T>
Value<T> make_leaf(Tensor4<T> v, bool requires_grad = false,
                   Tensor4<T>* sink = nullptr) {
  auto n = std::make_shared<Node<T>>();
  n->val = std::move(v);
  n->requires_grad = requires_grad || sink != nullptr;
  n->grad_sink = sink;
  return n;
}

template <typename T>
Value<T> make_op(const char* op, Tensor4<T> v, std::vector<Value<T>> parents,
                 std::function<void(Node<T>&)> backprop) {
  auto n = std::make_shared<Node<T>>();
  n->op = op;
  n->val = std::move(v);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->backprop = std::move(backprop);
  return n;
}

// Lazily allocate and expose a node's grad buffer for accumulation.
template <typename T>
Tensor4<T>& accum_grad(const Value<T>& n) {
  if (n->grad.size() == 0)
    n->grad = Tensor4<T>(n->val.n, n->val.c, n->val.h, n->val.w);
  return n->grad;
}

// Backpropagate from the scalar root, seeding d(root)/d(root) = 1.
// Every reachable node that requires grad receives its full gradient; nodes
// with a grad_sink add it there. Interior grads are released as soon as a
// node has been processed, so peak memory is the forward graph plus a
// frontier of gradients, not a second full graph. Leaf grads persist and
// accumulate, as does a second backward() over the same graph.
template <typename T>
void backward(const Value<T>& root) {
  if (root->val.size() != 1)
    throw UsageError("backward: loss must be a scalar");
  // Iterative DFS topological sort (children complete before parents are
  // emitted... the order list ends producers-last).
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node<T>* p = node->parents[idx++].get();
      if (p->requires_grad && seen.insert(p).second)
        stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  // order is producers-first; walk it consumers-first.
  root->grad = Tensor4<T>(root->val.n, root->val.c, root->val.h, root->val.w);
  root->grad.fill(T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->grad.size() == 0) continue;  // unreachable by gradient flow
    if (node->grad_sink) {
      auto& sink = *node->grad_sink;
      for (std::size_t i = 0; i < sink.data.size(); ++i)
        sink.data[i] += node->grad.data[i];
    }
    if (node->backprop) {
      node->backprop(*node);
      // Interior grad is final and has no remaining reader: all consumers
      // (and their backprops) already ran.
      node->grad = Tensor4<T>();
    }
  }
}

// Concatenated kink signs of the whole graph, in deterministic traversal
// order. Two evaluations of the same forward code produce comparable
// signatures.
template <typename T>
std::vector<signed char> kink_signature(const Value<T>& root) {
  std::vector<signed char> sig;
  std::vector<Node<T>*> stack{root.get()};
  std::unordered_set<Node<T>*> seen{root.get()};
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    sig.insert(sig.end(), n->kink_signs.begin(), n->kink_signs.end());
    for (const auto& p : n->parents)
      if (seen.insert(p.get()).second) stack.push_back(p.get());
  }
  return sig;
}

}  // namespace overnet
