#include "kmine/nn/autograd.hpp"

#include "kmine/core/types.hpp"

#include <sstream>
#include <unordered_set>

namespace kmine::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << n() << "x" << c() << "x" << h() << "x" << w();
  return os.str();
}

Tensor& Node::grad_buffer() {
  if (!grad.same_shape(value) || grad.empty()) grad = Tensor::zeros_like(value);
  return grad;
}

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return n;
}

Var leaf(Tensor value, bool requires_grad) {
  auto n = constant(std::move(value));
  n->requires_grad = requires_grad;
  return n;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (!g_grad_enabled) return n;
  bool any = false;
  for (const auto& p : parents) any = any || (p && p->requires_grad);
  if (!any) return n;
  n->requires_grad = true;
  n->parents = std::move(parents);
  n->backward_fn = std::move(fn);
  return n;
}

void backward(const Var& out, const Tensor& grad_out) {
  if (!out->requires_grad) return;
  if (!grad_out.same_shape(out->value)) {
    throw ShapeMismatch("backward: gradient shape " + grad_out.shape_string() +
                        " does not match output " + out->value.shape_string());
  }
  // Iterative post-order DFS to get a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{out.get(), 0}};
  seen.insert(out.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p && p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  out->grad_buffer().vec() += grad_out.vec();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn) {
      node->grad_buffer();
      node->backward_fn(*node);
      // Intermediate gradients are not needed after propagation.
      node->grad = Tensor();
    }
  }
}

}  // namespace kmine::nn
