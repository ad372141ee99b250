#pragma once

#include "kmine/nn/tensor.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace kmine::nn {

/// Graph node: a value, its accumulated gradient, and how to push that gradient to parents.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  /// Allocates a zero gradient of the value's shape on first use.
  Tensor& grad_buffer();
};

using Var = std::shared_ptr<Node>;

Var constant(Tensor value);
Var leaf(Tensor value, bool requires_grad);

bool grad_enabled();

/// Disables graph recording for its lifetime (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Creates a result node wired to `parents` when recording is enabled and any parent needs a
/// gradient; otherwise a detached constant.
Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> fn);

/// Reverse-mode sweep from `out` seeded with `grad_out` (same shape as out->value).
void backward(const Var& out, const Tensor& grad_out);

}  // namespace kmine::nn
