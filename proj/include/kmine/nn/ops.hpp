#pragma once

#include "kmine/nn/autograd.hpp"

#include <span>

namespace kmine::nn {

struct Conv2dOptions {
  int stride = 1;
  int padding = 0;
};

/// weight: Cout x Cin x kh x kw; bias: 1 x Cout x 1 x 1 or null.
Var conv2d(const Var& x, const Var& weight, const Var& bias, Conv2dOptions opt = {});

/// Views of the running statistics owned by a batch-norm layer.
struct BatchNormStats {
  VecMap mean;
  VecMap var;
};

struct BatchNormOptions {
  bool training = true;
  float momentum = 0.1f;
  float eps = 1e-5f;
};

/// While alive, training-mode batch norm still normalizes with batch statistics but leaves the
/// running statistics untouched.
class RunningStatsFreeze {
 public:
  RunningStatsFreeze();
  ~RunningStatsFreeze();
  RunningStatsFreeze(const RunningStatsFreeze&) = delete;
  RunningStatsFreeze& operator=(const RunningStatsFreeze&) = delete;

 private:
  bool previous_;
};

/// gamma/beta: 1 x C x 1 x 1. Updates `stats` in training mode unless frozen.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormStats stats,
               BatchNormOptions opt);

Var relu(const Var& x);
Var sigmoid(const Var& x);
Var add(const Var& a, const Var& b);
Var max_pool2d(const Var& x, int kernel, int stride, int padding = 0);
Var upsample_nearest2x(const Var& x);
Var concat_channels(std::span<const Var> xs);

}  // namespace kmine::nn
