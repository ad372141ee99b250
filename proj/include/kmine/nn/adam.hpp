#pragma once

#include "kmine/nn/autograd.hpp"

#include <vector>

namespace kmine::nn {

struct AdamOptions {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Adam with bias correction; state is exposed for checkpointing.
class Adam {
 public:
  Adam(std::vector<Var> params, AdamOptions opt);

  void step();
  void zero_grad();

  double lr() const { return opt_.lr; }
  void set_lr(double lr) { opt_.lr = lr; }
  const AdamOptions& options() const { return opt_; }

  long long step_count() const { return t_; }
  void set_step_count(long long t) { t_ = t; }
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }

 private:
  std::vector<Var> params_;
  AdamOptions opt_;
  long long t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace kmine::nn
