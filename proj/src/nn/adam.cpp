#include "kmine/nn/adam.hpp"

#include <cmath>

namespace kmine::nn {

Adam::Adam(std::vector<Var> params, AdamOptions opt) : params_(std::move(params)), opt_(opt) {
  for (const auto& p : params_) {
    m_.push_back(Tensor::zeros_like(p->value));
    v_.push_back(Tensor::zeros_like(p->value));
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  const float b1 = static_cast<float>(opt_.beta1);
  const float b2 = static_cast<float>(opt_.beta2);
  const float step_size = static_cast<float>(opt_.lr / bc1);
  const float inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
  const float eps = static_cast<float>(opt_.eps);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (p->grad.empty()) continue;
    auto g = p->grad.vec().array();
    if (opt_.weight_decay != 0.0) g += static_cast<float>(opt_.weight_decay) * p->value.vec().array();
    auto m = m_[i].vec().array();
    auto v = v_[i].vec().array();
    m = b1 * m + (1.0f - b1) * g;
    v = b2 * v + (1.0f - b2) * g.square();
    p->value.vec().array() -= step_size * m / (v.sqrt() * inv_sqrt_bc2 + eps);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) {
    if (!p->grad.empty()) p->grad.fill(0.0f);
  }
}

}  // namespace kmine::nn
