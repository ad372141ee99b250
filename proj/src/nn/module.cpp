#include "kmine/nn/module.hpp"

#include <cmath>

namespace kmine::nn {

void Module::train(bool on) {
  training_ = on;
  for (auto& [name, child] : children_) child->train(on);
}

Var Module::register_parameter(std::string name, Tensor value) {
  auto v = leaf(std::move(value), true);
  params_.push_back({std::move(name), v});
  return v;
}

void Module::register_buffer(std::string name, Tensor* buffer) {
  buffers_.push_back({std::move(name), buffer});
}

void Module::collect(const std::string& prefix, std::vector<NamedParameter>* params,
                     std::vector<NamedTensorRef>* buffers) const {
  if (params) {
    for (const auto& p : params_) params->push_back({prefix + p.name, p.var});
  }
  if (buffers) {
    for (const auto& b : buffers_) buffers->push_back({prefix + b.name, b.tensor});
  }
  for (const auto& [name, child] : children_) child->collect(prefix + name + ".", params, buffers);
}

std::vector<NamedParameter> Module::named_parameters() const {
  std::vector<NamedParameter> out;
  collect("", &out, nullptr);
  return out;
}

std::vector<Var> Module::parameters() const {
  std::vector<Var> out;
  for (auto& p : named_parameters()) out.push_back(p.var);
  return out;
}

std::vector<NamedTensorRef> Module::state() const {
  std::vector<NamedParameter> params;
  std::vector<NamedTensorRef> buffers;
  collect("", &params, &buffers);
  std::vector<NamedTensorRef> out;
  out.reserve(params.size() + buffers.size());
  for (auto& p : params) out.push_back({p.name, &p.var->value});
  for (auto& b : buffers) out.push_back(b);
  return out;
}

std::size_t Module::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : named_parameters()) n += p.var->value.size();
  return n;
}

void Module::zero_grad() {
  for (auto& p : parameters()) {
    if (!p->grad.empty()) p->grad.fill(0.0f);
  }
}

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, Rng& rng, int stride, int padding,
               bool bias)
    : opt_{stride, padding} {
  Tensor w(out_channels, in_channels, kernel, kernel);
  // He-normal for ReLU networks.
  const double fan_in = static_cast<double>(in_channels) * kernel * kernel;
  const double sd = std::sqrt(2.0 / fan_in);
  for (auto& v : w.storage()) v = static_cast<float>(sd * normal(rng));
  weight_ = register_parameter("weight", std::move(w));
  if (bias) bias_ = register_parameter("bias", Tensor(1, out_channels, 1, 1));
}

Var Conv2d::forward(const Var& x) const { return conv2d(x, weight_, bias_, opt_); }

BatchNorm2d::BatchNorm2d(int channels)
    : running_mean_(1, channels, 1, 1, 0.0f), running_var_(1, channels, 1, 1, 1.0f) {
  gamma_ = register_parameter("weight", Tensor(1, channels, 1, 1, 1.0f));
  beta_ = register_parameter("bias", Tensor(1, channels, 1, 1, 0.0f));
  register_buffer("running_mean", &running_mean_);
  register_buffer("running_var", &running_var_);
}

Var BatchNorm2d::forward(const Var& x) {
  BatchNormStats stats{running_mean_.vec(), running_var_.vec()};
  return batch_norm(x, gamma_, beta_, stats, {.training = is_training()});
}

ConvBnRelu::ConvBnRelu(int in_channels, int out_channels, int kernel, Rng& rng, int stride,
                       int padding) {
  if (padding < 0) padding = kernel / 2;
  conv_ = register_module("conv", std::make_shared<Conv2d>(in_channels, out_channels, kernel, rng,
                                                           stride, padding, false));
  bn_ = register_module("bn", std::make_shared<BatchNorm2d>(out_channels));
}

Var ConvBnRelu::forward(const Var& x) { return relu(bn_->forward(conv_->forward(x))); }

}  // namespace kmine::nn
