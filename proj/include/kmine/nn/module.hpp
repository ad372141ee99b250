#pragma once

#include "kmine/core/rng.hpp"
#include "kmine/nn/ops.hpp"

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace kmine::nn {

struct NamedTensorRef {
  std::string name;
  Tensor* tensor;
};

struct NamedParameter {
  std::string name;
  Var var;
};

/// Base for layers with registered parameters, buffers and children.
class Module {
 public:
  Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;
  virtual ~Module() = default;

  void train(bool on = true);
  void eval() { train(false); }
  bool is_training() const { return training_; }

  std::vector<NamedParameter> named_parameters() const;
  std::vector<Var> parameters() const;
  /// Parameters followed by buffers; the full state to checkpoint.
  std::vector<NamedTensorRef> state() const;
  std::size_t parameter_count() const;
  void zero_grad();

 protected:
  Var register_parameter(std::string name, Tensor value);
  void register_buffer(std::string name, Tensor* buffer);
  template <typename M>
  std::shared_ptr<M> register_module(std::string name, std::shared_ptr<M> child) {
    children_.emplace_back(std::move(name), child);
    return child;
  }

 private:
  void collect(const std::string& prefix, std::vector<NamedParameter>* params,
               std::vector<NamedTensorRef>* buffers) const;

  bool training_ = true;
  std::vector<NamedParameter> params_;
  std::vector<NamedTensorRef> buffers_;
  std::vector<std::pair<std::string, std::shared_ptr<Module>>> children_;
};

class Conv2d : public Module {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, Rng& rng, int stride = 1, int padding = 0,
         bool bias = true);
  Var forward(const Var& x) const;

  int in_channels() const { return weight_->value.c(); }
  int out_channels() const { return weight_->value.n(); }

 private:
  Var weight_;
  Var bias_;
  Conv2dOptions opt_;
};

class BatchNorm2d : public Module {
 public:
  explicit BatchNorm2d(int channels);
  Var forward(const Var& x);

 private:
  Var gamma_;
  Var beta_;
  Tensor running_mean_;
  Tensor running_var_;
};

/// conv -> batch norm -> relu, conv without bias.
class ConvBnRelu : public Module {
 public:
  ConvBnRelu(int in_channels, int out_channels, int kernel, Rng& rng, int stride = 1,
             int padding = -1);
  Var forward(const Var& x);

 private:
  std::shared_ptr<Conv2d> conv_;
  std::shared_ptr<BatchNorm2d> bn_;
};

}  // namespace kmine::nn
