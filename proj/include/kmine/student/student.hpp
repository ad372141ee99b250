#pragma once

#include "kmine/nn/module.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace kmine::student {

enum class Architecture { unetpp_r34, tiny_ed };

std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& s);

struct StudentConfig {
  Architecture architecture = Architecture::tiny_ed;
  int in_channels = 3;
  int out_channels = 1;
  bool pretrained_encoder = false;
  /// Checkpoint whose "encoder.*" tensors initialize the encoder (external pre-training hook).
  std::string encoder_weights;
  /// Base channel width of tiny_ed.
  int tiny_width = 8;

  void validate() const;
};

/// Binary segmentation network producing per-pixel foreground probabilities.
class Student : public nn::Module {
 public:
  explicit Student(StudentConfig cfg) : cfg_(std::move(cfg)) {}

  /// images: N x 3 x H x W, returns N x 1 x H x W in [0,1].
  nn::Var forward(const nn::Var& images);

  /// Eval-mode forward without graph recording; restores the previous mode.
  nn::Tensor predict(const nn::Tensor& images);

  virtual int downsampling_factor() const = 0;
  const StudentConfig& config() const { return cfg_; }

  /// Copies tensors named "encoder.*" from a checkpoint file.
  void load_encoder_weights(const std::string& path);

 protected:
  virtual nn::Var logits(const nn::Var& images) = 0;

 private:
  StudentConfig cfg_;
};

/// Builds and initializes a student from `init_seed`.
std::unique_ptr<Student> make_student(const StudentConfig& cfg, std::uint64_t init_seed);

}  // namespace kmine::student
