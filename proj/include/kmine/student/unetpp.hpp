#pragma once

#include "kmine/student/student.hpp"

#include <array>
#include <map>
#include <vector>

namespace kmine::student {

/// ResNet-34 basic residual block.
class BasicBlock : public nn::Module {
 public:
  BasicBlock(int in_channels, int out_channels, int stride, Rng& rng);
  nn::Var forward(const nn::Var& x);

 private:
  std::shared_ptr<nn::Conv2d> conv1_, conv2_;
  std::shared_ptr<nn::BatchNorm2d> bn1_, bn2_;
  std::shared_ptr<nn::Conv2d> down_conv_;
  std::shared_ptr<nn::BatchNorm2d> down_bn_;
};

/// ResNet-34 feature extractor returning the input plus five feature maps at strides 2..32.
class ResNet34Encoder : public nn::Module {
 public:
  explicit ResNet34Encoder(Rng& rng);
  std::vector<nn::Var> forward(const nn::Var& x);

  static constexpr std::array<int, 6> kChannels{3, 64, 64, 128, 256, 512};

 private:
  std::shared_ptr<nn::Conv2d> conv1_;
  std::shared_ptr<nn::BatchNorm2d> bn1_;
  std::vector<std::vector<std::shared_ptr<BasicBlock>>> layers_;
};

/// Upsample x2, concatenate skip features, two conv-bn-relu stages.
class NestedDecoderBlock : public nn::Module {
 public:
  NestedDecoderBlock(int in_channels, int skip_channels, int out_channels, Rng& rng);
  nn::Var forward(const nn::Var& x, const nn::Var& skip);

 private:
  std::shared_ptr<nn::ConvBnRelu> conv1_, conv2_;
};

/// U-Net++ with a ResNet-34 encoder and nested dense skip pathways.
class UNetPlusPlusR34 : public Student {
 public:
  UNetPlusPlusR34(StudentConfig cfg, Rng& rng);
  int downsampling_factor() const override { return 32; }

  static constexpr std::array<int, 5> kDecoderChannels{256, 128, 64, 32, 16};

 protected:
  nn::Var logits(const nn::Var& images) override;

 private:
  static std::string key(int depth, int layer);

  std::shared_ptr<ResNet34Encoder> encoder_;
  std::map<std::string, std::shared_ptr<NestedDecoderBlock>> blocks_;
  std::vector<int> in_channels_, skip_channels_;
  int depth_ = 0;
  std::shared_ptr<nn::Conv2d> head_;
};

}  // namespace kmine::student
