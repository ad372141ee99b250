#include "kmine/student/unetpp.hpp"

namespace kmine::student {

BasicBlock::BasicBlock(int in_channels, int out_channels, int stride, Rng& rng) {
  conv1_ = register_module("conv1", std::make_shared<nn::Conv2d>(in_channels, out_channels, 3, rng,
                                                                 stride, 1, false));
  bn1_ = register_module("bn1", std::make_shared<nn::BatchNorm2d>(out_channels));
  conv2_ = register_module("conv2", std::make_shared<nn::Conv2d>(out_channels, out_channels, 3,
                                                                 rng, 1, 1, false));
  bn2_ = register_module("bn2", std::make_shared<nn::BatchNorm2d>(out_channels));
  if (stride != 1 || in_channels != out_channels) {
    down_conv_ = register_module("downsample.0", std::make_shared<nn::Conv2d>(
                                                     in_channels, out_channels, 1, rng, stride, 0,
                                                     false));
    down_bn_ = register_module("downsample.1", std::make_shared<nn::BatchNorm2d>(out_channels));
  }
}

nn::Var BasicBlock::forward(const nn::Var& x) {
  auto y = nn::relu(bn1_->forward(conv1_->forward(x)));
  y = bn2_->forward(conv2_->forward(y));
  auto identity = down_conv_ ? down_bn_->forward(down_conv_->forward(x)) : x;
  return nn::relu(nn::add(y, identity));
}

ResNet34Encoder::ResNet34Encoder(Rng& rng) {
  conv1_ = register_module("conv1", std::make_shared<nn::Conv2d>(3, 64, 7, rng, 2, 3, false));
  bn1_ = register_module("bn1", std::make_shared<nn::BatchNorm2d>(64));
  const std::array<int, 4> blocks{3, 4, 6, 3};
  const std::array<int, 4> widths{64, 128, 256, 512};
  int in = 64;
  for (int l = 0; l < 4; ++l) {
    std::vector<std::shared_ptr<BasicBlock>> layer;
    for (int b = 0; b < blocks[l]; ++b) {
      const int stride = (b == 0 && l > 0) ? 2 : 1;
      layer.push_back(register_module(
          "layer" + std::to_string(l + 1) + "." + std::to_string(b),
          std::make_shared<BasicBlock>(in, widths[l], stride, rng)));
      in = widths[l];
    }
    layers_.push_back(std::move(layer));
  }
}

std::vector<nn::Var> ResNet34Encoder::forward(const nn::Var& x) {
  std::vector<nn::Var> features{x};
  auto y = nn::relu(bn1_->forward(conv1_->forward(x)));
  features.push_back(y);
  y = nn::max_pool2d(y, 3, 2, 1);
  for (auto& layer : layers_) {
    for (auto& block : layer) y = block->forward(y);
    features.push_back(y);
  }
  return features;
}

NestedDecoderBlock::NestedDecoderBlock(int in_channels, int skip_channels, int out_channels,
                                       Rng& rng) {
  conv1_ = register_module("conv1", std::make_shared<nn::ConvBnRelu>(in_channels + skip_channels,
                                                                     out_channels, 3, rng));
  conv2_ = register_module("conv2", std::make_shared<nn::ConvBnRelu>(out_channels, out_channels, 3,
                                                                     rng));
}

nn::Var NestedDecoderBlock::forward(const nn::Var& x, const nn::Var& skip) {
  auto y = nn::upsample_nearest2x(x);
  if (skip) {
    const std::array<nn::Var, 2> parts{y, skip};
    y = nn::concat_channels(parts);
  }
  return conv2_->forward(conv1_->forward(y));
}

std::string UNetPlusPlusR34::key(int depth, int layer) {
  return "x_" + std::to_string(depth) + "_" + std::to_string(layer);
}

UNetPlusPlusR34::UNetPlusPlusR34(StudentConfig cfg, Rng& rng) : Student(std::move(cfg)) {
  encoder_ = register_module("encoder", std::make_shared<ResNet34Encoder>(rng));
  // Encoder channels without the stride-1 input, deepest first: 512, 256, 128, 64, 64.
  std::vector<int> enc(ResNet34Encoder::kChannels.rbegin(), ResNet34Encoder::kChannels.rend() - 1);
  const std::vector<int> out(kDecoderChannels.begin(), kDecoderChannels.end());
  in_channels_ = {enc[0]};
  in_channels_.insert(in_channels_.end(), out.begin(), out.end() - 1);
  skip_channels_.assign(enc.begin() + 1, enc.end());
  skip_channels_.push_back(0);
  depth_ = static_cast<int>(in_channels_.size()) - 1;

  for (int layer = 0; layer < depth_; ++layer) {
    for (int d = 0; d <= layer; ++d) {
      int in_ch, skip_ch, out_ch;
      if (d == 0) {
        in_ch = in_channels_[layer];
        skip_ch = skip_channels_[layer] * (layer + 1);
        out_ch = out[layer];
      } else {
        out_ch = skip_channels_[layer];
        skip_ch = skip_channels_[layer] * (layer + 1 - d);
        in_ch = skip_channels_[layer - 1];
      }
      blocks_[key(d, layer)] = register_module(
          "decoder.blocks." + key(d, layer),
          std::make_shared<NestedDecoderBlock>(in_ch, skip_ch, out_ch, rng));
    }
  }
  blocks_[key(0, depth_)] = register_module(
      "decoder.blocks." + key(0, depth_),
      std::make_shared<NestedDecoderBlock>(in_channels_.back(), 0, out.back(), rng));
  head_ = register_module("segmentation_head.0",
                          std::make_shared<nn::Conv2d>(out.back(), config().out_channels, 3, rng,
                                                       1, 1, true));
}

nn::Var UNetPlusPlusR34::logits(const nn::Var& images) {
  auto all = encoder_->forward(images);
  // Drop the input and order deepest first.
  std::vector<nn::Var> f(all.rbegin(), all.rend() - 1);
  std::map<std::string, nn::Var> dense;
  for (int layer = 0; layer < depth_; ++layer) {
    for (int d = 0; d < depth_ - layer; ++d) {
      if (layer == 0) {
        dense[key(d, d)] = blocks_.at(key(d, d))->forward(f[d], f[d + 1]);
      } else {
        const int dl = d + layer;
        std::vector<nn::Var> cat;
        for (int idx = d + 1; idx <= dl; ++idx) cat.push_back(dense.at(key(idx, dl)));
        cat.push_back(f[dl + 1]);
        dense[key(d, dl)] =
            blocks_.at(key(d, dl))->forward(dense.at(key(d, dl - 1)), nn::concat_channels(cat));
      }
    }
  }
  auto top = blocks_.at(key(0, depth_))->forward(dense.at(key(0, depth_ - 1)), nullptr);
  return head_->forward(top);
}

}  // namespace kmine::student
