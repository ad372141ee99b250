#include "kmine/student/tiny_ed.hpp"

namespace kmine::student {

TinyEncoderDecoder::DoubleConv TinyEncoderDecoder::make_double(const std::string& name, int in,
                                                               int out, Rng& rng) {
  return {register_module(name + ".0", std::make_shared<nn::ConvBnRelu>(in, out, 3, rng)),
          register_module(name + ".1", std::make_shared<nn::ConvBnRelu>(out, out, 3, rng))};
}

nn::Var TinyEncoderDecoder::apply(const DoubleConv& d, const nn::Var& x) {
  return d.b->forward(d.a->forward(x));
}

TinyEncoderDecoder::TinyEncoderDecoder(StudentConfig cfg, Rng& rng) : Student(std::move(cfg)) {
  const int w = config().tiny_width;
  const std::array<int, 4> widths{w, 2 * w, 4 * w, 8 * w};
  int in = config().in_channels;
  for (int i = 0; i < 4; ++i) {
    down_[i] = make_double("encoder.down" + std::to_string(i), in, widths[i], rng);
    in = widths[i];
  }
  for (int i = 2; i >= 0; --i) {
    up_[i] = make_double("decoder.up" + std::to_string(i), in + widths[i], widths[i], rng);
    in = widths[i];
  }
  head_ = register_module("head", std::make_shared<nn::Conv2d>(w, config().out_channels, 1, rng));
}

nn::Var TinyEncoderDecoder::logits(const nn::Var& images) {
  std::array<nn::Var, 3> skips;
  nn::Var x = images;
  for (int i = 0; i < 3; ++i) {
    skips[i] = apply(down_[i], x);
    x = nn::max_pool2d(skips[i], 2, 2);
  }
  x = apply(down_[3], x);
  for (int i = 2; i >= 0; --i) {
    const std::array<nn::Var, 2> parts{nn::upsample_nearest2x(x), skips[i]};
    x = apply(up_[i], nn::concat_channels(parts));
  }
  return head_->forward(x);
}

}  // namespace kmine::student
