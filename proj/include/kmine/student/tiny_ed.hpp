#pragma once

#include "kmine/student/student.hpp"

#include <array>

namespace kmine::student {

/// Three-pooling encoder-decoder with skip connections, ~100k parameters at width 8.
class TinyEncoderDecoder : public Student {
 public:
  TinyEncoderDecoder(StudentConfig cfg, Rng& rng);
  int downsampling_factor() const override { return 8; }

 protected:
  nn::Var logits(const nn::Var& images) override;

 private:
  struct DoubleConv {
    std::shared_ptr<nn::ConvBnRelu> a;
    std::shared_ptr<nn::ConvBnRelu> b;
  };
  DoubleConv make_double(const std::string& name, int in, int out, Rng& rng);
  static nn::Var apply(const DoubleConv& d, const nn::Var& x);

  std::array<DoubleConv, 4> down_;
  std::array<DoubleConv, 3> up_;
  std::shared_ptr<nn::Conv2d> head_;
};

}  // namespace kmine::student
