#include "kmine/student/student.hpp"

#include "kmine/core/types.hpp"
#include "kmine/student/checkpoint.hpp"
#include "kmine/student/tiny_ed.hpp"
#include "kmine/student/unetpp.hpp"

namespace kmine::student {

std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::unetpp_r34: return "unetpp_r34";
    case Architecture::tiny_ed: return "tiny_ed";
  }
  return "unknown";
}

Architecture architecture_from_string(const std::string& s) {
  if (s == "unetpp_r34") return Architecture::unetpp_r34;
  if (s == "tiny_ed") return Architecture::tiny_ed;
  throw ValidationError("student.architecture: unknown architecture '" + s + "'");
}

void StudentConfig::validate() const {
  if (in_channels != 3) throw ValidationError("student.in_channels must be 3");
  if (out_channels != 1) throw ValidationError("student.out_channels must be 1 (binary segmentation)");
  if (tiny_width < 1) throw ValidationError("student.tiny_width must be >= 1");
  if (pretrained_encoder && encoder_weights.empty()) {
    throw ValidationError("student.pretrained_encoder requires student.encoder_weights");
  }
}

nn::Var Student::forward(const nn::Var& images) {
  const auto& t = images->value;
  const int f = downsampling_factor();
  if (t.c() != cfg_.in_channels) {
    throw ShapeMismatch("student forward: expected " + std::to_string(cfg_.in_channels) +
                        " input channels, got " + std::to_string(t.c()));
  }
  if (t.h() <= 0 || t.w() <= 0 || t.h() % f != 0 || t.w() % f != 0) {
    throw ValidationError("student forward: spatial dims " + std::to_string(t.h()) + "x" +
                          std::to_string(t.w()) + " not divisible by " + std::to_string(f));
  }
  return nn::sigmoid(logits(images));
}

nn::Tensor Student::predict(const nn::Tensor& images) {
  const bool was_training = is_training();
  eval();
  nn::NoGradGuard guard;
  auto out = forward(nn::constant(images));
  train(was_training);
  return std::move(out->value);
}

void Student::load_encoder_weights(const std::string& path) {
  const auto tensors = read_checkpoint_tensors(path);
  std::size_t copied = 0;
  for (const auto& ref : state()) {
    if (ref.name.rfind("encoder.", 0) != 0) continue;
    auto it = tensors.find(ref.name);
    if (it == tensors.end()) continue;
    if (!it->second.same_shape(*ref.tensor)) {
      throw ValidationError("encoder weights: shape mismatch for " + ref.name);
    }
    *ref.tensor = it->second;
    ++copied;
  }
  if (copied == 0) throw ValidationError("encoder weights: no encoder.* tensors in " + path);
}

std::unique_ptr<Student> make_student(const StudentConfig& cfg, std::uint64_t init_seed) {
  cfg.validate();
  Rng rng(init_seed);
  std::unique_ptr<Student> s;
  switch (cfg.architecture) {
    case Architecture::tiny_ed: s = std::make_unique<TinyEncoderDecoder>(cfg, rng); break;
    case Architecture::unetpp_r34: s = std::make_unique<UNetPlusPlusR34>(cfg, rng); break;
  }
  if (cfg.pretrained_encoder) s->load_encoder_weights(cfg.encoder_weights);
  return s;
}

}  // namespace kmine::student
