#include "kmine/metrics/losses.hpp"
#include "kmine/metrics/metrics.hpp"
#include "kmine/student/checkpoint.hpp"
#include "kmine/student/unetpp.hpp"
#include "support.hpp"

#include <doctest.h>

#include <fstream>

using namespace kmine;
using namespace kmine::student;
using kmine::testing::TempDir;

namespace {

nn::Tensor random_images(int n, int size, Rng& rng) {
  nn::Tensor t(n, 3, size, size);
  for (auto& v : t.storage()) v = static_cast<float>(uniform01(rng));
  return t;
}

StudentConfig tiny(int width = 4) {
  StudentConfig c;
  c.architecture = Architecture::tiny_ed;
  c.tiny_width = width;
  return c;
}

/// One Adam step on L_Dice + k L_BCE against `target`; returns the loss before the step.
double train_step(Student& s, nn::Adam& opt, const nn::Tensor& x, const BinaryMask& target) {
  opt.zero_grad();
  const nn::Var out = s.forward(nn::constant(x));
  const Eigen::Map<const ProbPlane> p(out->value.data(), target.rows(), target.cols());
  const metrics::LossConfig cfg;
  const double loss = metrics::sample_loss(p, target, cfg);
  const Plane<double> g = metrics::sample_loss_gradient(p, target, cfg);
  nn::Tensor seed(1, 1, static_cast<int>(target.rows()), static_cast<int>(target.cols()));
  for (Eigen::Index i = 0; i < g.size(); ++i) seed.data()[i] = static_cast<float>(g.data()[i]);
  nn::backward(out, seed);
  opt.step();
  return loss;
}

BinaryMask square_mask(int size) {
  BinaryMask m = BinaryMask::Zero(size, size);
  m.block(size / 4, size / 4, size / 2, size / 3).setOnes();
  return m;
}

}  // namespace

TEST_SUITE("student") {
  TEST_CASE("tiny_ed output shape and range") {
    Rng rng(1);
    auto s = make_student(tiny(8), 3);
    const nn::Tensor y = s->predict(random_images(2, 32, rng));
    CHECK(y.shape() == std::array<int, 4>{2, 1, 32, 32});
    CHECK(y.vec().minCoeff() >= 0.0f);
    CHECK(y.vec().maxCoeff() <= 1.0f);
    CHECK(s->parameter_count() > 50000);
    CHECK(s->parameter_count() < 200000);
  }

  TEST_CASE("initialization is a function of the seed") {
    Rng rng(2);
    const nn::Tensor x = random_images(1, 16, rng);
    auto a = make_student(tiny(), 7), b = make_student(tiny(), 7), c = make_student(tiny(), 8);
    CHECK(a->predict(x).storage() == b->predict(x).storage());
    CHECK(a->predict(x).storage() != c->predict(x).storage());
  }

  TEST_CASE("predict restores training mode and leaves statistics untouched") {
    Rng rng(3);
    auto s = make_student(tiny(), 1);
    s->train();
    const nn::Tensor x = random_images(2, 16, rng);
    const nn::Tensor first = s->predict(x);
    CHECK(s->is_training());
    CHECK(s->predict(x).storage() == first.storage());
  }

  TEST_CASE("indivisible spatial dims and wrong channels are rejected") {
    auto s = make_student(tiny(), 1);
    CHECK_THROWS_AS(s->predict(nn::Tensor(1, 3, 20, 16)), ValidationError);
    CHECK_THROWS_AS(s->predict(nn::Tensor(1, 1, 16, 16)), ShapeMismatch);
  }

  TEST_CASE("config validation") {
    StudentConfig c = tiny();
    c.out_channels = 2;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = tiny();
    c.pretrained_encoder = true;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    CHECK_THROWS_AS(architecture_from_string("vit"), ValidationError);
    CHECK(architecture_from_string("unetpp_r34") == Architecture::unetpp_r34);
  }

  TEST_CASE("unetpp_r34 matches the reference parameter count") {
    StudentConfig c;
    c.architecture = Architecture::unetpp_r34;
    auto s = make_student(c, 1);
    // Same layout as a ResNet-34 U-Net++ with decoder channels (256,128,64,32,16).
    CHECK(s->parameter_count() == 26078609);
    CHECK(s->downsampling_factor() == 32);
    Rng rng(4);
    const nn::Tensor y = s->predict(random_images(1, 32, rng));
    CHECK(y.shape() == std::array<int, 4>{1, 1, 32, 32});
  }

  TEST_CASE("tiny_ed overfits a single sample") {
    Rng rng(5);
    auto s = make_student(tiny(8), 11);
    s->train();
    nn::Adam opt(s->parameters(), {1e-2, 0.9, 0.999, 1e-8, 0.0});
    const nn::Tensor x = random_images(1, 16, rng);
    const BinaryMask target = square_mask(16);
    const double first = train_step(*s, opt, x, target);
    for (int i = 0; i < 150; ++i) train_step(*s, opt, x, target);
    const nn::Tensor y = s->predict(x);
    const Eigen::Map<const ProbPlane> p(y.data(), 16, 16);
    CHECK(metrics::dice_score(target, metrics::binarize(p)) > 0.95);
    CHECK(metrics::sample_loss(p, target, metrics::LossConfig{}) < 0.5 * first);
  }

  TEST_CASE("checkpoint round trip reproduces predictions and metadata") {
    TempDir dir;
    Rng rng(6);
    auto s = make_student(tiny(), 2);
    s->train();
    nn::Adam opt(s->parameters(), {1e-3, 0.9, 0.999, 1e-8, 0.0});
    const nn::Tensor x = random_images(1, 16, rng);
    train_step(*s, opt, x, square_mask(16));  // moves batch-norm statistics off their defaults
    CheckpointMeta meta;
    meta.epoch = 4;
    meta.manifest_hash = "abc";
    meta.rng_states["order"] = "123";
    meta.extra = {{"note", 1}};
    const auto path = (dir.path() / "m.ckpt").string();
    save_checkpoint(path, *s, meta, &opt);
    LoadedCheckpoint loaded = load_checkpoint(path, Architecture::tiny_ed);
    CHECK(loaded.meta.epoch == 4);
    CHECK(loaded.meta.manifest_hash == "abc");
    CHECK(loaded.meta.rng_states.at("order") == "123");
    CHECK(loaded.meta.extra["note"] == 1);
    REQUIRE(loaded.optimizer);
    CHECK(loaded.optimizer->step == 1);
    CHECK(loaded.student->config().tiny_width == 4);
    CHECK(loaded.student->predict(x).storage() == s->predict(x).storage());
    CHECK(read_checkpoint_header(path)["architecture"] == "tiny_ed");
    CHECK(read_checkpoint_tensors(path).size() == s->state().size());
  }

  TEST_CASE("resumed training matches uninterrupted training bit for bit") {
    TempDir dir;
    Rng rng(7);
    const nn::Tensor x = random_images(1, 16, rng);
    const BinaryMask target = square_mask(16);
    const nn::AdamOptions ao{1e-3, 0.9, 0.999, 1e-8, 0.0};

    auto a = make_student(tiny(), 3);
    a->train();
    nn::Adam opt_a(a->parameters(), ao);
    for (int i = 0; i < 3; ++i) train_step(*a, opt_a, x, target);
    const auto path = (dir.path() / "r.ckpt").string();
    save_checkpoint(path, *a, {}, &opt_a);
    for (int i = 0; i < 3; ++i) train_step(*a, opt_a, x, target);

    LoadedCheckpoint b = load_checkpoint(path);
    b.student->train();
    nn::Adam opt_b(b.student->parameters(), ao);
    b.optimizer->apply_to(opt_b);
    for (int i = 0; i < 3; ++i) train_step(*b.student, opt_b, x, target);
    CHECK(b.student->predict(x).storage() == a->predict(x).storage());
  }

  TEST_CASE("mismatched architecture, version and garbage files are rejected") {
    TempDir dir;
    auto s = make_student(tiny(), 1);
    const auto path = (dir.path() / "m.ckpt").string();
    save_checkpoint(path, *s, {});
    CHECK_THROWS_AS(load_checkpoint(path, Architecture::unetpp_r34), ArchitectureMismatch);

    // Bump the version field that follows the 8-byte magic.
    std::string bytes;
    {
      std::ifstream is(path, std::ios::binary);
      bytes.assign(std::istreambuf_iterator<char>(is), {});
    }
    const auto header = read_checkpoint_header(path);
    CHECK(header["version"] == kCheckpointVersion);
    const auto bumped = (dir.path() / "v.ckpt").string();
    {
      std::string copy = bytes;
      copy[8] = static_cast<char>(kCheckpointVersion + 1);
      std::ofstream(bumped, std::ios::binary) << copy;
    }
    CHECK_THROWS_AS(load_checkpoint(bumped), VersionMismatch);

    const auto junk = (dir.path() / "j.ckpt").string();
    std::ofstream(junk) << "not a checkpoint";
    CHECK_THROWS_AS(load_checkpoint(junk), ValidationError);
    CHECK_THROWS_AS(load_checkpoint((dir.path() / "missing").string()), IoError);
  }

  TEST_CASE("encoder weights load only encoder tensors") {
    TempDir dir;
    auto src = make_student(tiny(), 1);
    const auto path = (dir.path() / "enc.ckpt").string();
    save_checkpoint(path, *src, {});
    auto dst = make_student(tiny(), 2);
    dst->load_encoder_weights(path);
    const auto a = src->named_parameters(), b = dst->named_parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      // Batch-norm affine parameters start at 1/0 regardless of seed; compare conv weights only.
      if (a[i].name.find("weight") == std::string::npos || a[i].name.find(".bn.") != std::string::npos) {
        continue;
      }
      const bool same = a[i].var->value.storage() == b[i].var->value.storage();
      CHECK(same == (a[i].name.rfind("encoder.", 0) == 0));
    }
  }
}
