#include "kmine/nn/adam.hpp"
#include "kmine/nn/module.hpp"
#include "kmine/nn/ops.hpp"

#include <doctest.h>

#include <algorithm>
#include <functional>

using namespace kmine;
using namespace kmine::nn;

namespace {

Tensor random_tensor(int n, int c, int h, int w, Rng& rng) {
  Tensor t(n, c, h, w);
  for (auto& v : t.storage()) v = static_cast<float>(uniform(rng, -1.0, 1.0));
  return t;
}

/// Checks d(sum(out * R))/d(input) from backward against central differences.
void gradcheck(const std::function<Var(const std::vector<Var>&)>& f, std::vector<Tensor> inputs,
               Rng& rng, double tol = 2e-2) {
  std::vector<Var> leaves;
  for (auto& t : inputs) leaves.push_back(leaf(t, true));
  Var out = f(leaves);
  const Tensor r = random_tensor(out->value.n(), out->value.c(), out->value.h(), out->value.w(), rng);
  backward(out, r);
  auto objective = [&](const std::vector<Tensor>& in) {
    std::vector<Var> vs;
    for (const auto& t : in) vs.push_back(constant(t));
    NoGradGuard g;
    const Var o = f(vs);
    double s = 0;
    for (std::size_t i = 0; i < o->value.size(); ++i) s += double(o->value.data()[i]) * r.data()[i];
    return s;
  };
  const float h = 1e-2f;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor& grad = leaves[k]->grad;
    REQUIRE(grad.size() == inputs[k].size());
    for (std::size_t i = 0; i < inputs[k].size(); i += std::max<std::size_t>(1, inputs[k].size() / 40)) {
      auto a = inputs, b = inputs;
      a[k].data()[i] += h;
      b[k].data()[i] -= h;
      const double fd = (objective(a) - objective(b)) / (2.0 * h);
      const double an = grad.data()[i];
      CHECK(std::abs(fd - an) <= tol * std::max(1.0, std::abs(fd)));
    }
  }
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("conv2d gradients, padded 3x3 with bias") {
    Rng rng(1);
    gradcheck([](const std::vector<Var>& v) { return conv2d(v[0], v[1], v[2], {1, 1}); },
              {random_tensor(2, 3, 5, 6, rng), random_tensor(4, 3, 3, 3, rng),
               random_tensor(1, 4, 1, 1, rng)},
              rng);
  }

  TEST_CASE("conv2d gradients, strided 7x7 and pointwise") {
    Rng rng(2);
    gradcheck([](const std::vector<Var>& v) { return conv2d(v[0], v[1], nullptr, {2, 3}); },
              {random_tensor(1, 2, 9, 8, rng), random_tensor(3, 2, 7, 7, rng)}, rng);
    gradcheck([](const std::vector<Var>& v) { return conv2d(v[0], v[1], nullptr, {}); },
              {random_tensor(2, 3, 4, 4, rng), random_tensor(5, 3, 1, 1, rng)}, rng);
  }

  TEST_CASE("conv2d forward matches direct summation") {
    Rng rng(3);
    const Tensor x = random_tensor(1, 2, 4, 5, rng), w = random_tensor(3, 2, 3, 3, rng);
    const Tensor y = conv2d(constant(x), constant(w), nullptr, {1, 1})->value;
    for (int o = 0; o < 3; ++o) {
      for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 5; ++c) {
          double s = 0;
          for (int i = 0; i < 2; ++i) {
            for (int dr = -1; dr <= 1; ++dr) {
              for (int dc = -1; dc <= 1; ++dc) {
                const int rr = r + dr, cc = c + dc;
                if (rr < 0 || cc < 0 || rr >= 4 || cc >= 5) continue;
                s += double(x.at(0, i, rr, cc)) * w.at(o, i, dr + 1, dc + 1);
              }
            }
          }
          CHECK(y.at(0, o, r, c) == doctest::Approx(s).epsilon(1e-5));
        }
      }
    }
  }

  TEST_CASE("batch norm gradients in training mode") {
    Rng rng(4);
    Eigen::VectorXf mean = Eigen::VectorXf::Zero(3), var = Eigen::VectorXf::Ones(3);
    gradcheck(
        [&](const std::vector<Var>& v) {
          Eigen::VectorXf m = mean, s = var;  // keep the shared stats untouched
          return batch_norm(v[0], v[1], v[2], {VecMap(m.data(), 3), VecMap(s.data(), 3)},
                            {true, 0.1f, 1e-5f});
        },
        {random_tensor(3, 3, 3, 3, rng), random_tensor(1, 3, 1, 1, rng),
         random_tensor(1, 3, 1, 1, rng)},
        rng, 3e-2);
  }

  TEST_CASE("batch norm running statistics") {
    Tensor x(2, 1, 1, 2);
    x.storage() = {1, 2, 3, 4};
    Eigen::VectorXf mean = Eigen::VectorXf::Zero(1), var = Eigen::VectorXf::Ones(1);
    const Var g = constant(Tensor(1, 1, 1, 1, 1.0f)), b = constant(Tensor(1, 1, 1, 1, 0.0f));
    batch_norm(constant(x), g, b, {VecMap(mean.data(), 1), VecMap(var.data(), 1)}, {});
    CHECK(mean(0) == doctest::Approx(0.25));              // 0.9*0 + 0.1*2.5
    CHECK(var(0) == doctest::Approx(0.9 + 0.1 * 5.0 / 3));  // unbiased batch variance
    const Tensor y = batch_norm(constant(x), g, b, {VecMap(mean.data(), 1), VecMap(var.data(), 1)},
                                {false, 0.1f, 0.0f})
                         ->value;
    CHECK(y.data()[0] == doctest::Approx((1 - mean(0)) / std::sqrt(var(0))));
  }

  TEST_CASE("frozen running statistics still normalize with the batch") {
    Tensor x(2, 1, 1, 2);
    x.storage() = {1, 2, 3, 4};
    Eigen::VectorXf mean = Eigen::VectorXf::Zero(1), var = Eigen::VectorXf::Ones(1);
    const Var g = constant(Tensor(1, 1, 1, 1, 1.0f)), b = constant(Tensor(1, 1, 1, 1, 0.0f));
    const Tensor free = batch_norm(constant(x), g, b, {VecMap(mean.data(), 1), VecMap(var.data(), 1)}, {})->value;
    mean.setZero();
    var.setOnes();
    Tensor frozen;
    {
      RunningStatsFreeze freeze;
      frozen = batch_norm(constant(x), g, b, {VecMap(mean.data(), 1), VecMap(var.data(), 1)}, {})->value;
    }
    CHECK(mean(0) == 0.0f);
    CHECK(var(0) == 1.0f);
    CHECK(frozen.storage() == free.storage());
    batch_norm(constant(x), g, b, {VecMap(mean.data(), 1), VecMap(var.data(), 1)}, {});
    CHECK(mean(0) == doctest::Approx(0.25));  // released on scope exit
  }

  TEST_CASE("sigmoid and add gradients") {
    Rng rng(5);
    gradcheck([](const std::vector<Var>& v) { return sigmoid(v[0]); }, {random_tensor(1, 2, 3, 3, rng)},
              rng);
    gradcheck([](const std::vector<Var>& v) { return add(v[0], v[1]); },
              {random_tensor(1, 2, 3, 3, rng), random_tensor(1, 2, 3, 3, rng)}, rng);
  }

  TEST_CASE("upsample and concat gradients") {
    Rng rng(6);
    gradcheck([](const std::vector<Var>& v) { return upsample_nearest2x(v[0]); },
              {random_tensor(2, 2, 3, 2, rng)}, rng);
    gradcheck([](const std::vector<Var>& v) { return concat_channels(v); },
              {random_tensor(2, 1, 3, 3, rng), random_tensor(2, 2, 3, 3, rng)}, rng);
  }

  TEST_CASE("max pool gradients") {
    Rng rng(7);
    // Values spaced well beyond the finite-difference step so no window changes its argmax.
    auto spaced = [&](int n, int c, int h, int w) {
      Tensor t(n, c, h, w);
      for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = 0.1f * static_cast<float>(i);
      std::shuffle(t.storage().begin(), t.storage().end(), rng);
      return t;
    };
    gradcheck([](const std::vector<Var>& v) { return max_pool2d(v[0], 2, 2); }, {spaced(1, 2, 4, 6)},
              rng);
    gradcheck([](const std::vector<Var>& v) { return max_pool2d(v[0], 3, 2, 1); }, {spaced(1, 1, 5, 5)},
              rng);
  }

  TEST_CASE("relu and max pool forward values") {
    Tensor x(1, 1, 2, 2);
    x.storage() = {-1, 2, 3, -4};
    CHECK(relu(constant(x))->value.storage() == Storage{0, 2, 3, 0});
    CHECK(max_pool2d(constant(x), 2, 2)->value.storage() == Storage{3});
    const Tensor u = upsample_nearest2x(constant(x))->value;
    CHECK(u.h() == 4);
    CHECK(u.at(0, 0, 3, 1) == 3.0f);
  }

  TEST_CASE("no-grad guard records nothing") {
    const Var w = leaf(Tensor(1, 1, 1, 1, 2.0f), true);
    NoGradGuard guard;
    const Var y = sigmoid(w);
    CHECK(y->parents.empty());
    CHECK_FALSE(y->requires_grad);
  }

  TEST_CASE("adam step matches the reference update") {
    const Var p = leaf(Tensor(1, 1, 1, 2), true);
    p->value.storage() = {1.0f, -1.0f};
    Adam opt({p}, {0.1, 0.9, 0.999, 1e-8, 0.0});
    double m[2] = {0, 0}, v[2] = {0, 0}, x[2] = {1.0, -1.0};
    for (int t = 1; t <= 3; ++t) {
      const double g[2] = {2.0 * x[0], 0.5};
      p->grad_buffer().storage() = {static_cast<float>(g[0]), static_cast<float>(g[1])};
      opt.step();
      for (int i = 0; i < 2; ++i) {
        m[i] = 0.9 * m[i] + 0.1 * g[i];
        v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
        const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.999, t));
        x[i] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
      }
      CHECK(p->value.data()[0] == doctest::Approx(x[0]).epsilon(1e-5));
      CHECK(p->value.data()[1] == doctest::Approx(x[1]).epsilon(1e-5));
    }
    CHECK(opt.step_count() == 3);
  }

  TEST_CASE("module registry and conv-bn-relu layer") {
    Rng rng(9);
    ConvBnRelu layer(3, 4, 3, rng);
    const auto names = layer.named_parameters();
    REQUIRE(names.size() == 3);
    CHECK(names[0].name == "conv.weight");
    CHECK(layer.state().size() == 5);  // + running_mean, running_var
    CHECK(layer.parameter_count() == 4 * 3 * 9 + 4 + 4);
    const Var y = layer.forward(constant(random_tensor(2, 3, 6, 6, rng)));
    CHECK(y->value.shape() == std::array<int, 4>{2, 4, 6, 6});
    CHECK(y->value.vec().minCoeff() >= 0.0f);
  }
}
