#include "kmine/prompt/prompt.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

using namespace kmine;
using namespace kmine::prompt;

namespace {

/// Probabilities drawn from a few levels so ties are common.
ProbPlane quantized_probs(Eigen::Index rows, Eigen::Index cols, int levels, Rng& rng) {
  ProbPlane p(rows, cols);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    p.data()[i] = static_cast<float>(uniform_index(rng, static_cast<std::uint64_t>(levels))) /
                  static_cast<float>(levels - 1);
  }
  return p;
}

/// Top-x values after sorting every pixel in descending order.
std::vector<float> sorted_top(const ProbPlane& p, int x) {
  std::vector<float> all(p.data(), p.data() + p.size());
  std::sort(all.begin(), all.end(), std::greater<>());
  all.resize(static_cast<std::size_t>(x));
  return all;
}

}  // namespace

TEST_SUITE("prompt") {
  TEST_CASE("points match the sorted top-x multiset") {
    Rng rng(1);
    for (int trial = 0; trial < 300; ++trial) {
      const auto rows = 1 + static_cast<Eigen::Index>(uniform_index(rng, 12));
      const auto cols = 1 + static_cast<Eigen::Index>(uniform_index(rng, 12));
      const ProbPlane p = trial % 2 ? quantized_probs(rows, cols, 4, rng) : testing::random_probs(rows, cols, rng);
      const int x = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(std::min<Eigen::Index>(p.size(), 6))));
      const auto pts = extract_points({p, "s"}, x, rng);
      REQUIRE(pts.size() == static_cast<std::size_t>(x));
      std::vector<float> got;
      std::set<std::pair<int, int>> distinct;
      for (const auto& c : pts) {
        got.push_back(p(c.row, c.col));
        distinct.insert({c.row, c.col});
      }
      std::sort(got.begin(), got.end(), std::greater<>());
      CHECK(got == sorted_top(p, x));
      CHECK(distinct.size() == pts.size());
      // Every pixel strictly above the cut-off is always chosen.
      const float level = sorted_top(p, x).back();
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
          if (p(r, c) > level) CHECK(distinct.count({static_cast<int>(r), static_cast<int>(c)}) == 1);
        }
      }
    }
  }

  TEST_CASE("ties are drawn uniformly") {
    // One clear winner plus eight tied pixels; two points means one draw among the ties.
    ProbPlane p = ProbPlane::Constant(3, 3, 0.5f);
    p(1, 1) = 0.9f;
    Rng rng(2);
    std::map<std::pair<int, int>, int> counts;
    const int draws = 16000;
    for (int i = 0; i < draws; ++i) {
      const auto pts = extract_points({p, "s"}, 2, rng);
      CHECK(pts[0] == PixelCoord{1, 1});
      ++counts[{pts[1].row, pts[1].col}];
    }
    REQUIRE(counts.size() == 8);
    double chi2 = 0;
    const double expected = draws / 8.0;
    for (const auto& [pix, n] : counts) chi2 += (n - expected) * (n - expected) / expected;
    CHECK(chi2 < 24.3);  // 7 degrees of freedom, p = 0.001
  }

  TEST_CASE("point extraction examples and errors") {
    ProbPlane p = ProbPlane::Zero(4, 4);
    p(2, 3) = 0.8f;
    p(0, 1) = 0.7f;
    p(3, 0) = 0.6f;
    Rng rng(3);
    const auto pts = extract_points({p, "s"}, 3, rng);
    // Strict pixels come back in row-major order.
    CHECK(pts == std::vector<PixelCoord>{{1, 0}, {3, 2}, {0, 3}});
    CHECK_THROWS_AS(extract_points({p, "s"}, 0, rng), ValidationError);
    CHECK_THROWS_AS(extract_points({p, "s"}, 17, rng), ValidationError);
    ProbPlane bad = p;
    bad(0, 0) = 1.5f;
    CHECK_THROWS_AS(extract_points({bad, "s"}, 1, rng), ValidationError);
    bad(0, 0) = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(extract_points({bad, "s"}, 1, rng), ValidationError);
  }

  TEST_CASE("same seed, same points") {
    Rng a(4), b(4), gen(5);
    const ProbPlane p = quantized_probs(10, 10, 3, gen);
    for (int i = 0; i < 20; ++i) CHECK(extract_points({p, "s"}, 5, a) == extract_points({p, "s"}, 5, b));
  }

  TEST_CASE("box matches min and max over thresholded coordinates") {
    Rng rng(6);
    for (int trial = 0; trial < 300; ++trial) {
      const auto rows = 1 + static_cast<Eigen::Index>(uniform_index(rng, 16));
      const auto cols = 1 + static_cast<Eigen::Index>(uniform_index(rng, 16));
      ProbPlane p = testing::random_probs(rows, cols, rng);
      p = p * p * p;  // sparser foreground
      const double thr = trial % 3 == 0 ? 0.5 : uniform01(rng);
      int r0 = INT32_MAX, c0 = INT32_MAX, r1 = -1, c1 = -1;
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
          if (p(r, c) >= static_cast<float>(thr)) {
            r0 = std::min<int>(r0, static_cast<int>(r));
            r1 = std::max<int>(r1, static_cast<int>(r));
            c0 = std::min<int>(c0, static_cast<int>(c));
            c1 = std::max<int>(c1, static_cast<int>(c));
          }
        }
      }
      const auto box = extract_box({p, "s", thr});
      if (r1 < 0) {
        CHECK_FALSE(box);
      } else {
        REQUIRE(box);
        CHECK(*box == Box{c0, r0, c1, r1});
      }
    }
  }

  TEST_CASE("box examples") {
    ProbPlane p = ProbPlane::Zero(6, 8);
    p(1, 2) = 0.5f;  // threshold is inclusive
    p(4, 6) = 0.9f;
    p(5, 0) = 0.49f;
    CHECK(extract_box({p, "s"}) == Box{2, 1, 6, 4});
    CHECK_FALSE(extract_box({ProbPlane::Zero(3, 3), "s"}));
  }

  TEST_CASE("prompt sets follow the mode") {
    ProbPlane p = ProbPlane::Zero(8, 8);
    p.block(2, 3, 3, 2).setConstant(0.8f);
    Rng rng(7);
    for (const auto mode : {PromptMode::points, PromptMode::box, PromptMode::points_box,
                            PromptMode::points_box_mask}) {
      const PromptConfig cfg{mode, 3, std::nullopt};
      const auto set = build_prompt_set({p, "s"}, cfg, rng);
      REQUIRE(set);
      CHECK(set->mode == mode);
      CHECK(set->points.size() == (mode_uses_points(mode) ? 3u : 0u));
      CHECK(set->box.has_value() == mode_uses_box(mode));
      CHECK(set->mask_prompt.has_value() == mode_uses_mask(mode));
      CHECK_NOTHROW(set->validate(8, 8));
      for (const auto& pt : set->points) {
        CHECK(pt.positive);
        CHECK(p(pt.at.row, pt.at.col) == 0.8f);
      }
      const auto audit = audit_json("s", *set);
      CHECK(audit["mode"] == to_string(mode));
      CHECK(audit["box"].is_null() == !mode_uses_box(mode));
    }
    const PromptConfig resized{PromptMode::points_box_mask, 2, 4};
    CHECK(build_prompt_set({p, "s"}, resized, rng)->mask_prompt->rows() == 4);
  }

  TEST_CASE("an empty prediction is rejected when a box is needed") {
    const ProbPlane p = ProbPlane::Constant(5, 5, 0.1f);
    Rng rng(8);
    CHECK_FALSE(build_prompt_set({p, "s"}, {PromptMode::box, 3, std::nullopt}, rng));
    CHECK_FALSE(build_prompt_set({p, "s"}, {PromptMode::points_box, 3, std::nullopt}, rng));
    const auto points_only = build_prompt_set({p, "s"}, {PromptMode::points, 3, std::nullopt}, rng);
    REQUIRE(points_only);
    CHECK(points_only->points.size() == 3);
    const auto audit = rejection_audit_json("s", PromptMode::box);
    CHECK(audit["box"].is_null());
    CHECK(audit["points"].empty());
  }

  TEST_CASE("validation of prompt sets and configs") {
    PromptSet s;
    s.mode = PromptMode::box;
    CHECK_THROWS_AS(s.validate(4, 4), ValidationError);
    s.box = Box{0, 0, 4, 1};
    CHECK_THROWS_AS(s.validate(4, 4), ValidationError);
    s.box = Box{0, 0, 3, 3};
    CHECK_NOTHROW(s.validate(4, 4));
    s.points.push_back({{1, 1}});
    CHECK_THROWS_AS(s.validate(4, 4), ValidationError);
    PromptConfig c;
    c.point_count = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    CHECK_THROWS_AS(prompt_mode_from_string("lasso"), ValidationError);
    const PromptConfig back = nlohmann::json(PromptConfig{PromptMode::points_box_mask, 5, 32}).get<PromptConfig>();
    CHECK(back.mode == PromptMode::points_box_mask);
    CHECK(back.point_count == 5);
    CHECK(back.mask_prompt_size == 32);
  }
}
