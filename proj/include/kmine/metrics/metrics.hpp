#pragma once

#include "kmine/core/types.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace kmine::metrics {

namespace detail {

struct OverlapCounts {
  double intersection = 0;
  double size_a = 0;
  double size_b = 0;
};

template <typename A, typename B>
OverlapCounts overlap(const Eigen::ArrayBase<A>& y, const Eigen::ArrayBase<B>& y_hat) {
  require_same_shape(y, y_hat, "overlap");
  const auto a = (y.derived() != typename A::Scalar(0)).template cast<double>();
  const auto b = (y_hat.derived() != typename B::Scalar(0)).template cast<double>();
  return {(a * b).sum(), a.sum(), b.sum()};
}

}  // namespace detail

/// 2|y ∩ ŷ| / (|y| + |ŷ|) over nonzero pixels; both empty scores 1.
template <typename A, typename B>
double dice_score(const Eigen::ArrayBase<A>& y, const Eigen::ArrayBase<B>& y_hat) {
  const auto c = detail::overlap(y, y_hat);
  const double denom = c.size_a + c.size_b;
  if (denom == 0) return 1.0;
  return 2.0 * c.intersection / denom;
}

/// |y ∩ ŷ| / |y ∪ ŷ|; both empty scores 1.
template <typename A, typename B>
double iou_score(const Eigen::ArrayBase<A>& y, const Eigen::ArrayBase<B>& y_hat) {
  const auto c = detail::overlap(y, y_hat);
  const double uni = c.size_a + c.size_b - c.intersection;
  if (uni == 0) return 1.0;
  return c.intersection / uni;
}

/// Binarizes a probability map at `threshold` (p >= threshold -> 1).
template <typename D>
BinaryMask binarize(const Eigen::ArrayBase<D>& probs, double threshold = 0.5) {
  return (probs.derived().template cast<double>() >= threshold).template cast<std::uint8_t>();
}

struct MeanStd {
  double mean = 0;
  double std = 0;
  std::size_t n = 0;
};

/// Population std (divide by n); used for per-sample spread within a run.
MeanStd population_mean_std(const std::vector<double>& values);
/// Sample std (divide by n-1, 0 when n == 1); used for spread across runs.
MeanStd sample_mean_std(const std::vector<double>& values);

struct SampleScore {
  std::string sample_id;
  double dice = 0;
  double iou = 0;
};

struct MetricReport {
  std::vector<SampleScore> rows;
  MeanStd dice;
  MeanStd iou;
};

MetricReport summarize(std::vector<SampleScore> rows);

}  // namespace kmine::metrics
