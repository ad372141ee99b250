#pragma once

#include "kmine/core/types.hpp"

#include <algorithm>
#include <cmath>

namespace kmine::data {

/// Nearest-neighbour resize with half-pixel centres; exact for label maps.
template <typename T>
Plane<T> resize_nearest(const Plane<T>& src, Eigen::Index rows, Eigen::Index cols) {
  if (src.rows() == rows && src.cols() == cols) return src;
  Plane<T> dst(rows, cols);
  const double sy = static_cast<double>(src.rows()) / static_cast<double>(rows);
  const double sx = static_cast<double>(src.cols()) / static_cast<double>(cols);
  for (Eigen::Index y = 0; y < rows; ++y) {
    const auto iy = std::min<Eigen::Index>(static_cast<Eigen::Index>((y + 0.5) * sy), src.rows() - 1);
    for (Eigen::Index x = 0; x < cols; ++x) {
      const auto ix = std::min<Eigen::Index>(static_cast<Eigen::Index>((x + 0.5) * sx), src.cols() - 1);
      dst(y, x) = src(iy, ix);
    }
  }
  return dst;
}

/// Bilinear resize with half-pixel centres and edge clamping.
template <typename T>
Plane<T> resize_bilinear(const Plane<T>& src, Eigen::Index rows, Eigen::Index cols) {
  if (src.rows() == rows && src.cols() == cols) return src;
  Plane<T> dst(rows, cols);
  const double sy = static_cast<double>(src.rows()) / static_cast<double>(rows);
  const double sx = static_cast<double>(src.cols()) / static_cast<double>(cols);
  for (Eigen::Index y = 0; y < rows; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.rows() - 1));
    const auto y0 = static_cast<Eigen::Index>(fy);
    const auto y1 = std::min<Eigen::Index>(y0 + 1, src.rows() - 1);
    const double wy = fy - static_cast<double>(y0);
    for (Eigen::Index x = 0; x < cols; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.cols() - 1));
      const auto x0 = static_cast<Eigen::Index>(fx);
      const auto x1 = std::min<Eigen::Index>(x0 + 1, src.cols() - 1);
      const double wx = fx - static_cast<double>(x0);
      const double top = (1 - wx) * src(y0, x0) + wx * src(y0, x1);
      const double bot = (1 - wx) * src(y1, x0) + wx * src(y1, x1);
      dst(y, x) = static_cast<T>((1 - wy) * top + wy * bot);
    }
  }
  return dst;
}

/// Rotation about the image centre by `degrees` (counter-clockwise), same output size,
/// zero outside the source. `nearest` selects label-safe sampling.
template <typename T>
Plane<T> rotate_about_center(const Plane<T>& src, double degrees, bool nearest) {
  const double rad = degrees * 3.14159265358979323846 / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  const double cy = (static_cast<double>(src.rows()) - 1) / 2.0;
  const double cx = (static_cast<double>(src.cols()) - 1) / 2.0;
  Plane<T> dst = Plane<T>::Zero(src.rows(), src.cols());
  for (Eigen::Index y = 0; y < src.rows(); ++y) {
    for (Eigen::Index x = 0; x < src.cols(); ++x) {
      // inverse map: destination -> source
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      const double sxf = c * dx - s * dy + cx;
      const double syf = s * dx + c * dy + cy;
      if (nearest) {
        const auto ix = static_cast<Eigen::Index>(std::lround(sxf));
        const auto iy = static_cast<Eigen::Index>(std::lround(syf));
        if (ix >= 0 && iy >= 0 && ix < src.cols() && iy < src.rows()) dst(y, x) = src(iy, ix);
      } else {
        if (sxf < 0 || syf < 0 || sxf > src.cols() - 1.0 || syf > src.rows() - 1.0) continue;
        const auto x0 = static_cast<Eigen::Index>(sxf), y0 = static_cast<Eigen::Index>(syf);
        const auto x1 = std::min<Eigen::Index>(x0 + 1, src.cols() - 1);
        const auto y1 = std::min<Eigen::Index>(y0 + 1, src.rows() - 1);
        const double wx = sxf - static_cast<double>(x0), wy = syf - static_cast<double>(y0);
        const double top = (1 - wx) * src(y0, x0) + wx * src(y0, x1);
        const double bot = (1 - wx) * src(y1, x0) + wx * src(y1, x1);
        dst(y, x) = static_cast<T>((1 - wy) * top + wy * bot);
      }
    }
  }
  return dst;
}

/// Quarter turns counter-clockwise.
template <typename T>
Plane<T> rot90(const Plane<T>& src, int quarter_turns) {
  switch (((quarter_turns % 4) + 4) % 4) {
    case 1: return src.transpose().colwise().reverse();
    case 2: return src.reverse();
    case 3: return src.transpose().rowwise().reverse();
    default: return src;
  }
}

}  // namespace kmine::data
