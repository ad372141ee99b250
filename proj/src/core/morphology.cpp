#include "kmine/core/morphology.hpp"

#include <array>
#include <utility>

namespace kmine {

int label_components(const BinaryMask& mask, Plane<int>& labels) {
  labels = Plane<int>::Zero(mask.rows(), mask.cols());
  int next = 0;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> stack;
  constexpr std::array<std::pair<int, int>, 4> kNeighbours{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    for (Eigen::Index c = 0; c < mask.cols(); ++c) {
      if (!mask(r, c) || labels(r, c)) continue;
      ++next;
      labels(r, c) = next;
      stack.emplace_back(r, c);
      while (!stack.empty()) {
        const auto [y, x] = stack.back();
        stack.pop_back();
        for (const auto& [dy, dx] : kNeighbours) {
          const auto ny = y + dy, nx = x + dx;
          if (ny < 0 || nx < 0 || ny >= mask.rows() || nx >= mask.cols()) continue;
          if (!mask(ny, nx) || labels(ny, nx)) continue;
          labels(ny, nx) = next;
          stack.emplace_back(ny, nx);
        }
      }
    }
  }
  return next;
}

std::vector<BinaryMask> connected_components(const BinaryMask& mask) {
  Plane<int> labels;
  const int n = label_components(mask, labels);
  std::vector<BinaryMask> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) out.push_back((labels == i).cast<std::uint8_t>());
  return out;
}

namespace {

BinaryMask step(const BinaryMask& m, bool grow) {
  BinaryMask out = m;
  const auto rows = m.rows(), cols = m.cols();
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (grow) {
        if (m(r, c)) continue;
        const bool touch = (r > 0 && m(r - 1, c)) || (r + 1 < rows && m(r + 1, c)) ||
                           (c > 0 && m(r, c - 1)) || (c + 1 < cols && m(r, c + 1));
        if (touch) out(r, c) = 1;
      } else {
        if (!m(r, c)) continue;
        // Pixels outside the image count as background.
        const bool keep = r > 0 && m(r - 1, c) && r + 1 < rows && m(r + 1, c) && c > 0 &&
                          m(r, c - 1) && c + 1 < cols && m(r, c + 1);
        if (!keep) out(r, c) = 0;
      }
    }
  }
  return out;
}

}  // namespace

BinaryMask dilate(const BinaryMask& mask, int radius) {
  BinaryMask out = mask;
  for (int i = 0; i < radius; ++i) out = step(out, true);
  return out;
}

BinaryMask erode(const BinaryMask& mask, int radius) {
  BinaryMask out = mask;
  for (int i = 0; i < radius; ++i) out = step(out, false);
  return out;
}

}  // namespace kmine
