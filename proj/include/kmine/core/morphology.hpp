#pragma once

#include "kmine/core/types.hpp"

#include <vector>

namespace kmine {

/// Connected components of the nonzero pixels (4-connectivity), each returned as its own mask,
/// ordered by first pixel in row-major scan.
std::vector<BinaryMask> connected_components(const BinaryMask& mask);

/// Label image: 0 background, 1..n components (4-connectivity). Returns n.
int label_components(const BinaryMask& mask, Plane<int>& labels);

/// Cross-shaped (4-neighbour) dilation / erosion repeated `radius` times.
BinaryMask dilate(const BinaryMask& mask, int radius);
BinaryMask erode(const BinaryMask& mask, int radius);

}  // namespace kmine
