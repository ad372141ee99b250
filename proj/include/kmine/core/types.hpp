#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace kmine {

/// Single-channel 2-D array, rows = image height, cols = image width.
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using BinaryMask = Plane<std::uint8_t>;
using ProbPlane = Plane<float>;

/// Three-channel image with intensities in [0,1].
struct RgbImage {
  std::array<Plane<float>, 3> channels;

  RgbImage() = default;
  RgbImage(Eigen::Index rows, Eigen::Index cols) {
    for (auto& c : channels) c = Plane<float>::Zero(rows, cols);
  }

  Eigen::Index rows() const { return channels[0].rows(); }
  Eigen::Index cols() const { return channels[0].cols(); }
  bool empty() const { return rows() == 0 || cols() == 0; }
};

/// Pixel coordinate, origin top-left.
struct PixelCoord {
  int col = 0;
  int row = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// Inclusive pixel box.
struct Box {
  int min_col = 0;
  int min_row = 0;
  int max_col = 0;
  int max_row = 0;

  bool contains(PixelCoord p) const {
    return p.col >= min_col && p.col <= max_col && p.row >= min_row && p.row <= max_row;
  }
  long area() const {
    return static_cast<long>(max_col - min_col + 1) * static_cast<long>(max_row - min_row + 1);
  }
  friend bool operator==(const Box&, const Box&) = default;
};

// Error hierarchy. ValidationError maps to CLI exit code 2, everything else to 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class BackendUnavailable : public Error {
 public:
  using Error::Error;
};

template <typename A, typename B>
void require_same_shape(const Eigen::ArrayBase<A>& a, const Eigen::ArrayBase<B>& b,
                        const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeMismatch(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) +
                        "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                        "x" + std::to_string(b.cols()) + ")");
  }
}

}  // namespace kmine
