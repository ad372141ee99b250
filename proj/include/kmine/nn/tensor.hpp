#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace kmine::nn {

using MatrixRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<MatrixRM>;
using ConstMatMap = Eigen::Map<const MatrixRM>;
using VecMap = Eigen::Map<Eigen::VectorXf>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXf>;

/// Maximally aligned so Eigen kernels take the same code path on every run.
using Storage = std::vector<float, Eigen::aligned_allocator<float>>;

/// Dense float tensor in NCHW layout.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int n, int c, int h, int w, float fill = 0.0f)
      : shape_{n, c, h, w}, data_(static_cast<std::size_t>(n) * c * h * w, fill) {}

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.n(), t.c(), t.h(), t.w()); }

  int n() const { return shape_[0]; }
  int c() const { return shape_[1]; }
  int h() const { return shape_[2]; }
  int w() const { return shape_[3]; }
  const std::array<int, 4>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t plane_size() const { return static_cast<std::size_t>(h()) * w(); }
  std::size_t image_size() const { return static_cast<std::size_t>(c()) * plane_size(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  float* image(int i) { return data_.data() + static_cast<std::size_t>(i) * image_size(); }
  const float* image(int i) const { return data_.data() + static_cast<std::size_t>(i) * image_size(); }
  float* plane(int i, int ch) { return image(i) + static_cast<std::size_t>(ch) * plane_size(); }
  const float* plane(int i, int ch) const {
    return image(i) + static_cast<std::size_t>(ch) * plane_size();
  }

  float& at(int i, int ch, int y, int x) { return plane(i, ch)[static_cast<std::size_t>(y) * w() + x]; }
  float at(int i, int ch, int y, int x) const {
    return plane(i, ch)[static_cast<std::size_t>(y) * w() + x];
  }

  VecMap vec() { return {data_.data(), static_cast<Eigen::Index>(data_.size())}; }
  ConstVecMap vec() const { return {data_.data(), static_cast<Eigen::Index>(data_.size())}; }

  /// Channel-major view of image i: rows = channels, cols = h*w.
  MatMap image_matrix(int i) { return {image(i), c(), static_cast<Eigen::Index>(plane_size())}; }
  ConstMatMap image_matrix(int i) const {
    return {image(i), c(), static_cast<Eigen::Index>(plane_size())};
  }

  void fill(float v) { std::fill(data_.begin(), data_.end(), v); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  std::string shape_string() const;

  Storage& storage() { return data_; }
  const Storage& storage() const { return data_; }

 private:
  std::array<int, 4> shape_{0, 0, 0, 0};
  Storage data_;
};

}  // namespace kmine::nn
