#pragma once

#include "kmine/core/rng.hpp"
#include "kmine/data/resample.hpp"
#include "kmine/data/sample.hpp"

#include <json.hpp>

namespace kmine::data {

struct AugmentationConfig {
  bool enabled = true;
  double flip_prob = 0.5;
  double rotate_prob = 0.5;
  double transpose_prob = 0.5;
  int resize_shortest_side = 224;
  int crop_size = 224;
  /// Arbitrary-angle rotation instead of quarter turns; masks use nearest sampling.
  bool free_rotation = false;
  double max_rotation_deg = 30.0;

  void validate() const;
};

void to_json(nlohmann::json& j, const AugmentationConfig& c);
void from_json(const nlohmann::json& j, AugmentationConfig& c);

/// A drawn geometric transform: resize, centre crop, then flips / quarter turns / transpose
/// (or a free rotation). Applying it to an image and its mask keeps them registered.
struct ViewTransform {
  Eigen::Index src_rows = 0, src_cols = 0;
  Eigen::Index resized_rows = 0, resized_cols = 0;
  Eigen::Index crop_row = 0, crop_col = 0, crop_size_rows = 0, crop_size_cols = 0;
  bool hflip = false;
  bool vflip = false;
  int quarter_turns = 0;
  bool transpose = false;
  double angle_deg = 0.0;

  static ViewTransform identity(Eigen::Index rows, Eigen::Index cols);

  template <typename T>
  Plane<T> apply(const Plane<T>& src, bool nearest) const {
    if (src.rows() != src_rows || src.cols() != src_cols) {
      throw ShapeMismatch("ViewTransform: input dims differ from the drawn transform");
    }
    Plane<T> p = nearest ? resize_nearest(src, resized_rows, resized_cols)
                         : resize_bilinear(src, resized_rows, resized_cols);
    p = Plane<T>(p.block(crop_row, crop_col, crop_size_rows, crop_size_cols));
    if (hflip) p = Plane<T>(p.rowwise().reverse());
    if (vflip) p = Plane<T>(p.colwise().reverse());
    if (quarter_turns != 0) p = rot90(p, quarter_turns);
    if (transpose) p = Plane<T>(p.transpose());
    if (angle_deg != 0.0) p = rotate_about_center(p, angle_deg, nearest);
    return p;
  }

  RgbImage apply(const RgbImage& image) const;
  BinaryMask apply(const BinaryMask& mask) const { return apply<std::uint8_t>(mask, true); }
  ImageSample apply(const ImageSample& sample) const;

  Eigen::Index out_rows() const;
  Eigen::Index out_cols() const;
};

void to_json(nlohmann::json& j, const ViewTransform& t);

/// Resize + centre crop only (validation / test path).
ViewTransform eval_transform(Eigen::Index rows, Eigen::Index cols, const AugmentationConfig& cfg);

/// Resize + centre crop + stochastic flips/rotation/transpose drawn from `rng`.
ViewTransform draw_transform(Eigen::Index rows, Eigen::Index cols, const AugmentationConfig& cfg,
                             Rng& rng);

/// Draws a transform and applies it to image and mask alike.
ImageSample augment(const ImageSample& sample, const AugmentationConfig& cfg, Rng& rng);

}  // namespace kmine::data
