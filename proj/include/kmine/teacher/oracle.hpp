#pragma once

#include "kmine/teacher/teacher.hpp"

namespace kmine::teacher {

/// Deterministic stand-in for a promptable segmenter that answers from hidden ground truth.
///
/// Component selection: with a box, every ground-truth component touching the box; without
/// one, the component containing (or nearest to) each point. With prompt sensitivity on, a
/// prompt that under-specifies extent returns only part of the object:
///  - box covering < 50% of a component: component ∩ box
///  - box-only prompt: only the component the box covers most, clipped to the box unless the
///    box contains it entirely
///  - points only: component ∩ disc around the points' centroid
///  - mask prompt: (result ∩ mask prompt dilated by one pixel) ∪ (mask prompt ∩ box)
/// Noise is applied per returned piece: dropped with component_drop_prob, then grown or shrunk
/// by a uniform jitter in [-J, J] pixels.
class OracleTeacher final : public Teacher {
 public:
  OracleTeacher(GroundTruthLookup ground_truth, OracleNoise noise, std::uint64_t seed);

  std::string id() const override { return "oracle"; }
  PseudoLabel predict(const TeacherRequest& request) const override;
  std::string state_checksum() const override;
  bool concurrent_safe() const override { return true; }

  /// Radius of the points-only part, as a fraction of the component's equivalent radius.
  static constexpr double kPartRadiusFraction = 0.6;

 private:
  GroundTruthLookup truth_;
  OracleNoise noise_;
  std::uint64_t seed_;
};

}  // namespace kmine::teacher
