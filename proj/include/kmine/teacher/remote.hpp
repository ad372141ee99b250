#pragma once

#include "kmine/teacher/teacher.hpp"

namespace kmine::teacher {

/// Client for a promptable segmenter served over HTTP.
///
/// POST <endpoint> with {sample_id, model, image_b64 (PNG), points [[c,r],...], box|null,
/// multimask, mask_prompt|null}. The reply is either {mask_rle, confidence} or
/// {candidates: [{mask_rle, confidence}, ...]}; the most confident candidate wins. Masks are
/// resampled back to the request resolution with nearest-neighbour sampling.
///
/// The medsam flavour sends only the box when one is present, which is the prompt form that
/// model was tuned on.
class RemoteTeacher final : public Teacher {
 public:
  explicit RemoteTeacher(TeacherConfig config);

  std::string id() const override { return to_string(config_.backend); }
  PseudoLabel predict(const TeacherRequest& request) const override;
  std::string state_checksum() const override;
  bool concurrent_safe() const override { return true; }

  /// Request body for `request` (exposed for tests).
  nlohmann::json request_body(const TeacherRequest& request) const;
  /// Parses a reply into a mask at rows x cols.
  static PseudoLabel parse_reply(const nlohmann::json& reply, Eigen::Index rows,
                                 Eigen::Index cols);

 private:
  TeacherConfig config_;
  std::string host_;
  std::string path_;
};

}  // namespace kmine::teacher
