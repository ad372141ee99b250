#include "kmine/teacher/oracle.hpp"

#include "kmine/core/morphology.hpp"
#include "kmine/core/rng.hpp"
#include "kmine/data/resample.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace kmine::teacher {

namespace {

BinaryMask box_mask(const Box& b, Eigen::Index rows, Eigen::Index cols) {
  BinaryMask m = BinaryMask::Zero(rows, cols);
  m.block(b.min_row, b.min_col, b.max_row - b.min_row + 1, b.max_col - b.min_col + 1).setOnes();
  return m;
}

/// Index (1-based label) of the component containing p, else the one with the nearest pixel.
int component_for_point(const Plane<int>& labels, PixelCoord p) {
  if (const int l = labels(p.row, p.col); l > 0) return l;
  int best = 0;
  long best_d = std::numeric_limits<long>::max();
  for (Eigen::Index r = 0; r < labels.rows(); ++r) {
    for (Eigen::Index c = 0; c < labels.cols(); ++c) {
      if (labels(r, c) == 0) continue;
      const long dr = r - p.row, dc = c - p.col;
      const long d = dr * dr + dc * dc;
      if (d < best_d) {
        best_d = d;
        best = labels(r, c);
      }
    }
  }
  return best;
}

BinaryMask part_around(const BinaryMask& comp, const std::vector<PixelCoord>& pts) {
  double cy = 0, cx = 0;
  for (const auto& p : pts) {
    cy += p.row;
    cx += p.col;
  }
  cy /= static_cast<double>(pts.size());
  cx /= static_cast<double>(pts.size());
  const double area = static_cast<double>((comp > 0).count());
  const double radius = OracleTeacher::kPartRadiusFraction * std::sqrt(area / 3.141592653589793);
  BinaryMask out = BinaryMask::Zero(comp.rows(), comp.cols());
  for (Eigen::Index r = 0; r < comp.rows(); ++r) {
    for (Eigen::Index c = 0; c < comp.cols(); ++c) {
      const double dr = static_cast<double>(r) - cy, dc = static_cast<double>(c) - cx;
      if (comp(r, c) && dr * dr + dc * dc <= radius * radius) out(r, c) = 1;
    }
  }
  return out;
}

}  // namespace

OracleTeacher::OracleTeacher(GroundTruthLookup ground_truth, OracleNoise noise, std::uint64_t seed)
    : truth_(std::move(ground_truth)), noise_(noise), seed_(seed) {
  noise_.validate();
}

PseudoLabel OracleTeacher::predict(const TeacherRequest& request) const {
  request.validate();
  const auto it = truth_.find(request.sample_id);
  if (it == truth_.end()) {
    throw UnknownSampleError("oracle teacher: unknown sample id '" + request.sample_id + "'");
  }
  const BinaryMask truth = request.view.apply(it->second);
  const auto rows = truth.rows(), cols = truth.cols();
  const auto& prompts = request.prompts;

  Plane<int> labels;
  const int n = label_components(truth, labels);

  // Selected pieces, one per chosen component.
  std::vector<BinaryMask> pieces;
  if (prompts.box) {
    const BinaryMask in_box = box_mask(*prompts.box, rows, cols);
    const bool box_only = prompts.points.empty();
    long best_covered = 0;
    for (int l = 1; l <= n; ++l) {
      const BinaryMask comp = (labels == l).cast<std::uint8_t>();
      const auto total = (comp > 0).count();
      const auto covered = ((comp > 0) && (in_box > 0)).count();
      if (covered == 0) continue;
      const double coverage = static_cast<double>(covered) / static_cast<double>(total);
      const bool clip =
          noise_.prompt_sensitivity && (coverage < 0.5 || (box_only && covered < total));
      BinaryMask piece = clip ? BinaryMask(comp * in_box) : comp;
      // Without points a box designates a single object: keep only the one it covers most.
      if (box_only && noise_.prompt_sensitivity) {
        if (covered > best_covered) {
          best_covered = covered;
          pieces.assign(1, std::move(piece));
        }
      } else {
        pieces.push_back(std::move(piece));
      }
    }
  } else {
    std::map<int, std::vector<PixelCoord>> by_component;
    for (const auto& p : prompts.points) {
      if (const int l = component_for_point(labels, p.at); l > 0) by_component[l].push_back(p.at);
    }
    for (const auto& [l, pts] : by_component) {
      const BinaryMask comp = (labels == l).cast<std::uint8_t>();
      pieces.push_back(noise_.prompt_sensitivity ? part_around(comp, pts) : comp);
    }
  }

  Rng rng(sub_seed(seed_ ^ fnv1a(request.sample_id), "oracle",
                   static_cast<std::uint64_t>(request.pass)));
  BinaryMask out = BinaryMask::Zero(rows, cols);
  for (const auto& piece : pieces) {
    // Both draws happen for every piece so one piece's outcome never shifts another's.
    const bool drop = uniform01(rng) < noise_.component_drop_prob;
    const int j = noise_.boundary_jitter_px == 0
                      ? 0
                      : static_cast<int>(uniform_index(
                            rng, static_cast<std::uint64_t>(2 * noise_.boundary_jitter_px + 1))) -
                            noise_.boundary_jitter_px;
    if (drop) continue;
    const BinaryMask shaped = j > 0 ? dilate(piece, j) : j < 0 ? erode(piece, -j) : piece;
    out = out.max(shaped);
  }

  if (prompts.mask_prompt && noise_.prompt_sensitivity) {
    // A dense mask prompt anchors the decoder to the prompt: regions it misses are dropped and
    // its false positives inside the box are kept.
    const ProbPlane mp = data::resize_nearest(*prompts.mask_prompt, rows, cols);
    const BinaryMask prompt_mask = (mp >= 0.5f).cast<std::uint8_t>();
    BinaryMask kept = prompt_mask;
    if (prompts.box) kept = kept.min(box_mask(*prompts.box, rows, cols));
    out = out.min(dilate(prompt_mask, 1)).max(kept);
  }
  return PseudoLabel{std::move(out), std::nullopt, request.pass, id()};
}

std::string OracleTeacher::state_checksum() const {
  std::uint64_t h = fnv1a("oracle");
  for (const auto& [id, mask] : truth_) {
    h = fnv1a(id, h);
    const std::int64_t dims[2] = {mask.rows(), mask.cols()};
    h = fnv1a_bytes(dims, sizeof(dims), h);
    h = fnv1a_bytes(mask.data(), static_cast<std::size_t>(mask.size()), h);
  }
  h = fnv1a_bytes(&noise_.boundary_jitter_px, sizeof(int), h);
  h = fnv1a_bytes(&noise_.component_drop_prob, sizeof(double), h);
  const unsigned char ps = noise_.prompt_sensitivity ? 1 : 0;
  h = fnv1a_bytes(&ps, 1, h);
  h = fnv1a_bytes(&seed_, sizeof(seed_), h);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace kmine::teacher
