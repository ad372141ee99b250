#pragma once

#include "kmine/data/sample.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>

namespace kmine::data {

inline constexpr int kManifestVersion = 1;

/// Immutable assignment of sample ids to partitions.
struct SplitManifest {
  int version = kManifestVersion;
  std::uint64_t seed = 0;
  double labeled_fraction = 1.0;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  std::vector<std::string> labeled_ids;
  std::vector<std::string> unlabeled_ids;
  std::vector<std::string> val_ids;
  std::vector<std::string> test_ids;

  /// Pairwise disjointness of the four lists.
  void validate() const;
  /// Stable content hash (hex) used to tie checkpoints and runs to a manifest.
  std::string hash() const;

  friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

void to_json(nlohmann::json& j, const SplitManifest& m);
void from_json(const nlohmann::json& j, SplitManifest& m);

SplitManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const SplitManifest& m);

/// Shuffles sorted ids under `seed` into train/val/test, then keeps labels on the first
/// round(labeled_fraction * |train|) training ids. With `presplit`, val/test are taken as-is
/// and only the label drop is applied within its training partition.
SplitManifest make_split(std::span<const ImageSample> samples, double labeled_fraction,
                         double val_fraction, double test_fraction, std::uint64_t seed,
                         const std::optional<PreSplit>& presplit = std::nullopt);

/// Samples grouped by partition. Unlabeled samples carry no mask.
struct SplitData {
  std::vector<ImageSample> labeled;
  std::vector<ImageSample> unlabeled;
  std::vector<ImageSample> val;
  std::vector<ImageSample> test;
};

SplitData apply_split(std::span<const ImageSample> samples, const SplitManifest& manifest);

}  // namespace kmine::data
