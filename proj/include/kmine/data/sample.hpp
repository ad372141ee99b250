#pragma once

#include "kmine/core/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace kmine::data {

struct ImageSample {
  std::string id;
  RgbImage image;
  std::optional<BinaryMask> mask;  // absent for unlabeled samples
  std::string source;

  bool labeled() const { return mask.has_value(); }
  /// Checks dims agreement, value ranges and mask binarity.
  void validate() const;
  /// Copy without the ground-truth mask.
  ImageSample without_mask() const;
};

enum class DatasetLayout { kvasir_seg, covid_qu_ex, flat_pairs };

std::string to_string(DatasetLayout layout);
DatasetLayout layout_from_string(const std::string& s);

/// Fixed partition shipped with a dataset (COVID-QU-Ex Train/Val/Test).
struct PreSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  std::vector<std::string> test_ids;
};

struct Dataset {
  std::vector<ImageSample> samples;
  std::optional<PreSplit> presplit;
};

struct LoadOptions {
  /// Downscale on ingestion so the shortest side equals this value (memory bound for large sets).
  std::optional<int> resize_shortest_side;
};

class MissingMaskError : public ValidationError {
 public:
  explicit MissingMaskError(std::vector<std::string> orphans);
  const std::vector<std::string>& orphan_stems() const { return orphans_; }

 private:
  std::vector<std::string> orphans_;
};

class EmptyDatasetError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UnreadableFileError : public IoError {
 public:
  explicit UnreadableFileError(std::filesystem::path path);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

Dataset load_dataset(const std::filesystem::path& root, DatasetLayout layout,
                     const LoadOptions& options = {});

RgbImage read_rgb(const std::filesystem::path& path);
/// Reads a mask and binarizes at half of its maximum stored intensity.
BinaryMask read_mask(const std::filesystem::path& path);
void write_rgb(const std::filesystem::path& path, const RgbImage& image);
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);

/// PNG bytes of an image (used on the teacher wire format).
std::vector<unsigned char> encode_png(const RgbImage& image);
RgbImage decode_image(const std::vector<unsigned char>& bytes);

}  // namespace kmine::data
