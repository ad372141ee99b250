#pragma once

#include "kmine/core/rng.hpp"
#include "kmine/core/types.hpp"
#include "kmine/data/sample.hpp"

#include <filesystem>
#include <unistd.h>
#include <string>

namespace kmine::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "kmine") {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline BinaryMask random_mask(Eigen::Index rows, Eigen::Index cols, double density, Rng& rng) {
  BinaryMask m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform01(rng) < density ? 1 : 0;
  return m;
}

inline ProbPlane random_probs(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  ProbPlane p(rows, cols);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = static_cast<float>(uniform01(rng));
  return p;
}

inline RgbImage random_image(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  RgbImage img(rows, cols);
  for (auto& c : img.channels) {
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = static_cast<float>(uniform01(rng));
  }
  return img;
}

/// Filled axis-aligned rectangle, inclusive bounds.
inline void fill_rect(BinaryMask& m, int r0, int c0, int r1, int c1) {
  m.block(r0, c0, r1 - r0 + 1, c1 - c0 + 1).setOnes();
}

}  // namespace kmine::testing
