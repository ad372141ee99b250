#include "kmine/data/resample.hpp"
#include "kmine/data/sample.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <map>
#include <set>

namespace kmine::data {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kImageExtensions{".jpg", ".jpeg", ".png", ".bmp", ".tif",
                                             ".tiff", ".ppm", ".pgm"};

bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return fs::is_regular_file(p) && kImageExtensions.count(ext) > 0;
}

/// stem -> path for every image file directly inside `dir`.
std::map<std::string, fs::path> index_dir(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!is_image_file(e.path())) continue;
    const auto stem = e.path().stem().string();
    if (!out.emplace(stem, e.path()).second) {
      throw ValidationError("duplicate sample id '" + stem + "' in " + dir.string());
    }
  }
  return out;
}

RgbImage from_mat(const cv::Mat& bgr) {
  RgbImage img(bgr.rows, bgr.cols);
  const double scale = bgr.depth() == CV_16U ? 1.0 / 65535.0 : 1.0 / 255.0;
  for (int y = 0; y < bgr.rows; ++y) {
    for (int x = 0; x < bgr.cols; ++x) {
      if (bgr.depth() == CV_16U) {
        const auto& px = bgr.at<cv::Vec3w>(y, x);
        for (int c = 0; c < 3; ++c) img.channels[c](y, x) = static_cast<float>(px[2 - c] * scale);
      } else {
        const auto& px = bgr.at<cv::Vec3b>(y, x);
        for (int c = 0; c < 3; ++c) img.channels[c](y, x) = static_cast<float>(px[2 - c] * scale);
      }
    }
  }
  return img;
}

void resize_sample(ImageSample& s, int shortest) {
  const auto rows = s.image.rows(), cols = s.image.cols();
  const double scale = static_cast<double>(shortest) / static_cast<double>(std::min(rows, cols));
  const auto nr = std::max<Eigen::Index>(1, std::lround(rows * scale));
  const auto nc = std::max<Eigen::Index>(1, std::lround(cols * scale));
  if (nr == rows && nc == cols) return;
  for (auto& ch : s.image.channels) ch = resize_bilinear(ch, nr, nc);
  if (s.mask) *s.mask = resize_nearest(*s.mask, nr, nc);
}

ImageSample load_pair(const std::string& id, const fs::path& image, const fs::path& mask,
                      const std::string& source, const LoadOptions& opt) {
  ImageSample s;
  s.id = id;
  s.image = read_rgb(image);
  s.mask = read_mask(mask);
  s.source = source;
  if (s.mask->rows() != s.image.rows() || s.mask->cols() != s.image.cols()) {
    throw ShapeMismatch("sample '" + id + "': mask " + mask.string() + " dims differ from image");
  }
  if (opt.resize_shortest_side) resize_sample(s, *opt.resize_shortest_side);
  return s;
}

/// Pairs images with masks by stem; throws MissingMaskError listing images without masks.
std::vector<std::pair<std::string, std::pair<fs::path, fs::path>>> match_pairs(
    const std::map<std::string, fs::path>& images, const std::map<std::string, fs::path>& masks) {
  std::vector<std::string> orphans;
  std::vector<std::pair<std::string, std::pair<fs::path, fs::path>>> out;
  for (const auto& [stem, path] : images) {
    auto it = masks.find(stem);
    if (it == masks.end()) {
      orphans.push_back(stem);
    } else {
      out.push_back({stem, {path, it->second}});
    }
  }
  if (!orphans.empty()) throw MissingMaskError(std::move(orphans));
  return out;
}

void check_unique(const std::vector<ImageSample>& samples) {
  std::set<std::string> seen;
  for (const auto& s : samples) {
    if (!seen.insert(s.id).second) throw ValidationError("duplicate sample id '" + s.id + "'");
  }
}

}  // namespace

MissingMaskError::MissingMaskError(std::vector<std::string> orphans)
    : ValidationError([&] {
        std::string msg = "missing mask for image stem(s):";
        for (const auto& o : orphans) msg += " " + o;
        return msg;
      }()),
      orphans_(std::move(orphans)) {}

UnreadableFileError::UnreadableFileError(fs::path path)
    : IoError("unreadable file: " + path.string()), path_(std::move(path)) {}

std::string to_string(DatasetLayout layout) {
  switch (layout) {
    case DatasetLayout::kvasir_seg: return "kvasir_seg";
    case DatasetLayout::covid_qu_ex: return "covid_qu_ex";
    case DatasetLayout::flat_pairs: return "flat_pairs";
  }
  return "unknown";
}

DatasetLayout layout_from_string(const std::string& s) {
  if (s == "kvasir_seg") return DatasetLayout::kvasir_seg;
  if (s == "covid_qu_ex") return DatasetLayout::covid_qu_ex;
  if (s == "flat_pairs") return DatasetLayout::flat_pairs;
  throw ValidationError("dataset.layout: unknown layout '" + s + "'");
}

void ImageSample::validate() const {
  if (image.empty()) throw ValidationError("sample '" + id + "': empty image");
  for (const auto& c : image.channels) {
    if (c.rows() != image.rows() || c.cols() != image.cols()) {
      throw ShapeMismatch("sample '" + id + "': channel dims differ");
    }
    if (!((c >= 0.0f) && (c <= 1.0f)).all()) {
      throw ValidationError("sample '" + id + "': intensities outside [0,1]");
    }
  }
  if (mask) {
    if (mask->rows() != image.rows() || mask->cols() != image.cols()) {
      throw ShapeMismatch("sample '" + id + "': mask dims differ from image");
    }
    if (!(*mask <= 1).all()) throw ValidationError("sample '" + id + "': mask is not binary");
  }
}

ImageSample ImageSample::without_mask() const {
  return ImageSample{id, image, std::nullopt, source};
}

RgbImage read_rgb(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR | cv::IMREAD_ANYDEPTH);
  if (m.empty()) throw UnreadableFileError(path);
  return from_mat(m);
}

BinaryMask read_mask(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE | cv::IMREAD_ANYDEPTH);
  if (m.empty()) throw UnreadableFileError(path);
  cv::Mat f;
  m.convertTo(f, CV_64F);
  double lo = 0, hi = 0;
  cv::minMaxLoc(f, &lo, &hi);
  BinaryMask out = BinaryMask::Zero(f.rows, f.cols);
  if (hi <= 0) return out;
  const double t = 0.5 * hi;
  for (int y = 0; y < f.rows; ++y) {
    for (int x = 0; x < f.cols; ++x) out(y, x) = f.at<double>(y, x) >= t ? 1 : 0;
  }
  return out;
}

namespace {
cv::Mat to_mat(const RgbImage& image) {
  cv::Mat m(static_cast<int>(image.rows()), static_cast<int>(image.cols()), CV_8UC3);
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) {
      auto& px = m.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(image.channels[c](y, x), 0.0f, 1.0f);
        px[2 - c] = static_cast<unsigned char>(std::lround(v * 255.0f));
      }
    }
  }
  return m;
}
}  // namespace

void write_rgb(const fs::path& path, const RgbImage& image) {
  if (!cv::imwrite(path.string(), to_mat(image))) throw IoError("cannot write " + path.string());
}

void write_mask(const fs::path& path, const BinaryMask& mask) {
  cv::Mat m(static_cast<int>(mask.rows()), static_cast<int>(mask.cols()), CV_8UC1);
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) m.at<unsigned char>(y, x) = mask(y, x) ? 255 : 0;
  }
  if (!cv::imwrite(path.string(), m)) throw IoError("cannot write " + path.string());
}

std::vector<unsigned char> encode_png(const RgbImage& image) {
  std::vector<unsigned char> buf;
  cv::imencode(".png", to_mat(image), buf);
  return buf;
}

RgbImage decode_image(const std::vector<unsigned char>& bytes) {
  cv::Mat m = cv::imdecode(bytes, cv::IMREAD_COLOR);
  if (m.empty()) throw ValidationError("cannot decode image bytes");
  return from_mat(m);
}

Dataset load_dataset(const fs::path& root, DatasetLayout layout, const LoadOptions& options) {
  if (!fs::is_directory(root)) throw ValidationError("dataset root does not exist: " + root.string());
  Dataset ds;
  switch (layout) {
    case DatasetLayout::kvasir_seg: {
      const auto pairs = match_pairs(index_dir(root / "images"), index_dir(root / "masks"));
      for (const auto& [stem, paths] : pairs) {
        ds.samples.push_back(load_pair(stem, paths.first, paths.second, "kvasir_seg", options));
      }
      break;
    }
    case DatasetLayout::flat_pairs: {
      std::map<std::string, fs::path> images, masks;
      for (const auto& e : fs::directory_iterator(root)) {
        if (!is_image_file(e.path())) continue;
        // <stem>.img.<ext> / <stem>.mask.<ext>
        const auto inner = e.path().stem();
        const auto kind = inner.extension().string();
        const auto stem = inner.stem().string();
        if (kind != ".img" && kind != ".mask") continue;
        auto& target = kind == ".img" ? images : masks;
        if (!target.emplace(stem, e.path()).second) {
          throw ValidationError("duplicate sample id '" + stem + "' in " + root.string());
        }
      }
      for (const auto& [stem, paths] : match_pairs(images, masks)) {
        ds.samples.push_back(load_pair(stem, paths.first, paths.second, "flat_pairs", options));
      }
      break;
    }
    case DatasetLayout::covid_qu_ex: {
      PreSplit split;
      const std::array<std::pair<const char*, std::vector<std::string>*>, 3> parts{
          {{"Train", &split.train_ids}, {"Val", &split.val_ids}, {"Test", &split.test_ids}}};
      for (const auto& [name, ids] : parts) {
        const auto dir = root / name;
        if (!fs::is_directory(dir)) throw ValidationError("covid_qu_ex: missing " + dir.string());
        // images/ and "lung masks"/ either directly below the split or under class folders.
        std::vector<fs::path> image_dirs;
        if (fs::is_directory(dir / "images")) image_dirs.push_back(dir / "images");
        for (const auto& e : fs::directory_iterator(dir)) {
          if (e.is_directory() && fs::is_directory(e.path() / "images")) {
            image_dirs.push_back(e.path() / "images");
          }
        }
        std::sort(image_dirs.begin(), image_dirs.end());
        for (const auto& images_dir : image_dirs) {
          const auto masks_dir = images_dir.parent_path() / "lung masks";
          const auto pairs = match_pairs(index_dir(images_dir), index_dir(masks_dir));
          for (const auto& [stem, paths] : pairs) {
            ds.samples.push_back(load_pair(stem, paths.first, paths.second,
                                           std::string("covid_qu_ex/") + name, options));
            ids->push_back(stem);
          }
        }
      }
      ds.presplit = std::move(split);
      break;
    }
  }
  if (ds.samples.empty()) throw EmptyDatasetError("dataset at " + root.string() + " is empty");
  check_unique(ds.samples);
  return ds;
}

}  // namespace kmine::data
