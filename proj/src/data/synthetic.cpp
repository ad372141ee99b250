#include "kmine/data/synthetic.hpp"

#include "kmine/core/morphology.hpp"
#include "kmine/core/rng.hpp"

#include <cmath>
#include <cstdio>

namespace kmine::data {

namespace {

constexpr double kTwoPi = 6.283185307179586;

struct Shape {
  bool ellipse = true;
  double cy = 0, cx = 0;
  double ry = 1, rx = 1;
  double theta = 0;

  /// Normalized radius: < 1 inside.
  double radius(double y, double x) const {
    const double dy = y - cy, dx = x - cx;
    const double c = std::cos(theta), s = std::sin(theta);
    const double u = (c * dx + s * dy) / rx;
    const double v = (-s * dx + c * dy) / ry;
    return ellipse ? std::sqrt(u * u + v * v) : std::max(std::abs(u), std::abs(v));
  }
};

Shape draw_shape(const ShapeSpec& spec, int size, Rng& rng) {
  Shape s;
  if (spec.ellipses && spec.rectangles) {
    s.ellipse = uniform01(rng) < 0.6;
  } else {
    s.ellipse = spec.ellipses;
  }
  s.ry = uniform(rng, spec.min_extent, spec.max_extent) * size;
  s.rx = uniform(rng, spec.min_extent, spec.max_extent) * size;
  s.theta = uniform(rng, 0.0, kTwoPi / 2);
  const double reach = std::max(s.ry, s.rx) * (s.ellipse ? 1.0 : 1.42);
  const double margin = std::min(reach + 1.0, size / 2.0 - 1.0);
  s.cy = uniform(rng, margin, size - 1 - margin);
  s.cx = uniform(rng, margin, size - 1 - margin);
  return s;
}

BinaryMask rasterize(const Shape& s, int size) {
  BinaryMask m(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) m(y, x) = s.radius(y, x) < 1.0 ? 1 : 0;
  }
  return m;
}

/// Low-frequency sinusoid mixture in roughly [-1, 1].
Plane<float> texture(int size, Rng& rng, int waves, double max_cycles) {
  Plane<float> t = Plane<float>::Zero(size, size);
  for (int k = 0; k < waves; ++k) {
    const double freq = uniform(rng, 0.5, max_cycles) * kTwoPi / size;
    const double angle = uniform(rng, 0.0, kTwoPi);
    const double phase = uniform(rng, 0.0, kTwoPi);
    const double fy = freq * std::sin(angle), fx = freq * std::cos(angle);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        t(y, x) += static_cast<float>(std::sin(fy * y + fx * x + phase) / waves);
      }
    }
  }
  return t;
}

std::array<double, 3> random_direction(Rng& rng) {
  std::array<double, 3> d{};
  double n = 0;
  do {
    for (auto& v : d) v = normal(rng);
    n = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
  } while (n < 1e-6);
  for (auto& v : d) v /= n;
  return d;
}

void paint(RgbImage& img, const Shape& s, const std::array<double, 3>& delta, const Plane<float>& tex,
           double tex_amp) {
  const int size = static_cast<int>(img.rows());
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double r = s.radius(y, x);
      if (r >= 1.0) continue;
      // Brighter towards the centre.
      const double shade = 0.75 + 0.25 * (1.0 - r * r);
      for (int c = 0; c < 3; ++c) {
        img.channels[c](y, x) += static_cast<float>(delta[c] * shade + tex_amp * tex(y, x));
      }
    }
  }
}

ImageSample generate_one(int index, int size, const ShapeSpec& spec, std::uint64_t seed) {
  Rng rng(sub_seed(seed, "synthetic", static_cast<std::uint64_t>(index)));
  RgbImage img(size, size);
  const Plane<float> bg_tex = texture(size, rng, 3, 4.0);
  for (int c = 0; c < 3; ++c) {
    const double base = uniform(rng, 0.25, 0.65);
    const double weight = uniform(rng, 0.5, 1.0);
    img.channels[c] = static_cast<float>(base) +
                      static_cast<float>(spec.texture_amplitude * weight) * bg_tex;
  }

  const int count = spec.min_shapes +
                    static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(
                                                            spec.max_shapes - spec.min_shapes + 1)));
  BinaryMask mask = BinaryMask::Zero(size, size);
  std::vector<Shape> shapes;
  for (int k = 0; k < count; ++k) {
    Shape s = draw_shape(spec, size, rng);
    BinaryMask m = rasterize(s, size);
    if (spec.force_disjoint) {
      const BinaryMask guard = dilate(mask, spec.min_gap_px + 1);
      int attempts = 0;
      while (((m > 0) && (guard > 0)).any() && attempts++ < 200) {
        s = draw_shape(spec, size, rng);
        m = rasterize(s, size);
      }
      if (((m > 0) && (guard > 0)).any()) continue;
    }
    mask = mask.max(m);
    shapes.push_back(s);
  }

  const auto fg_dir = random_direction(rng);
  const double contrast = uniform(rng, spec.contrast_min, spec.contrast_max);
  const Plane<float> fg_tex = texture(size, rng, 2, 8.0);
  for (int k = 0; k < spec.distractors; ++k) {
    Shape d = draw_shape(spec, size, rng);
    auto dir = random_direction(rng);
    std::array<double, 3> delta{};
    for (int c = 0; c < 3; ++c) delta[c] = spec.distractor_contrast * dir[c];
    // Distractors sit under the targets and never enter the mask.
    paint(img, d, delta, fg_tex, 0.0);
  }
  std::array<double, 3> delta{};
  for (int c = 0; c < 3; ++c) delta[c] = contrast * fg_dir[c];
  for (const auto& s : shapes) paint(img, s, delta, fg_tex, spec.texture_amplitude);

  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double v = img.channels[c](y, x) + spec.noise_sigma * normal(rng);
        img.channels[c](y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }

  char id[32];
  std::snprintf(id, sizeof(id), "syn_%05d", index);
  return ImageSample{id, std::move(img), std::move(mask), "synthetic"};
}

}  // namespace

void ShapeSpec::validate() const {
  if (min_shapes < 1 || max_shapes < min_shapes) {
    throw ValidationError("shape_spec: need 1 <= min_shapes <= max_shapes");
  }
  if (!ellipses && !rectangles) throw ValidationError("shape_spec: no shape kinds enabled");
  if (!(min_extent > 0 && max_extent >= min_extent && max_extent < 0.5)) {
    throw ValidationError("shape_spec: extents must satisfy 0 < min <= max < 0.5");
  }
  if (contrast_max < contrast_min || noise_sigma < 0 || texture_amplitude < 0 || distractors < 0) {
    throw ValidationError("shape_spec: invalid appearance parameters");
  }
}

void to_json(nlohmann::json& j, const ShapeSpec& s) {
  j = {{"min_shapes", s.min_shapes},       {"max_shapes", s.max_shapes},
       {"ellipses", s.ellipses},           {"rectangles", s.rectangles},
       {"min_extent", s.min_extent},       {"max_extent", s.max_extent},
       {"force_disjoint", s.force_disjoint}, {"min_gap_px", s.min_gap_px},
       {"contrast_min", s.contrast_min},   {"contrast_max", s.contrast_max},
       {"noise_sigma", s.noise_sigma},     {"texture_amplitude", s.texture_amplitude},
       {"distractors", s.distractors},     {"distractor_contrast", s.distractor_contrast}};
}

void from_json(const nlohmann::json& j, ShapeSpec& s) {
  s = ShapeSpec{};
  s.min_shapes = j.value("min_shapes", s.min_shapes);
  s.max_shapes = j.value("max_shapes", s.max_shapes);
  s.ellipses = j.value("ellipses", s.ellipses);
  s.rectangles = j.value("rectangles", s.rectangles);
  s.min_extent = j.value("min_extent", s.min_extent);
  s.max_extent = j.value("max_extent", s.max_extent);
  s.force_disjoint = j.value("force_disjoint", s.force_disjoint);
  s.min_gap_px = j.value("min_gap_px", s.min_gap_px);
  s.contrast_min = j.value("contrast_min", s.contrast_min);
  s.contrast_max = j.value("contrast_max", s.contrast_max);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.texture_amplitude = j.value("texture_amplitude", s.texture_amplitude);
  s.distractors = j.value("distractors", s.distractors);
  s.distractor_contrast = j.value("distractor_contrast", s.distractor_contrast);
}

std::vector<ImageSample> generate_synthetic_dataset(int n, int image_size, const ShapeSpec& spec,
                                                    std::uint64_t seed) {
  if (n <= 0) throw ValidationError("synthetic dataset: n must be > 0");
  if (image_size < 8) throw ValidationError("synthetic dataset: image_size must be >= 8");
  spec.validate();
  std::vector<ImageSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(generate_one(i, image_size, spec, seed));
  return out;
}

void export_flat_pairs(const std::filesystem::path& dir, const std::vector<ImageSample>& samples) {
  std::filesystem::create_directories(dir);
  for (const auto& s : samples) {
    write_rgb(dir / (s.id + ".img.png"), s.image);
    if (s.mask) write_mask(dir / (s.id + ".mask.png"), *s.mask);
  }
}

}  // namespace kmine::data
