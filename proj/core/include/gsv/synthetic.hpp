#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gsv/image.hpp"
#include "gsv/nn.hpp"

namespace gsv {

struct SyntheticConfig {
  std::size_t height = 96;
  std::size_t width = 96;
  std::size_t classes = 4;
  std::size_t min_shapes = 3;
  std::size_t max_shapes = 6;
  double max_speed = 4.0;     // pixels per frame
  double min_radius = 8.0;    // half extent, pixels
  double max_radius = 20.0;
  double color_jitter = 30.0;  // per-shape RGB offset range
  double pixel_noise = 12.0;   // per-pixel uniform noise amplitude
};

enum class ShapeKind : std::uint8_t { rectangle, ellipse };

struct MovingShape {
  ShapeKind kind = ShapeKind::rectangle;
  std::uint8_t class_id = 1;
  double cx = 0, cy = 0;  // center at frame 0
  double rx = 1, ry = 1;  // half extents
  double vx = 0, vy = 0;  // pixels per frame
  std::array<double, 3> color{};
};

/// Static textured background (class 0) plus constant-velocity shapes
/// painted in order; a pixel's label is the class of the topmost shape
/// covering it. Rendering is a pure function of the scene and frame index.
struct SyntheticScene {
  SyntheticConfig config;
  std::vector<MovingShape> shapes;
  std::array<double, 4> background_phase{};
  std::uint64_t noise_seed = 0;

  RgbImage render(std::size_t t) const;
  LabelMap labels(std::size_t t) const;
};

SyntheticScene make_scene(const SyntheticConfig& config, Rng& rng);

/// Consecutive frames with a label map for every frame.
struct Snippet {
  std::vector<RgbImage> frames;
  std::vector<LabelMap> labels;
};

Snippet render_snippet(const SyntheticScene& scene, std::size_t frames);
std::vector<Snippet> make_synthetic_set(const SyntheticConfig& config, std::size_t snippets, std::size_t frames,
                                        std::uint64_t seed);

}  // namespace gsv
