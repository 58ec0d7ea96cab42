#include "gsv/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gsv {

namespace {

constexpr std::array<std::array<double, 3>, 8> kClassColors{{
    {128, 128, 128},
    {205, 60, 55},
    {55, 175, 70},
    {60, 85, 210},
    {215, 190, 50},
    {170, 70, 190},
    {50, 185, 190},
    {235, 130, 40},
}};

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Uniform in [-1, 1), a pure function of its arguments.
double hash_noise(std::uint64_t seed, std::size_t t, std::size_t y, std::size_t x, std::size_t c) {
  std::uint64_t h = splitmix(seed ^ splitmix(t * 0x100000001B3ull + y));
  h = splitmix(h ^ (x * 4 + c));
  return static_cast<double>(h >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

bool covers(const MovingShape& s, double px, double py, std::size_t t) {
  const double dx = px - (s.cx + s.vx * static_cast<double>(t));
  const double dy = py - (s.cy + s.vy * static_cast<double>(t));
  if (s.kind == ShapeKind::rectangle) return std::abs(dx) <= s.rx && std::abs(dy) <= s.ry;
  return (dx * dx) / (s.rx * s.rx) + (dy * dy) / (s.ry * s.ry) <= 1.0;
}

int topmost(const std::vector<MovingShape>& shapes, double px, double py, std::size_t t) {
  for (std::size_t i = shapes.size(); i-- > 0;) {
    if (covers(shapes[i], px, py, t)) return static_cast<int>(i);
  }
  return -1;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

SyntheticScene make_scene(const SyntheticConfig& config, Rng& rng) {
  if (config.classes < 2 || config.classes > kClassColors.size()) {
    throw std::invalid_argument("synthetic scenes support 2.." + std::to_string(kClassColors.size()) + " classes");
  }
  if (config.min_shapes > config.max_shapes) throw std::invalid_argument("min_shapes exceeds max_shapes");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> count(config.min_shapes, config.max_shapes);
  std::uniform_int_distribution<int> cls(1, static_cast<int>(config.classes) - 1);

  SyntheticScene scene;
  scene.config = config;
  for (double& p : scene.background_phase) p = unit(rng) * 2.0 * std::numbers::pi;
  scene.noise_seed = rng();
  const std::size_t n = count(rng);
  for (std::size_t i = 0; i < n; ++i) {
    MovingShape s;
    s.kind = unit(rng) < 0.5 ? ShapeKind::rectangle : ShapeKind::ellipse;
    s.class_id = static_cast<std::uint8_t>(cls(rng));
    s.cx = unit(rng) * static_cast<double>(config.width);
    s.cy = unit(rng) * static_cast<double>(config.height);
    s.rx = config.min_radius + unit(rng) * (config.max_radius - config.min_radius);
    s.ry = config.min_radius + unit(rng) * (config.max_radius - config.min_radius);
    const double speed = unit(rng) * config.max_speed;
    const double angle = unit(rng) * 2.0 * std::numbers::pi;
    s.vx = speed * std::cos(angle);
    s.vy = speed * std::sin(angle);
    for (std::size_t c = 0; c < 3; ++c) {
      s.color[c] = kClassColors[s.class_id][c] + (unit(rng) * 2.0 - 1.0) * config.color_jitter;
    }
    scene.shapes.push_back(s);
  }
  return scene;
}

RgbImage SyntheticScene::render(std::size_t t) const {
  RgbImage img(config.height, config.width);
  const auto& ph = background_phase;
  for (std::size_t y = 0; y < config.height; ++y) {
    for (std::size_t x = 0; x < config.width; ++x) {
      const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
      std::array<double, 3> rgb{};
      const int top = topmost(shapes, px, py, t);
      if (top < 0) {
        const double tex = 28.0 * std::sin(px * 0.21 + ph[0]) * std::cos(py * 0.17 + ph[1]) +
                           14.0 * std::sin((px + py) * 0.45 + ph[2]);
        for (std::size_t c = 0; c < 3; ++c) rgb[c] = kClassColors[0][c] + tex + 6.0 * std::sin(ph[3] + c);
      } else {
        const MovingShape& s = shapes[static_cast<std::size_t>(top)];
        const double lx = px - (s.cx + s.vx * static_cast<double>(t));
        const double ly = py - (s.cy + s.vy * static_cast<double>(t));
        const double shade = 0.85 + 0.15 * std::sin(lx * 0.6) * std::cos(ly * 0.45);
        for (std::size_t c = 0; c < 3; ++c) rgb[c] = s.color[c] * shade;
      }
      for (std::size_t c = 0; c < 3; ++c) {
        img.rgb[(y * config.width + x) * 3 + c] = to_byte(rgb[c] + config.pixel_noise * hash_noise(noise_seed, t, y, x, c));
      }
    }
  }
  return img;
}

LabelMap SyntheticScene::labels(std::size_t t) const {
  LabelMap map(config.height, config.width);
  for (std::size_t y = 0; y < config.height; ++y) {
    for (std::size_t x = 0; x < config.width; ++x) {
      const int top = topmost(shapes, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5, t);
      map.at(y, x) = top < 0 ? 0 : shapes[static_cast<std::size_t>(top)].class_id;
    }
  }
  return map;
}

Snippet render_snippet(const SyntheticScene& scene, std::size_t frames) {
  Snippet s;
  for (std::size_t t = 0; t < frames; ++t) {
    s.frames.push_back(scene.render(t));
    s.labels.push_back(scene.labels(t));
  }
  return s;
}

std::vector<Snippet> make_synthetic_set(const SyntheticConfig& config, std::size_t snippets, std::size_t frames,
                                        std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Snippet> out;
  out.reserve(snippets);
  for (std::size_t i = 0; i < snippets; ++i) out.push_back(render_snippet(make_scene(config, rng), frames));
  return out;
}

}  // namespace gsv
