#include "bowslab/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bowslab/error.hpp"
#include "bowslab/rng.hpp"

namespace bowslab {

namespace {

// Smoothstep-interpolated lattice noise with unit-variance lattice values.
void add_value_noise(std::vector<double>& plane, int w, int h, int cell, double amplitude, RngStream& rng) {
  const int gw = w / cell + 2;
  const int gh = h / cell + 2;
  std::vector<double> lattice(static_cast<std::size_t>(gw) * gh);
  for (auto& g : lattice) g = rng.gaussian();
  for (int y = 0; y < h; ++y) {
    const int y0 = y / cell;
    double fy = static_cast<double>(y % cell) / cell;
    fy = fy * fy * (3 - 2 * fy);
    for (int x = 0; x < w; ++x) {
      const int x0 = x / cell;
      double fx = static_cast<double>(x % cell) / cell;
      fx = fx * fx * (3 - 2 * fx);
      const double a = lattice[static_cast<std::size_t>(y0) * gw + x0];
      const double b = lattice[static_cast<std::size_t>(y0) * gw + x0 + 1];
      const double c = lattice[static_cast<std::size_t>(y0 + 1) * gw + x0];
      const double d = lattice[static_cast<std::size_t>(y0 + 1) * gw + x0 + 1];
      plane[static_cast<std::size_t>(y) * w + x] +=
          amplitude * ((a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy);
    }
  }
}

double uniform(RngStream& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

}  // namespace

Pixmap synth_fixture(std::uint64_t seed, int width, int height) {
  if (width <= 0 || height <= 0) throw DimensionError("fixture dimensions must be positive");
  RngStream rng(derive_seed(seed, "fixture"));
  std::vector<double> plane(static_cast<std::size_t>(width) * height, uniform(rng, 90, 160));

  const int cells[] = {128, 64, 32, 16, 8, 4, 2};
  double octave_gain = 1.0;
  for (int cell : cells) {
    add_value_noise(plane, width, height, cell, uniform(rng, 0.5, 1.5) * 40.0 * octave_gain, rng);
    octave_gain *= 0.55;
  }

  const int shapes = 8 + static_cast<int>(rng.below(12));
  for (int s = 0; s < shapes; ++s) {
    const double cx = uniform(rng, 0, width);
    const double cy = uniform(rng, 0, height);
    const double rx = uniform(rng, 15, 120);
    const double ry = uniform(rng, 15, 120);
    const double th = uniform(rng, 0, std::numbers::pi);
    const double level = uniform(rng, -60, 60);
    const double slope = uniform(rng, -0.3, 0.3);
    const bool striped = rng.uniform() < 0.4;
    const double freq = uniform(rng, 0.05, 0.5);
    const double stripe_amp = uniform(rng, 5, 25);
    const double phase = uniform(rng, 0, 6);
    const double ct = std::cos(th);
    const double st = std::sin(th);
    const int y_lo = std::max(0, static_cast<int>(cy - std::max(rx, ry)) - 1);
    const int y_hi = std::min(height - 1, static_cast<int>(cy + std::max(rx, ry)) + 1);
    const int x_lo = std::max(0, static_cast<int>(cx - std::max(rx, ry)) - 1);
    const int x_hi = std::min(width - 1, static_cast<int>(cx + std::max(rx, ry)) + 1);
    for (int y = y_lo; y <= y_hi; ++y)
      for (int x = x_lo; x <= x_hi; ++x) {
        const double px = (x - cx) * ct + (y - cy) * st;
        const double py = -(x - cx) * st + (y - cy) * ct;
        if ((px / rx) * (px / rx) + (py / ry) * (py / ry) >= 1.0) continue;
        double value = level + slope * px;
        if (striped) value += stripe_amp * std::sin(freq * px + phase);
        double& p = plane[static_cast<std::size_t>(y) * width + x];
        p = 0.3 * p + 0.7 * (value + 110.0);
      }
  }

  std::vector<std::uint8_t> samples(plane.size());
  for (std::size_t i = 0; i < plane.size(); ++i) {
    const double v = std::nearbyint(plane[i] + 1.5 * rng.gaussian());
    samples[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
  }
  return Pixmap(width, height, std::move(samples));
}

Pixmap fixture(int index, int size) {
  if (index < 0) throw ValidationError("fixture index must be non-negative");
  return synth_fixture(derive_seed(kFixtureSeed, static_cast<std::uint64_t>(index)), size, size);
}

std::vector<Pixmap> fixture_set(int count, int size) {
  std::vector<Pixmap> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(fixture(i, size));
  return out;
}

Pixmap contest_original(std::string_view name, int size) {
  for (std::size_t i = 0; i < kContestImages.size(); ++i)
    if (kContestImages[i] == name) return synth_fixture(derive_seed(kFixtureSeed, name), size, size);
  throw ValidationError("unknown contest image '" + std::string(name) + "'");
}

}  // namespace bowslab
