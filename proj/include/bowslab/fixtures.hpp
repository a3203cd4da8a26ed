#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "bowslab/pixmap.hpp"

namespace bowslab {

// Deterministic synthetic grayscale scene: multi-octave value noise, a handful of
// hard-edged shapes (some carrying oriented stripe texture) and mild sensor noise.
Pixmap synth_fixture(std::uint64_t seed, int width = 512, int height = 512);

constexpr std::uint64_t kFixtureSeed = 2007;
constexpr int kFixtureCount = 10;

// The standard fixture set used by the test suites.
Pixmap fixture(int index, int size = 512);
std::vector<Pixmap> fixture_set(int count = kFixtureCount, int size = 512);

// The three contest images served by the oracle service.
inline constexpr std::array<std::string_view, 3> kContestImages = {"strawberry", "woodpath", "church"};
Pixmap contest_original(std::string_view name, int size = 512);

}  // namespace bowslab
