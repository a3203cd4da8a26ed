#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bowslab/blockdct.hpp"
#include "bowslab/kvfile.hpp"
#include "bowslab/pixmap.hpp"

namespace bowslab {

// (0,1), (1,0), (1,1), (2,0), (2,1), (1,2), (2,2), (0,2)
std::vector<UV> default_shuffle_positions();

struct WuaParams {
  int zero_threshold = 63;  // zigzag ranks above this are zeroed
  std::vector<UV> shuffle_positions = default_shuffle_positions();
  int window = 0;  // A: maximum sorted-rank distance of one swap
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;  // pixel-domain Gaussian, gray levels

  void validate() const;
  KvRecord to_record() const;
  // Missing keys keep their defaults. Positions are written "u,v;u,v;...".
  static WuaParams from_record(const KvRecord& rec);
};

std::string format_positions(const std::vector<UV>& positions);
std::vector<UV> parse_positions(const std::string& text);

DctImage zero_highfreq(const DctImage& d, int threshold);

// Window-restricted shuffle of one coefficient family. `values` are taken in block
// order; returns the permutation perm such that new_values[b] = values[perm[b]].
std::vector<std::size_t> windowed_shuffle_permutation(const std::vector<double>& values, int window,
                                                      std::uint64_t stream_key);

DctImage shuffle_coefficients(const DctImage& d, const std::vector<UV>& positions, int window, std::uint64_t seed);

Pixmap wua_attack(const Pixmap& img, const WuaParams& params);

// Seeded Gaussian noise on the listed coefficient positions of every block.
Pixmap focused_attack(const Pixmap& img, const std::vector<UV>& positions, double noise_sigma, std::uint64_t seed);

// Fixed seed list for the "try a few dozen seeds" mode.
std::vector<std::uint64_t> sweep_seeds(std::uint64_t base_seed, int count);

}  // namespace bowslab
