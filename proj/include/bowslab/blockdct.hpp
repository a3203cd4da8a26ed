#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "bowslab/pixmap.hpp"

namespace bowslab {

constexpr int kBlock = 8;
constexpr int kBlockArea = kBlock * kBlock;

// 8x8 coefficients indexed [u * 8 + v]; u is the vertical frequency (row), v the horizontal one.
using CoeffBlock = std::array<double, kBlockArea>;

struct UV {
  int u = 0;
  int v = 0;
  friend bool operator==(const UV&, const UV&) = default;
  friend auto operator<=>(const UV&, const UV&) = default;
};

// JPEG zigzag rank of (u, v); (0,0) -> 0, (0,1) -> 1, (1,0) -> 2, ..., (7,7) -> 63.
int zigzag_rank(int u, int v);
UV zigzag_position(int rank);

// Address of one DCT sample. flat == block * 64 + zigzag_rank(u, v).
struct CoeffIndex {
  std::size_t block = 0;
  int u = 0;
  int v = 0;
  std::size_t flat = 0;

  static CoeffIndex from_flat(std::size_t flat);
  static CoeffIndex from_block(std::size_t block, int u, int v);
};

class DctImage {
 public:
  DctImage() = default;
  // All-zero coefficients for an image of the given pixel size (multiples of 8).
  DctImage(int origin_width, int origin_height);

  int blocks_x() const noexcept { return blocks_x_; }
  int blocks_y() const noexcept { return blocks_y_; }
  int origin_width() const noexcept { return blocks_x_ * kBlock; }
  int origin_height() const noexcept { return blocks_y_ * kBlock; }
  std::size_t block_count() const noexcept { return blocks_.size(); }
  std::size_t sample_count() const noexcept { return blocks_.size() * kBlockArea; }

  CoeffBlock& block(std::size_t b) { return blocks_[b]; }
  const CoeffBlock& block(std::size_t b) const { return blocks_[b]; }

  double& at(std::size_t b, int u, int v) { return blocks_[b][u * kBlock + v]; }
  double at(std::size_t b, int u, int v) const { return blocks_[b][u * kBlock + v]; }

  // Access by flat sample index (block-major, zigzag within a block).
  double& sample(std::size_t flat);
  double sample(std::size_t flat) const;

 private:
  int blocks_x_ = 0;
  int blocks_y_ = 0;
  std::vector<CoeffBlock> blocks_;
};

// Orthonormal 2-D DCT-II of each (pixel - 128) block.
DctImage forward_dct(const Pixmap& img);

// Single-block transforms on level-shifted samples (pixel - 128).
CoeffBlock forward_block(const std::array<double, kBlockArea>& pixels);
std::array<double, kBlockArea> inverse_block(const CoeffBlock& coeffs);

struct Reconstruction {
  Pixmap image;
  std::size_t clipped = 0;  // samples that fell outside [0, 255] before clipping
};

// Real-valued pixel plane (level shift restored, no rounding), row-major.
std::vector<double> inverse_dct_real(const DctImage& d);
// Rounds to nearest, clips to [0, 255] and counts clipped samples.
Reconstruction quantize(const std::vector<double>& plane, int width, int height);
Reconstruction inverse_dct(const DctImage& d);

// The twelve lowest-frequency AC positions: zigzag ranks 1..12.
std::vector<UV> embedding_band();
constexpr int kBandFirstRank = 1;
constexpr int kBandLastRank = 12;

}  // namespace bowslab
