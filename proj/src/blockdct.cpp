#include "bowslab/blockdct.hpp"

#include <cmath>
#include <numbers>

#include "bowslab/error.hpp"

namespace bowslab {

namespace {

struct ZigzagTables {
  std::array<int, kBlockArea> rank_of{};  // [u*8+v] -> rank
  std::array<UV, kBlockArea> pos_of{};    // rank -> (u,v)

  ZigzagTables() {
    int rank = 0;
    for (int s = 0; s < 2 * kBlock - 1; ++s) {
      // Even diagonals run bottom-left to top-right (u decreasing).
      if (s % 2 == 0) {
        for (int u = std::min(s, kBlock - 1); u >= 0 && s - u < kBlock; --u) add(u, s - u, rank);
      } else {
        for (int u = std::max(0, s - kBlock + 1); u <= s && u < kBlock; ++u) add(u, s - u, rank);
      }
    }
  }

  void add(int u, int v, int& rank) {
    rank_of[u * kBlock + v] = rank;
    pos_of[rank] = UV{u, v};
    ++rank;
  }
};

const ZigzagTables& zigzag() {
  static const ZigzagTables tables;
  return tables;
}

// basis[k][n] = alpha(k) cos((2n+1) k pi / 16)
struct Basis {
  std::array<std::array<double, kBlock>, kBlock> c{};
  Basis() {
    for (int k = 0; k < kBlock; ++k) {
      const double alpha = k == 0 ? std::sqrt(1.0 / kBlock) : std::sqrt(2.0 / kBlock);
      for (int n = 0; n < kBlock; ++n) c[k][n] = alpha * std::cos((2 * n + 1) * k * std::numbers::pi / (2.0 * kBlock));
    }
  }
};

const Basis& basis() {
  static const Basis b;
  return b;
}

}  // namespace

int zigzag_rank(int u, int v) {
  if (u < 0 || u >= kBlock || v < 0 || v >= kBlock) throw ValidationError("zigzag index out of range");
  return zigzag().rank_of[u * kBlock + v];
}

UV zigzag_position(int rank) {
  if (rank < 0 || rank >= kBlockArea) throw ValidationError("zigzag rank out of range");
  return zigzag().pos_of[rank];
}

CoeffIndex CoeffIndex::from_flat(std::size_t flat) {
  const UV p = zigzag_position(static_cast<int>(flat % kBlockArea));
  return CoeffIndex{flat / kBlockArea, p.u, p.v, flat};
}

CoeffIndex CoeffIndex::from_block(std::size_t block, int u, int v) {
  return CoeffIndex{block, u, v, block * kBlockArea + static_cast<std::size_t>(zigzag_rank(u, v))};
}

DctImage::DctImage(int origin_width, int origin_height) {
  if (origin_width <= 0 || origin_height <= 0 || origin_width % kBlock != 0 || origin_height % kBlock != 0)
    throw DimensionError("image dimensions must be positive multiples of 8, got " + std::to_string(origin_width) + "x" +
                         std::to_string(origin_height));
  blocks_x_ = origin_width / kBlock;
  blocks_y_ = origin_height / kBlock;
  blocks_.assign(static_cast<std::size_t>(blocks_x_) * blocks_y_, CoeffBlock{});
}

double& DctImage::sample(std::size_t flat) {
  const UV p = zigzag().pos_of[flat % kBlockArea];
  return blocks_[flat / kBlockArea][p.u * kBlock + p.v];
}

double DctImage::sample(std::size_t flat) const {
  const UV p = zigzag().pos_of[flat % kBlockArea];
  return blocks_[flat / kBlockArea][p.u * kBlock + p.v];
}

CoeffBlock forward_block(const std::array<double, kBlockArea>& pixels) {
  const auto& c = basis().c;
  std::array<double, kBlockArea> tmp{};
  // rows: tmp[y][v] = sum_x px[y][x] c[v][x]
  for (int y = 0; y < kBlock; ++y)
    for (int v = 0; v < kBlock; ++v) {
      double s = 0;
      for (int x = 0; x < kBlock; ++x) s += pixels[y * kBlock + x] * c[v][x];
      tmp[y * kBlock + v] = s;
    }
  CoeffBlock out{};
  for (int u = 0; u < kBlock; ++u)
    for (int v = 0; v < kBlock; ++v) {
      double s = 0;
      for (int y = 0; y < kBlock; ++y) s += c[u][y] * tmp[y * kBlock + v];
      out[u * kBlock + v] = s;
    }
  return out;
}

std::array<double, kBlockArea> inverse_block(const CoeffBlock& coeffs) {
  const auto& c = basis().c;
  std::array<double, kBlockArea> tmp{};
  for (int y = 0; y < kBlock; ++y)
    for (int v = 0; v < kBlock; ++v) {
      double s = 0;
      for (int u = 0; u < kBlock; ++u) s += c[u][y] * coeffs[u * kBlock + v];
      tmp[y * kBlock + v] = s;
    }
  std::array<double, kBlockArea> out{};
  for (int y = 0; y < kBlock; ++y)
    for (int x = 0; x < kBlock; ++x) {
      double s = 0;
      for (int v = 0; v < kBlock; ++v) s += tmp[y * kBlock + v] * c[v][x];
      out[y * kBlock + x] = s;
    }
  return out;
}

DctImage forward_dct(const Pixmap& img) {
  DctImage d(img.width(), img.height());
  std::array<double, kBlockArea> px{};
  for (int by = 0; by < d.blocks_y(); ++by)
    for (int bx = 0; bx < d.blocks_x(); ++bx) {
      for (int y = 0; y < kBlock; ++y)
        for (int x = 0; x < kBlock; ++x) px[y * kBlock + x] = img.at(bx * kBlock + x, by * kBlock + y) - 128.0;
      d.block(static_cast<std::size_t>(by) * d.blocks_x() + bx) = forward_block(px);
    }
  return d;
}

std::vector<double> inverse_dct_real(const DctImage& d) {
  const int w = d.origin_width();
  std::vector<double> plane(static_cast<std::size_t>(w) * d.origin_height());
  for (int by = 0; by < d.blocks_y(); ++by)
    for (int bx = 0; bx < d.blocks_x(); ++bx) {
      const auto px = inverse_block(d.block(static_cast<std::size_t>(by) * d.blocks_x() + bx));
      for (int y = 0; y < kBlock; ++y)
        for (int x = 0; x < kBlock; ++x)
          plane[static_cast<std::size_t>(by * kBlock + y) * w + bx * kBlock + x] = px[y * kBlock + x] + 128.0;
    }
  return plane;
}

Reconstruction quantize(const std::vector<double>& plane, int width, int height) {
  if (plane.size() != static_cast<std::size_t>(width) * height) throw DimensionError("plane size mismatch");
  Reconstruction r{Pixmap(width, height), 0};
  auto out = r.image.samples();
  for (std::size_t i = 0; i < plane.size(); ++i) {
    double v = std::nearbyint(plane[i]);
    if (v < 0.0) {
      v = 0.0;
      ++r.clipped;
    } else if (v > 255.0) {
      v = 255.0;
      ++r.clipped;
    }
    out[i] = static_cast<std::uint8_t>(v);
  }
  return r;
}

Reconstruction inverse_dct(const DctImage& d) {
  return quantize(inverse_dct_real(d), d.origin_width(), d.origin_height());
}

std::vector<UV> embedding_band() {
  std::vector<UV> band;
  for (int r = kBandFirstRank; r <= kBandLastRank; ++r) band.push_back(zigzag_position(r));
  return band;
}

}  // namespace bowslab
