#pragma once

// Original-recovery attack: align a candidate copy of the host (e.g. a scan of a
// published figure) to the watermarked image by exhaustive search over offset,
// contrast gain and spatial scale, maximizing PSNR over the overlap.

#include <cstdint>
#include <string>
#include <vector>

#include "bowslab/pixmap.hpp"

namespace bowslab {

struct RegistrationParams {
  int dx = 0;
  int dy = 0;
  double contrast = 1.0;
  double scale = 1.0;

  friend bool operator==(const RegistrationParams&, const RegistrationParams&) = default;
};

bool lexicographically_less(const RegistrationParams& a, const RegistrationParams& b);
std::string to_string(const RegistrationParams& p);

struct IntRange {
  int lo = 0;
  int hi = 0;
  int step = 1;
  std::vector<int> values() const;
};

struct RealRange {
  double lo = 1.0;
  double hi = 1.0;
  double step = 0.05;
  std::vector<double> values() const;
};

struct SearchGrid {
  IntRange dx;
  IntRange dy;
  RealRange contrast;
  RealRange scale;
  // Cells whose valid overlap covers less than this fraction of the target are skipped.
  double min_overlap = 0.25;

  void validate() const;
  std::size_t cell_count() const;
  // "dx=-8..8:1,dy=-8..8:1,contrast=0.8..1.2:0.05,scale=0.9..1.1:0.05"; unspecified axes stay fixed at identity.
  static SearchGrid parse(const std::string& spec);
  std::string to_string() const;
};

struct Rendered {
  Pixmap image;
  std::vector<std::uint8_t> valid;  // 1 where the pixel maps inside the source
  std::size_t valid_count = 0;
};

// Output pixel (X, Y) samples src bilinearly at ((X - dx) / scale, (Y - dy) / scale),
// multiplied by contrast, rounded and clipped. Invalid pixels are left at 0.
Rendered render_candidate(const Pixmap& src, const RegistrationParams& p, int out_width, int out_height);

// PSNR over the valid pixels of `rendered` against `target`.
QualityReport masked_psnr(const Rendered& rendered, const Pixmap& target);

struct RegistrationResult {
  RegistrationParams params;
  QualityReport quality;
  std::size_t cells_evaluated = 0;
};

RegistrationResult grid_search(const Pixmap& candidate, const Pixmap& target, const SearchGrid& grid);

struct RefineOptions {
  int rounds = 3;
  int radius = 2;  // half-steps explored on each side per axis
};

struct RefineResult {
  RegistrationResult best;
  std::vector<double> round_psnr;  // best PSNR after each round, round 0 = coarse
  SearchGrid final_grid;
};

// Halves the steps around the current best for a fixed number of rounds.
RefineResult refine(const Pixmap& candidate, const Pixmap& target, const SearchGrid& coarse_grid,
                    const RegistrationResult& coarse, const RefineOptions& options = {});

}  // namespace bowslab
