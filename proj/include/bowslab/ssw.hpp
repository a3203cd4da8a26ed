#pragma once

// Reference spread-spectrum watermark in the 8x8 block-DCT domain.
//
// Embedding: y[i] = x[i] + a[i] * m[j(i)] * G[i][j(i)] over the twelve-coefficient band,
// where j(i) assigns every band sample to exactly one message bit (TDMA). With the
// interleaver on, j(i) follows a keyed permutation of the band; with it off, bits own
// contiguous runs of the band enumerated position-major (all blocks of zigzag rank 1,
// then rank 2, ...).
//
// Detection is a decoder: "watermarked" iff every decoded bit equals the reference message.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bowslab/blockdct.hpp"
#include "bowslab/kvfile.hpp"
#include "bowslab/pixmap.hpp"

namespace bowslab {

struct WatermarkKey {
  static constexpr int kDefaultBits = 64;
  static constexpr int kBandVersion = 1;  // zigzag ranks 1..12

  std::uint64_t seed = 0;
  int n_bits = kDefaultBits;
  bool interleaved = true;

  KvRecord to_record() const;
  static WatermarkKey from_record(const KvRecord& rec);
  void save(const std::filesystem::path& path) const;
  static WatermarkKey load(const std::filesystem::path& path);

  friend bool operator==(const WatermarkKey&, const WatermarkKey&) = default;
};

// Carrier chip G[i][j] in {-1, +1}; defined for every flat sample i and bit j.
std::int8_t carrier(const WatermarkKey& key, std::size_t flat, int bit);
// Reference message in {-1, +1}^n_bits.
std::vector<std::int8_t> reference_message(const WatermarkKey& key);

// A key realized over a concrete block grid.
class KeyLayout {
 public:
  KeyLayout(const WatermarkKey& key, std::size_t block_count);

  std::size_t band_size() const noexcept { return flat_.size(); }
  std::size_t block_count() const noexcept { return block_count_; }
  int n_bits() const noexcept { return static_cast<int>(message_.size()); }

  // Indexed by band sample e (position-major enumeration).
  std::span<const std::size_t> flat() const noexcept { return flat_; }
  std::span<const std::uint32_t> bit() const noexcept { return bit_; }
  std::span<const std::int8_t> chip() const noexcept { return chip_; }
  std::span<const std::int8_t> message() const noexcept { return message_; }

 private:
  std::size_t block_count_;
  std::vector<std::size_t> flat_;
  std::vector<std::uint32_t> bit_;
  std::vector<std::int8_t> chip_;
  std::vector<std::int8_t> message_;
};

// True iff the flat sample lies in the embedding band.
bool in_band(std::size_t flat) noexcept;

// Per-sample embedding weight a[i], indexed by flat sample index; zero outside the band.
struct EnergyProfile {
  std::vector<double> a;
};

// Watson frequency-sensitivity table (JPEG DCT units), [u*8+v].
const std::array<double, kBlockArea>& watson_table();
constexpr double kLuminanceExponent = 0.649;
constexpr double kContrastExponent = 0.7;
constexpr double kLuminanceFloor = 0.01;

// Just-noticeable slack per coefficient, indexed by flat sample index.
std::vector<double> watson_slack(const DctImage& d);
EnergyProfile make_energy_profile(const DctImage& d, double k);

DctImage embed(const DctImage& x, const WatermarkKey& key, const EnergyProfile& profile);
// Per-bit correlation sum_i y[i] G[i][j].
std::vector<double> correlations(const DctImage& y, const WatermarkKey& key);
std::vector<std::int8_t> decode(const DctImage& y, const WatermarkKey& key);
bool detect(const Pixmap& img, const WatermarkKey& key);

struct Calibration {
  double k = 0.0;
  Pixmap image;
  QualityReport quality;
  int iterations = 0;
};

constexpr double kDefaultTargetPsnr = 38.0;
constexpr double kCalibrationTolerance = 0.1;

// Finds k such that psnr(original, embedded) is within tolerance of the target.
Calibration calibrate_k(const DctImage& x, const WatermarkKey& key, double target_psnr_db,
                        double tolerance_db = kCalibrationTolerance);

// forward_dct + calibrate_k in one call.
Calibration embed_at_psnr(const Pixmap& original, const WatermarkKey& key, double target_psnr_db = kDefaultTargetPsnr);

}  // namespace bowslab
