#include "bowslab/ssw.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "bowslab/error.hpp"
#include "bowslab/rng.hpp"

namespace bowslab {

namespace {

constexpr std::size_t kBandPerBlock = kBandLastRank - kBandFirstRank + 1;

void validate(const WatermarkKey& key) {
  if (key.n_bits < 1 || key.n_bits > 65535) throw ValidationError("n_bits must be in [1, 65535]");
}

}  // namespace

KvRecord WatermarkKey::to_record() const {
  KvRecord rec;
  rec.set("format", "bowslab-key");
  rec.set("version", 1);
  rec.set("seed", seed);
  rec.set("n_bits", n_bits);
  rec.set("band", "zigzag-1-12");
  rec.set("band_version", kBandVersion);
  rec.set("interleaver", std::string(interleaved ? "on" : "off"));
  return rec;
}

WatermarkKey WatermarkKey::from_record(const KvRecord& rec) {
  if (rec.get("format") != "bowslab-key") throw FormatError(FormatError::Kind::BadRecord, "not a bowslab key file");
  if (rec.get_int("version") != 1) throw FormatError(FormatError::Kind::BadRecord, "unsupported key file version");
  if (rec.get_int("band_version") != kBandVersion)
    throw FormatError(FormatError::Kind::BadRecord, "unsupported band definition");
  WatermarkKey key;
  key.seed = rec.get_uint("seed");
  key.n_bits = static_cast<int>(rec.get_int("n_bits"));
  key.interleaved = rec.get_bool("interleaver");
  validate(key);
  return key;
}

void WatermarkKey::save(const std::filesystem::path& path) const {
  const auto body = to_record();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# bowslab watermark key\n" << body.to_string();
}

WatermarkKey WatermarkKey::load(const std::filesystem::path& path) { return from_record(KvRecord::load(path)); }

std::int8_t carrier(const WatermarkKey& key, std::size_t flat, int bit) {
  const CounterRng rng(derive_seed(key.seed, "carriers"));
  return rng.coin(static_cast<std::uint64_t>(flat) * 65536u + static_cast<std::uint64_t>(bit)) ? 1 : -1;
}

std::vector<std::int8_t> reference_message(const WatermarkKey& key) {
  validate(key);
  const CounterRng rng(derive_seed(key.seed, "message"));
  std::vector<std::int8_t> m(static_cast<std::size_t>(key.n_bits));
  for (std::size_t j = 0; j < m.size(); ++j) m[j] = rng.coin(j) ? 1 : -1;
  return m;
}

bool in_band(std::size_t flat) noexcept {
  const auto rank = flat % kBlockArea;
  return rank >= static_cast<std::size_t>(kBandFirstRank) && rank <= static_cast<std::size_t>(kBandLastRank);
}

KeyLayout::KeyLayout(const WatermarkKey& key, std::size_t block_count) : block_count_(block_count) {
  validate(key);
  const std::size_t band = block_count * kBandPerBlock;
  if (static_cast<std::size_t>(key.n_bits) > band) throw ValidationError("more message bits than band samples");

  flat_.resize(band);
  for (std::size_t r = 0; r < kBandPerBlock; ++r)
    for (std::size_t b = 0; b < block_count; ++b) flat_[r * block_count + b] = b * kBlockArea + kBandFirstRank + r;

  // slot[e] = position of band sample e in the (possibly permuted) TDMA order.
  std::vector<std::size_t> slot(band);
  std::iota(slot.begin(), slot.end(), std::size_t{0});
  if (key.interleaved) {
    RngStream rng(derive_seed(key.seed, "interleaver"));
    for (std::size_t i = band - 1; i > 0; --i) std::swap(slot[i], slot[rng.below(i + 1)]);
  }
  const auto n = static_cast<std::size_t>(key.n_bits);
  bit_.resize(band);
  for (std::size_t e = 0; e < band; ++e) bit_[e] = static_cast<std::uint32_t>(slot[e] * n / band);

  chip_.resize(band);
  for (std::size_t e = 0; e < band; ++e) chip_[e] = carrier(key, flat_[e], static_cast<int>(bit_[e]));
  message_ = reference_message(key);
}

const std::array<double, kBlockArea>& watson_table() {
  static const std::array<double, kBlockArea> table = {
      1.40, 1.01, 1.16, 1.66, 2.40,  3.43,  4.79,  6.56,   //
      1.01, 1.45, 1.32, 1.52, 2.00,  2.71,  3.67,  4.93,   //
      1.16, 1.32, 2.24, 2.59, 2.98,  3.64,  4.60,  5.88,   //
      1.66, 1.52, 2.59, 3.77, 4.55,  5.30,  6.28,  7.60,   //
      2.40, 2.00, 2.98, 4.55, 6.15,  7.46,  8.71,  10.17,  //
      3.43, 2.71, 3.64, 5.30, 7.46,  9.62,  11.58, 13.51,  //
      4.79, 3.67, 4.60, 6.28, 8.71,  11.58, 14.50, 17.29,  //
      6.56, 4.93, 5.88, 7.60, 10.17, 13.51, 17.29, 21.15,
  };
  return table;
}

std::vector<double> watson_slack(const DctImage& d) {
  // Luminance masking works on the un-shifted DC (8 x block mean), not the level-shifted one.
  constexpr double kDcShift = 128.0 * kBlock;
  const std::size_t nb = d.block_count();
  double dc_mean = 0.0;
  for (std::size_t b = 0; b < nb; ++b) dc_mean += d.at(b, 0, 0) + kDcShift;
  dc_mean /= static_cast<double>(nb);

  const auto& table = watson_table();
  std::vector<double> slack(d.sample_count());
  for (std::size_t b = 0; b < nb; ++b) {
    double ratio = dc_mean > 0.0 ? (d.at(b, 0, 0) + kDcShift) / dc_mean : 0.0;
    ratio = std::max(ratio, kLuminanceFloor);
    const double lum = std::pow(ratio, kLuminanceExponent);
    for (int u = 0; u < kBlock; ++u)
      for (int v = 0; v < kBlock; ++v) {
        const double t = table[u * kBlock + v] * lum;
        const double masked = std::pow(std::abs(d.at(b, u, v)), kContrastExponent) * std::pow(t, 1.0 - kContrastExponent);
        slack[CoeffIndex::from_block(b, u, v).flat] = std::max(t, masked);
      }
  }
  return slack;
}

EnergyProfile make_energy_profile(const DctImage& d, double k) {
  if (!(k > 0.0) || !std::isfinite(k)) throw ValidationError("energy scale k must be positive");
  EnergyProfile p{watson_slack(d)};
  for (std::size_t i = 0; i < p.a.size(); ++i) p.a[i] = in_band(i) ? k * p.a[i] : 0.0;
  return p;
}

DctImage embed(const DctImage& x, const WatermarkKey& key, const EnergyProfile& profile) {
  if (profile.a.size() != x.sample_count()) throw DimensionError("energy profile does not match image");
  const KeyLayout layout(key, x.block_count());
  DctImage y = x;
  const auto flat = layout.flat();
  const auto bit = layout.bit();
  const auto chip = layout.chip();
  const auto msg = layout.message();
  for (std::size_t e = 0; e < layout.band_size(); ++e)
    y.sample(flat[e]) += profile.a[flat[e]] * msg[bit[e]] * chip[e];
  return y;
}

std::vector<double> correlations(const DctImage& y, const WatermarkKey& key) {
  const KeyLayout layout(key, y.block_count());
  std::vector<double> corr(static_cast<std::size_t>(layout.n_bits()), 0.0);
  const auto flat = layout.flat();
  const auto bit = layout.bit();
  const auto chip = layout.chip();
  for (std::size_t e = 0; e < layout.band_size(); ++e) corr[bit[e]] += y.sample(flat[e]) * chip[e];
  return corr;
}

std::vector<std::int8_t> decode(const DctImage& y, const WatermarkKey& key) {
  const auto corr = correlations(y, key);
  std::vector<std::int8_t> bits(corr.size());
  for (std::size_t j = 0; j < corr.size(); ++j) bits[j] = corr[j] >= 0.0 ? 1 : -1;
  return bits;
}

bool detect(const Pixmap& img, const WatermarkKey& key) {
  const DctImage y = forward_dct(img);
  return decode(y, key) == reference_message(key);
}

Calibration calibrate_k(const DctImage& x, const WatermarkKey& key, double target_psnr_db, double tolerance_db) {
  if (!std::isfinite(target_psnr_db) || target_psnr_db <= 20.0)
    throw CalibrationError("target PSNR must be finite and above 20 dB");
  if (!(tolerance_db > 0.0)) throw ValidationError("calibration tolerance must be positive");
  constexpr int kMaxIterations = 64;

  const Pixmap original = inverse_dct(x).image;
  const auto slack = watson_slack(x);
  Calibration best;
  int iterations = 0;

  auto trial = [&](double k) {
    EnergyProfile p{slack};
    for (std::size_t i = 0; i < p.a.size(); ++i) p.a[i] = in_band(i) ? k * p.a[i] : 0.0;
    Calibration c;
    c.k = k;
    c.image = inverse_dct(embed(x, key, p)).image;
    c.quality = psnr(original, c.image);
    c.iterations = ++iterations;
    return c;
  };
  auto close_enough = [&](const Calibration& c) { return std::abs(c.quality.psnr_db - target_psnr_db) <= tolerance_db; };

  double lo = 0.0;
  double hi = 1.0;
  // Grow the bracket until the embedding is strong enough.
  while (true) {
    Calibration c = trial(hi);
    if (close_enough(c)) return c;
    if (c.quality.psnr_db < target_psnr_db) break;
    lo = hi;
    hi *= 2.0;
    if (iterations >= kMaxIterations) throw CalibrationError("target PSNR unreachable: embedding never strong enough");
  }
  while (iterations < kMaxIterations) {
    const double mid = 0.5 * (lo + hi);
    Calibration c = trial(mid);
    if (close_enough(c)) return c;
    (c.quality.psnr_db > target_psnr_db ? lo : hi) = mid;
  }
  throw CalibrationError("target PSNR not reached within " + std::to_string(kMaxIterations) + " iterations");
}

Calibration embed_at_psnr(const Pixmap& original, const WatermarkKey& key, double target_psnr_db) {
  return calibrate_k(forward_dct(original), key, target_psnr_db);
}

}  // namespace bowslab
