#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "bowslab/error.hpp"
#include "bowslab/fixtures.hpp"
#include "bowslab/rng.hpp"
#include "bowslab/ssw.hpp"
#include "test_support.hpp"

using namespace bowslab;

namespace {

std::vector<double> read_numbers(const std::string& name) {
  std::ifstream in(std::string(BOWSLAB_GOLDEN_DIR) + "/" + name);
  REQUIRE(in.good());
  std::vector<double> v;
  std::string tok;
  while (in >> tok) {
    if (tok[0] == '#') {
      std::getline(in, tok);
      continue;
    }
    v.push_back(std::stod(tok));
  }
  return v;
}

const WatermarkKey kKey{derive_seed(99, "ssw-test"), 64, true};

// Slack recomputed from the formula, one sample at a time, without the library's loop structure.
double oracle_slack(const DctImage& d, std::size_t block, int u, int v) {
  double mean = 0;
  for (std::size_t b = 0; b < d.block_count(); ++b) mean += d.at(b, 0, 0) + 1024.0;
  mean /= static_cast<double>(d.block_count());
  const double ratio = std::max(0.01, (d.at(block, 0, 0) + 1024.0) / mean);
  const double tl = watson_table()[u * 8 + v] * std::pow(ratio, 0.649);
  return std::max(tl, std::pow(std::abs(d.at(block, u, v)), 0.7) * std::pow(tl, 0.3));
}

}  // namespace

TEST_CASE("Watson table matches the golden file") {
  const auto golden = read_numbers("watson_table.txt");
  REQUIRE(golden.size() == 64);
  for (int i = 0; i < 64; ++i) CHECK(watson_table()[i] == golden[i]);
}

TEST_CASE("slack on a flat mid-gray image is the sensitivity table") {
  const auto s = watson_slack(forward_dct(Pixmap(16, 16, 128)));
  for (std::size_t b = 0; b < 4; ++b)
    for (int u = 0; u < 8; ++u)
      for (int v = 0; v < 8; ++v)
        CHECK(s[CoeffIndex::from_block(b, u, v).flat] == doctest::Approx(watson_table()[u * 8 + v]).epsilon(1e-12));
}

TEST_CASE("slack agrees with the formula oracle and is monotone in DC") {
  const DctImage d = forward_dct(fixture(1, 64));
  const auto s = watson_slack(d);
  for (std::size_t b = 0; b < d.block_count(); b += 7)
    for (int u = 0; u < 8; ++u)
      for (int v = 0; v < 8; ++v)
        CHECK(s[CoeffIndex::from_block(b, u, v).flat] == doctest::Approx(oracle_slack(d, b, u, v)).epsilon(1e-12));

  // Two identical blocks get identical slack; a brighter block gets at least as much.
  Pixmap img(16, 8, 100);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) img.at(8 + x, y) = 100;
  auto same = watson_slack(forward_dct(img));
  for (int i = 0; i < 64; ++i) CHECK(same[static_cast<std::size_t>(i)] == same[64 + static_cast<std::size_t>(i)]);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) img.at(8 + x, y) = 180;
  auto brighter = watson_slack(forward_dct(img));
  for (int i = 0; i < 64; ++i) CHECK(brighter[64 + static_cast<std::size_t>(i)] >= brighter[static_cast<std::size_t>(i)]);
}

TEST_CASE("energy profile: band-limited, linear in k, golden sum on fixture 0") {
  const DctImage d = forward_dct(fixture(0));
  const EnergyProfile p1 = make_energy_profile(d, 1.0);
  const EnergyProfile p2 = make_energy_profile(d, 2.0);
  double sum = 0;
  for (std::size_t i = 0; i < p1.a.size(); ++i) {
    if (!in_band(i)) CHECK(p1.a[i] == 0.0);
    CHECK(p2.a[i] == 2.0 * p1.a[i]);
    sum += p1.a[i];
  }
  const auto golden = read_numbers("fixture0_slack_sum.txt");
  REQUIRE(golden.size() == 1);
  CHECK(sum == doctest::Approx(golden[0]).epsilon(1e-9));
}

TEST_CASE("key layout: TDMA partition") {
  for (bool inter : {false, true}) {
    const WatermarkKey key{5, 64, inter};
    const KeyLayout layout(key, 4096);
    REQUIRE(layout.band_size() == 4096 * 12);
    std::vector<int> per_bit(64, 0);
    for (std::size_t e = 0; e < layout.band_size(); ++e) {
      CHECK(in_band(layout.flat()[e]));
      ++per_bit[layout.bit()[e]];
    }
    for (int c : per_bit) CHECK(c == 4096 * 12 / 64);
  }
  // Without the interleaver, bits own contiguous runs of the position-major band.
  const KeyLayout plain(WatermarkKey{5, 64, false}, 4096);
  for (std::size_t e = 1; e < plain.band_size(); ++e) CHECK(plain.bit()[e] >= plain.bit()[e - 1]);
  CHECK(plain.flat()[1] == 64 + 1);
}

TEST_CASE("carriers and message are deterministic and balanced") {
  const auto m1 = reference_message(kKey);
  CHECK(m1 == reference_message(kKey));
  CHECK(m1.size() == 64);
  int plus = 0;
  for (std::size_t i = 0; i < 20000; ++i) plus += carrier(kKey, i, 3) > 0;
  CHECK(std::abs(plus - 10000) < 5 * 71);  // 5 sigma of Binomial(20000, 1/2)
}

TEST_CASE("key file round trip") {
  testing::TempDir dir("ssw");
  const WatermarkKey key{123456789012345ull, 32, false};
  key.save(dir / "k.key");
  CHECK(WatermarkKey::load(dir / "k.key") == key);
  std::ofstream(dir / "bad.key") << "format=something-else\n";
  CHECK_THROWS_AS(WatermarkKey::load(dir / "bad.key"), FormatError);
}

TEST_CASE("embed: zero profile is the identity, message flips are local") {
  const DctImage x = forward_dct(fixture(2, 64));
  EnergyProfile zero{std::vector<double>(x.sample_count(), 0.0)};
  const DctImage y = embed(x, kKey, zero);
  for (std::size_t i = 0; i < x.sample_count(); ++i) CHECK(y.sample(i) == x.sample(i));

  // Watermark contributions y - x are +-a; their sign relative to the chip gives the bit.
  const EnergyProfile p = make_energy_profile(x, 1.0);
  const DctImage w = embed(x, kKey, p);
  const KeyLayout layout(kKey, x.block_count());
  for (std::size_t e = 0; e < layout.band_size(); ++e) {
    const std::size_t f = layout.flat()[e];
    const double delta = w.sample(f) - x.sample(f);
    CHECK(delta == doctest::Approx(p.a[f] * layout.message()[layout.bit()[e]] * layout.chip()[e]));
  }
}

TEST_CASE("decode round trip, scale invariance, detection") {
  const Pixmap x = fixture(3, 128);
  const Calibration c = embed_at_psnr(x, kKey);
  CHECK(c.quality.psnr_db >= 37.9);
  CHECK(c.quality.psnr_db <= 38.1);
  const DctImage y = forward_dct(c.image);
  CHECK(decode(y, kKey) == reference_message(kKey));

  DctImage scaled = y;
  for (std::size_t i = 0; i < scaled.sample_count(); ++i) scaled.sample(i) *= 2.0;
  CHECK(decode(scaled, kKey) == decode(y, kKey));

  CHECK(detect(c.image, kKey));
  CHECK_FALSE(detect(x, kKey));

  DctImage zeroed = y;
  for (std::size_t i = 0; i < zeroed.sample_count(); ++i)
    if (in_band(i)) zeroed.sample(i) = 0.0;
  CHECK_FALSE(detect(inverse_dct(zeroed).image, kKey));
}

TEST_CASE("decode on pure noise gives fair bits") {
  // 1000 independent noise images; each bit's +1 frequency must stay within 4.5 standard
  // errors (0.5 +- 0.0712) and the pooled frequency within 4.5 pooled standard errors.
  const int seeds = 1000;
  std::vector<int> plus(64, 0);
  for (int s = 0; s < seeds; ++s) {
    DctImage d(32, 32);
    const CounterRng g(derive_seed(77, static_cast<std::uint64_t>(s)));
    for (std::size_t i = 0; i < d.sample_count(); ++i) d.sample(i) = 10.0 * g.gaussian(i);
    const auto bits = decode(d, kKey);
    for (int j = 0; j < 64; ++j) plus[j] += bits[j] > 0;
  }
  int total = 0;
  for (int j = 0; j < 64; ++j) {
    CHECK(std::abs(plus[j] / double(seeds) - 0.5) < 4.5 * 0.5 / std::sqrt(seeds));
    total += plus[j];
  }
  CHECK(std::abs(total / (64.0 * seeds) - 0.5) < 4.5 * 0.5 / std::sqrt(64.0 * seeds));
}

TEST_CASE("calibrate_k: errors and monotonicity") {
  const DctImage x = forward_dct(fixture(4, 64));
  CHECK_THROWS_AS(calibrate_k(x, kKey, std::numeric_limits<double>::infinity()), CalibrationError);
  const double k38 = calibrate_k(x, kKey, 38.0).k;
  const double k42 = calibrate_k(x, kKey, 42.0).k;
  CHECK(k42 < k38);
}

TEST_CASE("validation") {
  CHECK_THROWS_AS(KeyLayout(WatermarkKey{1, 0, true}, 4), ValidationError);
  CHECK_THROWS_AS(KeyLayout(WatermarkKey{1, 64, true}, 1), ValidationError);
  CHECK_THROWS_AS(forward_dct(Pixmap(511, 512)), DimensionError);
}
