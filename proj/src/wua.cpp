#include "bowslab/wua.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bowslab/error.hpp"
#include "bowslab/rng.hpp"

namespace bowslab {

std::vector<UV> default_shuffle_positions() {
  return {{0, 1}, {1, 0}, {1, 1}, {2, 0}, {2, 1}, {1, 2}, {2, 2}, {0, 2}};
}

void WuaParams::validate() const {
  if (zero_threshold < 0 || zero_threshold > 64) throw ValidationError("zero threshold must be in [0, 64]");
  if (window < 0) throw ValidationError("shuffle window must be non-negative");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ValidationError("noise sigma must be non-negative");
  for (const UV& p : shuffle_positions) {
    if (p.u < 0 || p.u >= kBlock || p.v < 0 || p.v >= kBlock) throw ValidationError("shuffle position out of range");
    if (p.u == 0 && p.v == 0) throw ValidationError("the DC coefficient cannot be shuffled");
  }
}

std::string format_positions(const std::vector<UV>& positions) {
  std::string out;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(positions[i].u) + "," + std::to_string(positions[i].v);
  }
  return out;
}

std::vector<UV> parse_positions(const std::string& text) {
  std::vector<UV> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    UV p;
    char comma = 0;
    std::istringstream is(item);
    if (!(is >> p.u >> comma >> p.v) || comma != ',' || !(is >> std::ws).eof())
      throw ValidationError("bad coefficient position '" + item + "' (expected u,v)");
    if (p.u < 0 || p.u >= kBlock || p.v < 0 || p.v >= kBlock) throw ValidationError("position out of range: " + item);
    out.push_back(p);
  }
  return out;
}

KvRecord WuaParams::to_record() const {
  KvRecord rec;
  rec.set("zero_threshold", zero_threshold);
  rec.set("shuffle_positions", format_positions(shuffle_positions));
  rec.set("window", window);
  rec.set("seed", seed);
  rec.set("noise_sigma", noise_sigma);
  return rec;
}

WuaParams WuaParams::from_record(const KvRecord& rec) {
  WuaParams p;
  if (rec.has("zero_threshold")) p.zero_threshold = static_cast<int>(rec.get_int("zero_threshold"));
  if (rec.has("shuffle_positions")) p.shuffle_positions = parse_positions(rec.get("shuffle_positions"));
  if (rec.has("window")) p.window = static_cast<int>(rec.get_int("window"));
  if (rec.has("seed")) p.seed = rec.get_uint("seed");
  if (rec.has("noise_sigma")) p.noise_sigma = rec.get_double("noise_sigma");
  p.validate();
  return p;
}

DctImage zero_highfreq(const DctImage& d, int threshold) {
  if (threshold < 0 || threshold > 64) throw ValidationError("zero threshold must be in [0, 64]");
  DctImage out = d;
  for (std::size_t b = 0; b < out.block_count(); ++b)
    for (int r = std::max(threshold + 1, 1); r < kBlockArea; ++r) {
      const UV p = zigzag_position(r);
      out.at(b, p.u, p.v) = 0.0;
    }
  return out;
}

std::vector<std::size_t> windowed_shuffle_permutation(const std::vector<double>& values, int window,
                                                      std::uint64_t stream_key) {
  const std::size_t n = values.size();
  // Sorted order: ascending value, ties by block index.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });

  // One left-to-right pass over sorted ranks. The element at rank r swaps with a uniformly
  // chosen rank in [r, r + A]; an element already carried forward is not carried again, so
  // no element ends up more than A ranks from where it started.
  std::vector<std::size_t> slots = order;  // slots[r] = block currently at sorted rank r
  std::vector<char> carried(n, 0);
  if (window > 0) {
    RngStream rng(stream_key);
    for (std::size_t r = 0; r + 1 < n; ++r) {
      if (carried[r]) continue;
      const std::size_t span = std::min<std::size_t>(static_cast<std::size_t>(window), n - 1 - r);
      const std::size_t target = r + rng.below(span + 1);
      if (target == r) continue;
      std::swap(slots[r], slots[target]);
      carried[target] = 1;
    }
  }
  // The block that held sorted rank r now receives the value of slots[r].
  std::vector<std::size_t> perm(n);
  for (std::size_t r = 0; r < n; ++r) perm[order[r]] = slots[r];
  return perm;
}

DctImage shuffle_coefficients(const DctImage& d, const std::vector<UV>& positions, int window, std::uint64_t seed) {
  if (window < 0) throw ValidationError("shuffle window must be non-negative");
  DctImage out = d;
  const std::size_t nb = d.block_count();
  std::vector<double> values(nb);
  for (const UV& p : positions) {
    if (p.u < 0 || p.u >= kBlock || p.v < 0 || p.v >= kBlock) throw ValidationError("shuffle position out of range");
    for (std::size_t b = 0; b < nb; ++b) values[b] = d.at(b, p.u, p.v);
    const auto perm = windowed_shuffle_permutation(
        values, window, derive_seed(derive_seed(seed, "wua.shuffle"), static_cast<std::uint64_t>(p.u), static_cast<std::uint64_t>(p.v)));
    for (std::size_t b = 0; b < nb; ++b) out.at(b, p.u, p.v) = values[perm[b]];
  }
  return out;
}

Pixmap wua_attack(const Pixmap& img, const WuaParams& params) {
  params.validate();
  DctImage d = forward_dct(img);
  d = zero_highfreq(d, params.zero_threshold);
  d = shuffle_coefficients(d, params.shuffle_positions, params.window, params.seed);
  std::vector<double> plane = inverse_dct_real(d);
  if (params.noise_sigma > 0.0) {
    const CounterRng rng(derive_seed(params.seed, "wua.noise"));
    for (std::size_t i = 0; i < plane.size(); ++i) plane[i] += params.noise_sigma * rng.gaussian(i);
  }
  return quantize(plane, img.width(), img.height()).image;
}

Pixmap focused_attack(const Pixmap& img, const std::vector<UV>& positions, double noise_sigma, std::uint64_t seed) {
  if (positions.empty()) throw ValidationError("focused attack needs at least one position");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ValidationError("noise sigma must be non-negative");
  DctImage d = forward_dct(img);
  const CounterRng rng(derive_seed(seed, "focused"));
  for (std::size_t b = 0; b < d.block_count(); ++b)
    for (const UV& p : positions) {
      const auto flat = CoeffIndex::from_block(b, p.u, p.v).flat;
      d.at(b, p.u, p.v) += noise_sigma * rng.gaussian(flat);
    }
  return inverse_dct(d).image;
}

std::vector<std::uint64_t> sweep_seeds(std::uint64_t base_seed, int count) {
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < count; ++i) seeds.push_back(derive_seed(derive_seed(base_seed, "wua.sweep"), static_cast<std::uint64_t>(i)));
  return seeds;
}

}  // namespace bowslab
