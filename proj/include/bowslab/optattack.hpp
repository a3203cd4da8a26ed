#pragma once

// Lagrangian worst-case SAWGN attack.
//
// Per sample the attacker picks a scale s >= 0 and a noise variance v >= 0 and
// receives y' = s * (y + z), z ~ N(0, v). The objective traded off per sample is
//
//   J = snr + lambda * D,   snr = a^2 / v (s > 0),  0 (s == 0)
//                           D   = y^2 (1 - s)^2 + s^2 v
//
// Three plan sources are provided:
//   ClosedForm - the closed-form scale/noise formulas with the erase rule a >= lambda^1.5 y^2;
//   Stationary - the stationary point of J (Wiener scale, erase when a >= sqrt(lambda) y^2);
//   BruteForce - grid search plus nested golden-section refinement of J; the ground truth.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bowslab/kvfile.hpp"
#include "bowslab/pixmap.hpp"
#include "bowslab/ssw.hpp"

namespace bowslab {

enum class PlanMode { Erase, ScaleAndNoise, Pass };
const char* to_string(PlanMode mode) noexcept;

struct SampleAttackPlan {
  PlanMode mode = PlanMode::Pass;
  double s = 1.0;
  double noise_var = 0.0;
  double snr = 0.0;
};

// +infinity when s > 0, noise_var == 0 and a > 0 (the watermark passes undamaged).
double objective(double y, double a, double s, double noise_var, double lambda);
double objective(double y, double a, const SampleAttackPlan& plan, double lambda);

SampleAttackPlan closed_form_plan(double y, double a, double lambda);
SampleAttackPlan stationary_plan(double y, double a, double lambda);
SampleAttackPlan brute_force_plan(double y, double a, double lambda);

// 0.5 * log2(1 + sum snr)
double capacity(std::span<const SampleAttackPlan> plans);

enum class PlanSource { ClosedForm, Stationary, BruteForce };
// How the closed-form scale treats the z^2 term: the planned variance or the drawn noise.
enum class ScaleReading { Variance, Realization };

const char* to_string(PlanSource source) noexcept;
const char* to_string(ScaleReading reading) noexcept;
PlanSource plan_source_from_string(const std::string& name);
ScaleReading scale_reading_from_string(const std::string& name);

struct AttackOptions {
  PlanSource source = PlanSource::ClosedForm;
  ScaleReading reading = ScaleReading::Variance;
};

struct AttackReport {
  double lambda = 0.0;
  double capacity_bits = 0.0;
  double distortion = 0.0;           // expected, summed over samples, squared DCT units
  double realized_distortion = 0.0;  // sum (y - y')^2 before requantization
  double realized_psnr_db = 0.0;
  std::optional<bool> detected_after;
  std::size_t erased = 0;
  std::size_t scaled = 0;
  std::size_t passed = 0;
  std::size_t clipped = 0;

  KvRecord to_record() const;
};

struct AttackResult {
  Pixmap image;
  AttackReport report;
};

SampleAttackPlan make_plan(PlanSource source, double y, double a, double lambda);

// Samples with zero estimated energy are passed through unchanged.
AttackResult attack_image(const Pixmap& img, const EnergyProfile& estimate, double lambda, std::uint64_t seed,
                          const AttackOptions& options = {});

using Detector = std::function<bool(const Pixmap&)>;

struct LambdaTrial {
  double lambda = 0.0;
  double psnr_db = 0.0;
  bool detected = true;
};

struct LambdaSearchOptions {
  double lambda_lo = 1e-8;  // strongest attack
  double lambda_hi = 1e4;   // weakest attack
  int iterations = 40;
  std::uint64_t seed = 0;
  AttackOptions attack;
};

struct LambdaSearchResult {
  bool found = false;
  double lambda = 0.0;
  Pixmap image;
  AttackReport report;
  std::vector<LambdaTrial> trace;
  std::string message;
};

// Bisection in log(lambda) for the highest-PSNR attacked image the detector misses.
LambdaSearchResult lambda_search(const Pixmap& img, const EnergyProfile& estimate, double psnr_floor_db,
                                 const Detector& detector, const LambdaSearchOptions& options = {});

}  // namespace bowslab
