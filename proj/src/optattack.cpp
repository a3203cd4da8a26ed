#include "bowslab/optattack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bowslab/blockdct.hpp"
#include "bowslab/error.hpp"
#include "bowslab/rng.hpp"

namespace bowslab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be positive and finite");
}

SampleAttackPlan erase_plan() { return SampleAttackPlan{PlanMode::Erase, 0.0, 0.0, 0.0}; }
SampleAttackPlan pass_plan() { return SampleAttackPlan{PlanMode::Pass, 1.0, 0.0, 0.0}; }

SampleAttackPlan classify(double a, double s, double v) {
  if (s == 0.0) return erase_plan();
  if (v == 0.0 && a == 0.0) return SampleAttackPlan{PlanMode::Pass, s, 0.0, 0.0};
  return SampleAttackPlan{PlanMode::ScaleAndNoise, s, v, v > 0.0 ? a * a / v : kInf};
}

// Minimizes f on [lo, hi]; returns the abscissa.
template <class F>
double golden_section(F&& f, double lo, double hi, int iterations) {
  constexpr double kInvPhi = 0.6180339887498949;
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int it = 0; it < iterations && hi - lo > 0.0; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = f(x2);
    }
  }
  return f1 <= f2 ? x1 : x2;
}

}  // namespace

const char* to_string(PlanMode mode) noexcept {
  switch (mode) {
    case PlanMode::Erase: return "erase";
    case PlanMode::ScaleAndNoise: return "scale_and_noise";
    case PlanMode::Pass: return "pass";
  }
  return "?";
}

const char* to_string(PlanSource source) noexcept {
  switch (source) {
    case PlanSource::ClosedForm: return "closed_form";
    case PlanSource::Stationary: return "stationary";
    case PlanSource::BruteForce: return "brute_force";
  }
  return "?";
}

const char* to_string(ScaleReading reading) noexcept {
  return reading == ScaleReading::Variance ? "variance" : "realization";
}

PlanSource plan_source_from_string(const std::string& text) {
  std::string name = text;
  std::replace(name.begin(), name.end(), '-', '_');
  if (name == "closed_form") return PlanSource::ClosedForm;
  if (name == "stationary") return PlanSource::Stationary;
  if (name == "brute_force") return PlanSource::BruteForce;
  throw ValidationError("unknown plan source '" + text + "'");
}

ScaleReading scale_reading_from_string(const std::string& name) {
  if (name == "variance") return ScaleReading::Variance;
  if (name == "realization") return ScaleReading::Realization;
  throw ValidationError("unknown scale reading '" + name + "'");
}

double objective(double y, double a, double s, double noise_var, double lambda) {
  if (s < 0.0 || noise_var < 0.0) throw ValidationError("objective: s and noise_var must be non-negative");
  double snr = 0.0;
  if (s > 0.0) {
    if (noise_var > 0.0)
      snr = a * a / noise_var;
    else if (a > 0.0)
      return kInf;
  }
  const double one_minus_s = 1.0 - s;
  return snr + lambda * (y * y * one_minus_s * one_minus_s + s * s * noise_var);
}

double objective(double y, double a, const SampleAttackPlan& plan, double lambda) {
  return objective(y, a, plan.s, plan.noise_var, lambda);
}

SampleAttackPlan closed_form_plan(double y, double a, double lambda) {
  require_lambda(lambda);
  if (a < 0.0) throw ValidationError("watermark energy must be non-negative");
  if (a == 0.0) return pass_plan();
  const double threshold = std::pow(lambda, 1.5) * y * y;
  // At equality the planned noise vanishes and the watermark would pass intact.
  if (a >= threshold) return erase_plan();
  const double v = a * (threshold - a) / threshold;
  const double s = lambda * y * y / (y * y + v);
  return SampleAttackPlan{PlanMode::ScaleAndNoise, s, v, a * a / v};
}

SampleAttackPlan stationary_plan(double y, double a, double lambda) {
  require_lambda(lambda);
  if (a < 0.0) throw ValidationError("watermark energy must be non-negative");
  if (a == 0.0) return pass_plan();
  const double threshold = std::sqrt(lambda) * y * y;
  if (a >= threshold) return erase_plan();
  const double v = a * y * y / (threshold - a);
  const double s = 1.0 - a / threshold;
  return SampleAttackPlan{PlanMode::ScaleAndNoise, s, v, a * a / v};
}

SampleAttackPlan brute_force_plan(double y, double a, double lambda) {
  require_lambda(lambda);
  if (a < 0.0) throw ValidationError("watermark energy must be non-negative");
  constexpr int kScaleSteps = 200;     // s grid on [0, 2]
  constexpr int kVarianceSteps = 96;   // log grid, half a decade per step
  constexpr double kDecades = 24.0;
  constexpr int kGolden = 90;

  auto J = [&](double s, double v) { return objective(y, a, s, v, lambda); };

  // Noise variances that can matter are bracketed around the natural scale of the sample.
  const double scale = std::max({y * y, a, 1.0});
  const double log_lo = std::log(scale) - kDecades / 2 * std::log(10.0);
  const double log_hi = std::log(scale) + kDecades / 2 * std::log(10.0);
  auto var_at = [&](int k) { return std::exp(log_lo + (log_hi - log_lo) * k / kVarianceSteps); };

  double best_s = 0.0;
  double best_v = 0.0;
  double best_j = J(0.0, 0.0);
  int best_k = -1;  // -1: v == 0
  for (int i = 1; i <= kScaleSteps; ++i) {
    const double s = 2.0 * i / kScaleSteps;
    for (int k = -1; k <= kVarianceSteps; ++k) {
      const double v = k < 0 ? 0.0 : var_at(k);
      const double j = J(s, v);
      if (j < best_j) {
        best_j = j;
        best_s = s;
        best_v = v;
        best_k = k;
      }
    }
  }
  if (best_s == 0.0) return erase_plan();

  // Local refinement: golden section on s, with the best v for each s found by an inner
  // golden section on log v (or v == 0 when the grid optimum sat there).
  // The coarse v grid can pull the grid optimum several s steps away, so the bracket is wide.
  const double ds = 20.0 / kScaleSteps;
  const double s_lo = std::max(best_s - ds, 0.0);
  const double s_hi = std::min(best_s + ds, 2.0);
  const double lv_lo = best_k < 0 ? 0.0 : std::log(best_v) - 3.0 * std::log(10.0);
  const double lv_hi = best_k < 0 ? 0.0 : std::log(best_v) + 3.0 * std::log(10.0);

  auto inner = [&](double s) -> std::pair<double, double> {
    if (best_k < 0) return {0.0, J(s, 0.0)};
    const double lv = golden_section([&](double t) { return J(s, std::exp(t)); }, lv_lo, lv_hi, kGolden);
    return {std::exp(lv), J(s, std::exp(lv))};
  };
  const double s_ref = golden_section([&](double s) { return s <= 0.0 ? J(0.0, 0.0) : inner(s).second; },
                                      s_lo, s_hi, kGolden);
  if (s_ref > 0.0) {
    const auto [v_ref, j_ref] = inner(s_ref);
    if (j_ref < best_j) {
      best_j = j_ref;
      best_s = s_ref;
      best_v = v_ref;
    }
  }
  if (J(0.0, 0.0) <= best_j) return erase_plan();
  return classify(a, best_s, best_v);
}

double capacity(std::span<const SampleAttackPlan> plans) {
  double total = 0.0;
  for (const auto& p : plans) total += p.snr;
  return 0.5 * std::log2(1.0 + total);
}

SampleAttackPlan make_plan(PlanSource source, double y, double a, double lambda) {
  switch (source) {
    case PlanSource::ClosedForm: return closed_form_plan(y, a, lambda);
    case PlanSource::Stationary: return stationary_plan(y, a, lambda);
    case PlanSource::BruteForce: return brute_force_plan(y, a, lambda);
  }
  throw ValidationError("unknown plan source");
}

KvRecord AttackReport::to_record() const {
  KvRecord rec;
  rec.set("lambda", lambda);
  rec.set("psnr_db", realized_psnr_db);
  rec.set("capacity_bits", capacity_bits);
  rec.set("distortion", distortion);
  rec.set("realized_distortion", realized_distortion);
  if (detected_after) rec.set("detected_after", *detected_after);
  rec.set("samples_erased", static_cast<std::uint64_t>(erased));
  rec.set("samples_scaled", static_cast<std::uint64_t>(scaled));
  rec.set("samples_passed", static_cast<std::uint64_t>(passed));
  rec.set("pixels_clipped", static_cast<std::uint64_t>(clipped));
  return rec;
}

AttackResult attack_image(const Pixmap& img, const EnergyProfile& estimate, double lambda, std::uint64_t seed,
                          const AttackOptions& options) {
  require_lambda(lambda);
  DctImage y = forward_dct(img);
  if (estimate.a.size() != y.sample_count()) throw DimensionError("energy estimate does not match image");
  const CounterRng noise(derive_seed(seed, "sawgn"));

  AttackReport report;
  report.lambda = lambda;
  double snr_total = 0.0;
  for (std::size_t i = 0; i < y.sample_count(); ++i) {
    const double a = estimate.a[i];
    if (a == 0.0) {
      ++report.passed;
      continue;
    }
    const double yi = y.sample(i);
    const SampleAttackPlan plan = make_plan(options.source, yi, a, lambda);
    double out = yi;
    switch (plan.mode) {
      case PlanMode::Pass:
        ++report.passed;
        out = plan.s * yi;
        break;
      case PlanMode::Erase:
        ++report.erased;
        out = 0.0;
        break;
      case PlanMode::ScaleAndNoise: {
        ++report.scaled;
        const double z = std::sqrt(plan.noise_var) * noise.gaussian(i);
        double s = plan.s;
        if (options.source == PlanSource::ClosedForm && options.reading == ScaleReading::Realization)
          s = lambda * yi * yi / (yi * yi + z * z);
        out = s * (yi + z);
        break;
      }
    }
    snr_total += plan.snr;
    report.distortion += yi * yi * (1 - plan.s) * (1 - plan.s) + plan.s * plan.s * plan.noise_var;
    report.realized_distortion += (yi - out) * (yi - out);
    y.sample(i) = out;
  }
  report.capacity_bits = 0.5 * std::log2(1.0 + snr_total);
  Reconstruction rec = inverse_dct(y);
  report.clipped = rec.clipped;
  report.realized_psnr_db = psnr(img, rec.image).psnr_db;
  return AttackResult{std::move(rec.image), report};
}

LambdaSearchResult lambda_search(const Pixmap& img, const EnergyProfile& estimate, double psnr_floor_db,
                                 const Detector& detector, const LambdaSearchOptions& options) {
  if (!(psnr_floor_db >= 30.0)) throw ValidationError("PSNR floor must be at least 30 dB");
  if (!(options.lambda_lo > 0.0) || !(options.lambda_hi > options.lambda_lo))
    throw ValidationError("lambda bracket must satisfy 0 < lo < hi");

  LambdaSearchResult result;
  auto evaluate = [&](double lambda) {
    AttackResult r = attack_image(img, estimate, lambda, options.seed, options.attack);
    const bool detected = detector(r.image);
    r.report.detected_after = detected;
    result.trace.push_back(LambdaTrial{lambda, r.report.realized_psnr_db, detected});
    if (!detected && r.report.realized_psnr_db >= psnr_floor_db &&
        (!result.found || r.report.realized_psnr_db > result.report.realized_psnr_db)) {
      result.found = true;
      result.lambda = lambda;
      result.image = std::move(r.image);
      result.report = r.report;
    }
    return detected;
  };

  double lo = options.lambda_lo;
  double hi = options.lambda_hi;
  if (!evaluate(hi)) {
    result.message = result.found ? "weakest attack in bracket already defeats the detector"
                                  : "weakest attack in bracket is below the PSNR floor";
    if (result.found) return result;
  }
  if (evaluate(lo)) {
    result.message = "detector survives the strongest attack in the bracket";
    return result;
  }
  for (int it = 0; it < options.iterations; ++it) {
    const double mid = std::sqrt(lo * hi);
    (evaluate(mid) ? hi : lo) = mid;
  }
  if (!result.found)
    result.message = "no undetected attack at or above the PSNR floor";
  else
    result.message = "ok";
  return result;
}

}  // namespace bowslab
