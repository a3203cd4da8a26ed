#include "bowslab/regsearch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>
#include <tuple>

#include "bowslab/error.hpp"
#include "bowslab/kvfile.hpp"

namespace bowslab {

bool lexicographically_less(const RegistrationParams& a, const RegistrationParams& b) {
  return std::tie(a.dx, a.dy, a.contrast, a.scale) < std::tie(b.dx, b.dy, b.contrast, b.scale);
}

std::string to_string(const RegistrationParams& p) {
  return "dx=" + std::to_string(p.dx) + " dy=" + std::to_string(p.dy) + " contrast=" + format_double(p.contrast) +
         " scale=" + format_double(p.scale);
}

std::vector<int> IntRange::values() const {
  std::vector<int> out;
  for (int v = lo; v <= hi; v += step) out.push_back(v);
  return out;
}

std::vector<double> RealRange::values() const {
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
  for (long k = 0; k < n; ++k) out.push_back(lo + static_cast<double>(k) * step);
  return out;
}

void SearchGrid::validate() const {
  if (dx.step <= 0 || dy.step <= 0 || !(contrast.step > 0) || !(scale.step > 0))
    throw ValidationError("search grid steps must be positive");
  if (dx.hi < dx.lo || dy.hi < dy.lo || contrast.hi < contrast.lo || scale.hi < scale.lo)
    throw ValidationError("search grid ranges must be nonempty");
  if (!(contrast.lo > 0) || !(scale.lo > 0)) throw ValidationError("contrast and scale must be positive");
  if (!(min_overlap > 0.0) || min_overlap > 1.0) throw ValidationError("min_overlap must be in (0, 1]");
}

std::size_t SearchGrid::cell_count() const {
  return dx.values().size() * dy.values().size() * contrast.values().size() * scale.values().size();
}

namespace {

template <class T>
void parse_axis(const std::string& text, T& lo, T& hi, T& step) {
  const auto dots = text.find("..");
  std::istringstream in;
  auto number = [](const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw ValidationError("bad number '" + s + "' in grid");
    return v;
  };
  try {
    if (dots == std::string::npos) {
      lo = hi = static_cast<T>(number(text));
      return;
    }
    const auto colon = text.find(':', dots);
    lo = static_cast<T>(number(text.substr(0, dots)));
    hi = static_cast<T>(number(text.substr(dots + 2, colon == std::string::npos ? std::string::npos : colon - dots - 2)));
    if (colon != std::string::npos) step = static_cast<T>(number(text.substr(colon + 1)));
  } catch (const std::invalid_argument&) {
    throw ValidationError("bad grid axis '" + text + "'");
  } catch (const std::out_of_range&) {
    throw ValidationError("bad grid axis '" + text + "'");
  }
}

}  // namespace

SearchGrid SearchGrid::parse(const std::string& spec) {
  SearchGrid g;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("grid item '" + item + "' lacks '='");
    const std::string name = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    if (name == "dx")
      parse_axis(value, g.dx.lo, g.dx.hi, g.dx.step);
    else if (name == "dy")
      parse_axis(value, g.dy.lo, g.dy.hi, g.dy.step);
    else if (name == "contrast")
      parse_axis(value, g.contrast.lo, g.contrast.hi, g.contrast.step);
    else if (name == "scale")
      parse_axis(value, g.scale.lo, g.scale.hi, g.scale.step);
    else if (name == "min_overlap")
      g.min_overlap = std::stod(value);
    else
      throw ValidationError("unknown grid axis '" + name + "'");
  }
  g.validate();
  return g;
}

std::string SearchGrid::to_string() const {
  auto real = [](const RealRange& r) {
    return format_double(r.lo) + ".." + format_double(r.hi) + ":" + format_double(r.step);
  };
  return "dx=" + std::to_string(dx.lo) + ".." + std::to_string(dx.hi) + ":" + std::to_string(dx.step) +
         ",dy=" + std::to_string(dy.lo) + ".." + std::to_string(dy.hi) + ":" + std::to_string(dy.step) +
         ",contrast=" + real(contrast) + ",scale=" + real(scale) + ",min_overlap=" + format_double(min_overlap);
}

namespace {

// Bilinear samples of src along the geometric part of the registration (no contrast).
struct Resampled {
  std::vector<double> value;
  std::vector<std::uint8_t> valid;
  std::size_t valid_count = 0;
};

Resampled resample(const Pixmap& src, int dx, int dy, double scale, int out_w, int out_h) {
  Resampled r;
  r.value.assign(static_cast<std::size_t>(out_w) * out_h, 0.0);
  r.valid.assign(r.value.size(), 0);
  const double max_x = src.width() - 1;
  const double max_y = src.height() - 1;
  for (int Y = 0; Y < out_h; ++Y) {
    const double sy = (Y - dy) / scale;
    if (sy < 0.0 || sy > max_y) continue;
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double fy = sy - y0;
    for (int X = 0; X < out_w; ++X) {
      const double sx = (X - dx) / scale;
      if (sx < 0.0 || sx > max_x) continue;
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double fx = sx - x0;
      const double top = src.at(x0, y0) * (1 - fx) + src.at(x1, y0) * fx;
      const double bottom = src.at(x0, y1) * (1 - fx) + src.at(x1, y1) * fx;
      const std::size_t i = static_cast<std::size_t>(Y) * out_w + X;
      r.value[i] = top * (1 - fy) + bottom * fy;
      r.valid[i] = 1;
      ++r.valid_count;
    }
  }
  return r;
}

inline double apply_contrast(double value, double contrast) {
  return std::clamp(std::nearbyint(contrast * value), 0.0, 255.0);
}

bool better(double psnr, const RegistrationParams& p, double best_psnr, const RegistrationParams& best) {
  if (psnr != best_psnr) return psnr > best_psnr;
  return lexicographically_less(p, best);
}

}  // namespace

Rendered render_candidate(const Pixmap& src, const RegistrationParams& p, int out_width, int out_height) {
  if (!(p.scale > 0) || !(p.contrast > 0)) throw ValidationError("scale and contrast must be positive");
  const Resampled r = resample(src, p.dx, p.dy, p.scale, out_width, out_height);
  if (r.valid_count == 0) throw DimensionError("registration leaves no overlap with the source");
  Rendered out{Pixmap(out_width, out_height), r.valid, r.valid_count};
  auto px = out.image.samples();
  for (std::size_t i = 0; i < r.value.size(); ++i)
    if (r.valid[i]) px[i] = static_cast<std::uint8_t>(apply_contrast(r.value[i], p.contrast));
  return out;
}

QualityReport masked_psnr(const Rendered& rendered, const Pixmap& target) {
  if (rendered.image.width() != target.width() || rendered.image.height() != target.height())
    throw DimensionError("masked_psnr: dimensions differ");
  if (rendered.valid_count == 0) throw DimensionError("masked_psnr: empty overlap");
  double sum = 0.0;
  const auto a = rendered.image.samples();
  const auto b = target.samples();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!rendered.valid[i]) continue;
    const double d = static_cast<double>(a[i]) - b[i];
    sum += d * d;
  }
  QualityReport q;
  q.sample_count = rendered.valid_count;
  q.mse = sum / static_cast<double>(rendered.valid_count);
  q.psnr_db = psnr_from_mse(q.mse);
  return q;
}

RegistrationResult grid_search(const Pixmap& candidate, const Pixmap& target, const SearchGrid& grid) {
  grid.validate();
  const auto dxs = grid.dx.values();
  const auto dys = grid.dy.values();
  const auto contrasts = grid.contrast.values();
  const auto scales = grid.scale.values();
  const std::size_t min_valid =
      static_cast<std::size_t>(std::ceil(grid.min_overlap * static_cast<double>(target.size())));

  struct Geometry {
    int dx, dy;
    double scale;
  };
  std::vector<Geometry> jobs;
  for (int dx : dxs)
    for (int dy : dys)
      for (double s : scales) jobs.push_back({dx, dy, s});

  struct Partial {
    bool any = false;
    RegistrationResult best;
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), static_cast<unsigned>(jobs.size())));
  std::vector<Partial> partial(workers);
  const auto t = target.samples();

  auto work = [&](unsigned w) {
    Partial& mine = partial[w];
    for (std::size_t j = w; j < jobs.size(); j += workers) {
      const Geometry& g = jobs[j];
      const Resampled r = resample(candidate, g.dx, g.dy, g.scale, target.width(), target.height());
      if (r.valid_count == 0 || r.valid_count < min_valid) continue;
      for (double c : contrasts) {
        double sum = 0.0;
        for (std::size_t i = 0; i < r.value.size(); ++i) {
          if (!r.valid[i]) continue;
          const double d = apply_contrast(r.value[i], c) - t[i];
          sum += d * d;
        }
        const double mse = sum / static_cast<double>(r.valid_count);
        const double p = psnr_from_mse(mse);
        const RegistrationParams params{g.dx, g.dy, c, g.scale};
        ++mine.best.cells_evaluated;
        if (!mine.any || better(p, params, mine.best.quality.psnr_db, mine.best.params)) {
          mine.any = true;
          mine.best.params = params;
          mine.best.quality = QualityReport{mse, p, r.valid_count};
        }
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }

  RegistrationResult result;
  bool any = false;
  for (const Partial& p : partial) {
    result.cells_evaluated += p.best.cells_evaluated;
    if (!p.any) continue;
    if (!any || better(p.best.quality.psnr_db, p.best.params, result.quality.psnr_db, result.params)) {
      result.params = p.best.params;
      result.quality = p.best.quality;
      any = true;
    }
  }
  if (!any) throw DimensionError("no grid cell overlaps the target sufficiently");
  return result;
}

RefineResult refine(const Pixmap& candidate, const Pixmap& target, const SearchGrid& coarse_grid,
                    const RegistrationResult& coarse, const RefineOptions& options) {
  if (options.rounds < 0 || options.radius < 1) throw ValidationError("refine: bad options");
  RefineResult out;
  out.best = coarse;
  out.round_psnr.push_back(coarse.quality.psnr_db);
  SearchGrid g = coarse_grid;
  for (int round = 0; round < options.rounds; ++round) {
    const RegistrationParams c = out.best.params;
    g.dx.step = std::max(1, g.dx.step / 2);
    g.dy.step = std::max(1, g.dy.step / 2);
    g.contrast.step /= 2;
    g.scale.step /= 2;
    g.dx.lo = c.dx - options.radius * g.dx.step;
    g.dx.hi = c.dx + options.radius * g.dx.step;
    g.dy.lo = c.dy - options.radius * g.dy.step;
    g.dy.hi = c.dy + options.radius * g.dy.step;
    // Keep the incumbent exactly on the grid so PSNR can never decrease.
    auto centre = [&](RealRange& r, double v) {
      int below = options.radius;
      while (below > 0 && v - below * r.step <= 0.0) --below;
      r.lo = v - below * r.step;
      r.hi = v + options.radius * r.step + r.step * 1e-6;
    };
    centre(g.contrast, c.contrast);
    centre(g.scale, c.scale);
    RegistrationResult r = grid_search(candidate, target, g);
    if (better(r.quality.psnr_db, r.params, out.best.quality.psnr_db, out.best.params)) {
      r.cells_evaluated += out.best.cells_evaluated;
      out.best = r;
    } else {
      out.best.cells_evaluated += r.cells_evaluated;
    }
    out.round_psnr.push_back(out.best.quality.psnr_db);
  }
  out.final_grid = g;
  return out;
}

}  // namespace bowslab
