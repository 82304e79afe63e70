#include "densewarp/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace densewarp {

namespace {

void require_same_length(std::size_t grid_n, std::size_t values_n) {
  if (grid_n != values_n) {
    throw StructuralError("value vector has length " + std::to_string(values_n) +
                          " but the grid has " + std::to_string(grid_n) +
                          " points");
  }
}

}  // namespace

Grid::Grid(std::size_t n_points) {
  if (n_points < 2) {
    throw ConfigError("grid needs at least 2 points, got " +
                      std::to_string(n_points));
  }
  auto pts = std::make_shared<std::vector<double>>(n_points);
  const double h = 1.0 / static_cast<double>(n_points - 1);
  for (std::size_t i = 0; i < n_points; ++i) {
    (*pts)[i] = static_cast<double>(i) * h;
  }
  pts->back() = 1.0;
  points_ = std::move(pts);
  spacing_ = h;
}

GridDensity::GridDensity(Grid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  require_same_length(grid_.size(), values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double v = values_[i];
    if (!std::isfinite(v)) {
      throw StructuralError("density value at index " + std::to_string(i) +
                            " is not finite");
    }
    if (v < 0.0) {
      throw StructuralError("density value at index " + std::to_string(i) +
                            " is negative (" + std::to_string(v) + ")");
    }
  }
  const double mass = integrate(grid_, values_);
  if (std::abs(mass - 1.0) > kMassTolerance) {
    throw StructuralError("density integrates to " + std::to_string(mass) +
                          ", expected 1 within 1e-6");
  }
}

double integrate(const Grid& grid, std::span<const double> values) {
  require_same_length(grid.size(), values.size());
  const std::size_t n = values.size();
  double s = 0.5 * (values[0] + values[n - 1]);
  for (std::size_t i = 1; i + 1 < n; ++i) s += values[i];
  return s * grid.spacing();
}

double integrate(const GridDensity& f) { return integrate(f.grid(), f.values()); }

std::vector<double> cumulative_trapezoid(const Grid& grid,
                                         std::span<const double> values) {
  require_same_length(grid.size(), values.size());
  std::vector<double> out(values.size());
  out[0] = 0.0;
  const double half_h = 0.5 * grid.spacing();
  for (std::size_t i = 1; i < values.size(); ++i) {
    out[i] = out[i - 1] + half_h * (values[i - 1] + values[i]);
  }
  return out;
}

GridDensity normalize(const Grid& grid, std::vector<double> values) {
  require_same_length(grid.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    double& v = values[i];
    if (!std::isfinite(v)) {
      throw StructuralError("density value at index " + std::to_string(i) +
                            " is not finite");
    }
    if (v < 0.0) {
      // Arithmetic noise only; anything visibly negative is a real defect.
      if (v < -1e-9) {
        throw StructuralError("density value at index " + std::to_string(i) +
                              " is negative (" + std::to_string(v) + ")");
      }
      v = 0.0;
    }
  }
  const double mass = integrate(grid, values);
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw DegenerateInputError("density has no mass to normalize");
  }
  for (double& v : values) v /= mass;
  return GridDensity(grid, std::move(values));
}

GridDensity kde(const SampleSet& samples, const Grid& grid,
                std::optional<double> bandwidth) {
  const std::vector<double>& s = samples.samples;
  if (s.empty()) {
    throw DegenerateInputError("sample set '" + samples.unit_id + "' is empty");
  }
  double lo = s[0], hi = s[0];
  for (double x : s) {
    if (!std::isfinite(x)) {
      throw StructuralError("sample set '" + samples.unit_id +
                            "' contains a non-finite value");
    }
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  if (lo < 0.0 || hi > 1.0) {
    throw DomainError("sample set '" + samples.unit_id +
                      "' has values outside [0, 1]; rescale first");
  }
  if (hi - lo <= 0.0) {
    throw DegenerateInputError("sample set '" + samples.unit_id +
                               "' needs at least two distinct values");
  }

  const double m = static_cast<double>(s.size());
  double bw;
  if (bandwidth) {
    bw = *bandwidth;
    if (!(bw > 0.0) || !std::isfinite(bw)) {
      throw ConfigError("kde bandwidth must be positive");
    }
  } else {
    double mean = 0.0;
    for (double x : s) mean += x;
    mean /= m;
    double ss = 0.0;
    for (double x : s) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / std::max(m - 1.0, 1.0));
    bw = 1.06 * sd * std::pow(m, -0.2);
    bw = std::clamp(bw, 1e-3, 0.5);
  }

  const auto& pts = grid.points();
  std::vector<double> vals(grid.size(), 0.0);
  const double inv_bw = 1.0 / bw;
  for (double x : s) {
    // Reflect each sample across both boundaries so mass leaking past the
    // support folds back in.
    const double images[3] = {x, -x, 2.0 - x};
    for (std::size_t j = 0; j < pts.size(); ++j) {
      double acc = 0.0;
      for (double img : images) {
        const double z = (pts[j] - img) * inv_bw;
        acc += std::exp(-0.5 * z * z);
      }
      vals[j] += acc;
    }
  }
  // The Gaussian constant cancels in normalize(); skip it.
  return normalize(grid, std::move(vals));
}

std::pair<std::vector<double>, AffineMap> rescale_to_unit(
    std::span<const double> samples) {
  if (samples.empty()) {
    throw DegenerateInputError("cannot rescale an empty sample set");
  }
  double lo = samples[0], hi = samples[0];
  for (double x : samples) {
    if (!std::isfinite(x)) {
      throw StructuralError("sample contains a non-finite value");
    }
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  if (!(hi > lo)) {
    throw DegenerateInputError("samples are constant; no scale to map");
  }
  AffineMap map{lo, hi - lo};
  std::vector<double> out(samples.begin(), samples.end());
  for (double& x : out) x = map.apply(x);
  return {std::move(out), map};
}

std::vector<double> interp_density(const GridDensity& f,
                                   std::span<const double> query) {
  std::vector<double> out(query.size());
  for (std::size_t i = 0; i < query.size(); ++i) out[i] = interp_at(f, query[i]);
  return out;
}

double interp_at(const GridDensity& f, double x) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw DomainError("interpolation query " + std::to_string(x) +
                      " is outside [0, 1]");
  }
  const auto& v = f.values();
  const std::size_t n = v.size();
  const double pos = x * static_cast<double>(n - 1);
  std::size_t k = static_cast<std::size_t>(pos);
  if (k >= n - 1) k = n - 2;
  const double t = pos - static_cast<double>(k);
  return v[k] + t * (v[k + 1] - v[k]);
}

GridDensity beta_density(const Grid& grid, double a, double b) {
  if (!(a >= 1.0) || !(b >= 1.0)) {
    throw ConfigError("beta_density needs shape parameters >= 1; got a=" +
                      std::to_string(a) + ", b=" + std::to_string(b));
  }
  const auto& pts = grid.points();
  std::vector<double> vals(grid.size());
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double w = pts[i];
    const double left = (a == 1.0) ? 1.0 : std::pow(w, a - 1.0);
    const double right = (b == 1.0) ? 1.0 : std::pow(1.0 - w, b - 1.0);
    vals[i] = left * right;
  }
  return normalize(grid, std::move(vals));
}

}  // namespace densewarp
