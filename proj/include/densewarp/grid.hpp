#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "densewarp/errors.hpp"

namespace densewarp {

//! Density values below this floor are lifted before any square root is
//! taken, so that half densities stay differentiable at zeros of f.
inline constexpr double kDensityFloor = 1e-10;

//! Quadrature slack allowed on unit-mass and unit-norm invariants.
inline constexpr double kMassTolerance = 1e-6;

//! Uniform grid on [0, 1]. Cheap to copy; all densities, warps and tangent
//! vectors in one analysis share a single grid.
class Grid {
 public:
  explicit Grid(std::size_t n_points = 1001);

  std::size_t size() const { return points_->size(); }
  double spacing() const { return spacing_; }
  const std::vector<double>& points() const { return *points_; }
  double operator[](std::size_t i) const { return (*points_)[i]; }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.size() == b.size();
  }

 private:
  std::shared_ptr<const std::vector<double>> points_;
  double spacing_;
};

//! A probability density sampled on a shared grid. The constructor validates
//! nonnegativity and unit mass under trapezoid quadrature; use normalize()
//! to build one from raw nonnegative values.
class GridDensity {
 public:
  GridDensity(Grid grid, std::vector<double> values);

  const Grid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

 private:
  Grid grid_;
  std::vector<double> values_;
};

enum class VariableTag { f, g };

//! Raw observations for one unit and one side of the regression.
struct SampleSet {
  std::string unit_id;
  VariableTag tag = VariableTag::f;
  std::vector<double> samples;
};

//! Affine map recorded by rescale_to_unit so results can be mapped back to
//! the original support.
struct AffineMap {
  double offset = 0.0;
  double scale = 1.0;

  double apply(double x) const { return (x - offset) / scale; }
  double invert(double y) const { return offset + scale * y; }
};

//! Composite trapezoid quadrature of values over the grid.
double integrate(const Grid& grid, std::span<const double> values);
double integrate(const GridDensity& f);

//! Running trapezoid integral; result[0] = 0 and result.back() equals
//! integrate(grid, values).
std::vector<double> cumulative_trapezoid(const Grid& grid,
                                         std::span<const double> values);

//! Clamp negligible negative values to zero and divide by the trapezoid mass.
GridDensity normalize(const Grid& grid, std::vector<double> values);

//! Gaussian kernel density estimate with boundary reflection at 0 and 1.
//! Bandwidth defaults to the 1.06 sigma m^(-1/5) rule clamped to
//! [1e-3, 0.5]; pass a value to override.
GridDensity kde(const SampleSet& samples, const Grid& grid,
                std::optional<double> bandwidth = std::nullopt);

//! Map samples affinely onto [0, 1]; the returned map inverts the rescale.
std::pair<std::vector<double>, AffineMap> rescale_to_unit(
    std::span<const double> samples);

//! Piecewise-linear interpolation of a density at query points in [0, 1].
std::vector<double> interp_density(const GridDensity& f,
                                   std::span<const double> query);
double interp_at(const GridDensity& f, double x);

//! Beta(a, b) density on the grid, normalized under the grid quadrature.
//! Shapes below 1 put a pole at the boundary and are rejected.
GridDensity beta_density(const Grid& grid, double a, double b);

}  // namespace densewarp
