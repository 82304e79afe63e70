#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "densewarp/grid.hpp"
#include "densewarp/rng.hpp"
#include "densewarp/sphere.hpp"
#include "densewarp/warping.hpp"

namespace testsupport {

//! Beta(a, b) pair with shape parameters drawn from [lo, hi]. Keeps both
//! shapes >= 2 so the densities vanish smoothly at the ends; exponents
//! below 1 would put a cusp at the boundary and inflate quadrature error.
inline std::pair<densewarp::GridDensity, densewarp::GridDensity>
random_beta_pair(const densewarp::Grid& grid, densewarp::Rng& rng,
                 double lo = 2.0, double hi = 6.0) {
  std::uniform_real_distribution<double> shape(lo, hi);
  auto f1 = densewarp::beta_density(grid, shape(rng), shape(rng));
  auto f2 = densewarp::beta_density(grid, shape(rng), shape(rng));
  return {f1, f2};
}

//! Random tangent vector at p: a fraction of the log map toward another
//! random density. Fractions in (0, 1] keep exp_map on the geodesic
//! segment, so the result stays a valid half density.
inline densewarp::TangentVector random_tangent(const densewarp::HalfDensity& p,
                                               densewarp::Rng& rng,
                                               double fraction = 0.5) {
  std::uniform_real_distribution<double> shape(2.0, 6.0);
  auto q = densewarp::srf(densewarp::beta_density(p.grid(), shape(rng), shape(rng)));
  auto v = densewarp::log_map(p, q);
  std::vector<double> scaled(v.values());
  for (double& x : scaled) x *= fraction;
  return densewarp::TangentVector(p, std::move(scaled));
}

//! Strictly convex warp used as a non-identity fixture.
inline densewarp::WarpingFunction convex_warp(const densewarp::Grid& grid,
                                              double weight = 1.5) {
  std::vector<double> w(grid.size(), weight);
  return densewarp::weight_to_warp(grid, w);
}

inline double max_abs_diff(const std::vector<double>& a,
                           const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i)
    m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace testsupport
