#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "densewarp/grid.hpp"

namespace densewarp {

//! Square-root representation p = sqrt(f) of a density, a point on the unit
//! sphere of L2[0, 1] with nonnegative values. The constructor renormalizes
//! to exactly unit norm and clamps arithmetic-noise negatives (L2 mass up to
//! 1e-6); larger negative mass is rejected.
class HalfDensity {
 public:
  HalfDensity(Grid grid, std::vector<double> values);

  const Grid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

 private:
  Grid grid_;
  std::vector<double> values_;
};

//! Element of the tangent space at a base point: same grid, orthogonal to
//! the base under the L2 inner product.
class TangentVector {
 public:
  TangentVector(HalfDensity base, std::vector<double> values);

  const HalfDensity& base() const { return base_; }
  const Grid& grid() const { return base_.grid(); }
  const std::vector<double>& values() const { return values_; }
  double norm() const;

 private:
  HalfDensity base_;
  std::vector<double> values_;
};

//! L2 inner product under the grid quadrature.
double inner(const Grid& grid, std::span<const double> a,
             std::span<const double> b);
double norm_l2(const Grid& grid, std::span<const double> a);

//! f -> sqrt(f) with the density floor applied under the root.
HalfDensity srf(const GridDensity& f);

//! p -> p^2, renormalized back to unit mass.
GridDensity srf_inverse(const HalfDensity& p);

//! Great-circle exponential map cos(|v|) p + sin(|v|) v/|v|, renormalized.
//! Steps of length >= pi leave the injectivity radius and are rejected.
HalfDensity exp_map(const TangentVector& v);

//! Inverse of exp_map: the tangent vector at p pointing to q with norm equal
//! to the arc length between them.
TangentVector log_map(const HalfDensity& p, const HalfDensity& q);

//! Point at parameter tau on the constant-speed geodesic from f1 to f2,
//! returned as a density. tau must lie in [0, 1].
GridDensity geodesic(const GridDensity& f1, const GridDensity& f2, double tau);

//! Parallel transport of v from the tangent space at its base to p2 along
//! the connecting geodesic.
TangentVector parallel_transport(const TangentVector& v, const HalfDensity& p2);

//! Affinity integral of sqrt(f1 f2), clamped to [0, 1].
double bhattacharyya(const GridDensity& f1, const GridDensity& f2);

//! Hellinger distance sqrt(1 - BC). Squared, this is half the squared L2
//! distance between the half densities.
double hellinger(const GridDensity& f1, const GridDensity& f2);

//! Arc length arccos(BC) between the half densities on the sphere.
double fisher_rao_distance(const GridDensity& f1, const GridDensity& f2);

//! 2-Wasserstein distance on [0, 1] via quantile functions: CDFs by running
//! trapezoid sums, inverted at n_quantiles midpoint levels.
double wasserstein_1d(const GridDensity& f1, const GridDensity& f2,
                      std::size_t n_quantiles = 1000);

//! Kullback-Leibler divergence of f1 from f2, integrated exactly for the
//! piecewise-linear density model (a plain trapezoid sum cannot handle the
//! log singularity where f2 reaches the floor).
double kl_divergence(const GridDensity& f1, const GridDensity& f2);

//! Information-metric inner product of two perturbations at f:
//! integral of v1 v2 / f with the density floor applied.
double fisher_rao_inner(const GridDensity& f, std::span<const double> v1,
                        std::span<const double> v2);

}  // namespace densewarp
