#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "densewarp/estimator.hpp"

namespace densewarp {

//! Pointwise sampling variance C_n of the fitted weight function, evaluated
//! at the recorded grid indices. Indices where the curvature estimate had to
//! be floored before inversion are listed in `floored`.
struct SandwichVariance {
  std::vector<std::size_t> indices;
  std::vector<double> values;
  std::vector<std::size_t> floored;
};

//! Plug-in sandwich variance (mean curvature)^-2 (score variance) / n of the
//! weight estimate, from localized hat-bump finite differences of the
//! per-unit losses around the fitted weight. Pass at_indices to restrict the
//! evaluation; the default covers the full grid.
SandwichVariance sandwich_variance(const WarpFit& fit,
                                   const RegressionData& data,
                                   std::span<const std::size_t> at_indices = {});

//! Pointwise confidence band; lower <= estimate <= upper at every recorded
//! index.
struct PointwiseCI {
  Grid grid;
  double level = 0.95;
  std::vector<std::size_t> indices;
  std::vector<double> estimate;
  std::vector<double> lower;
  std::vector<double> upper;
};

//! Normal-quantile band w_hat +/- z sqrt(C_n) for the weight function.
PointwiseCI ci_for_w(const WarpFit& fit, const SandwichVariance& variance,
                     double level = 0.95);

//! Band for the warp itself: the weight band's edge curves mapped through
//! the warp construction, enveloped pointwise. Needs a full-grid variance.
PointwiseCI ci_for_beta(const WarpFit& fit, const SandwichVariance& variance,
                        double level = 0.95);

//! Inverse standard normal CDF (Wichura's algorithm, double precision).
double normal_quantile(double p);

}  // namespace densewarp
