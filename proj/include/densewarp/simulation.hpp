#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "densewarp/estimator.hpp"
#include "densewarp/grid.hpp"
#include "densewarp/rng.hpp"
#include "densewarp/sphere.hpp"
#include "densewarp/warping.hpp"

namespace densewarp {

//! Fit settings used inside the replication harness: fixed small penalty
//! and a gradient tolerance the backtracking descent actually reaches, so
//! replications converge in seconds without a cross-validation sweep.
FitConfig sim_fit_config();

//! One replication study. m1/m2 = 0 fits from the true densities; positive
//! values draw that many observations per unit and fit from kernel
//! estimates. The true warp defaults to the constant-weight warp built from
//! true_weight; predictor_jitter > 0 perturbs the Beta shapes per unit.
struct SimConfig {
  Grid grid = Grid(1001);
  std::size_t n = 100;
  std::size_t m1 = 0;
  std::size_t m2 = 0;
  double noise_halfwidth = 0.1;
  double predictor_a = 2.0;
  double predictor_b = 5.0;
  double predictor_jitter = 0.0;
  double true_weight = 1.5;
  std::optional<WarpingFunction> true_beta;
  std::size_t replications = 50;
  std::uint64_t seed = 1;
  FitConfig fit_config = sim_fit_config();
};

struct GeneratedPair {
  GridDensity f;
  GridDensity g;
  double multiplier = 0.0;
};

struct ReplicationRecord {
  std::size_t index = 0;
  double warp_distance = 0.0;
  double mean_hellinger = 0.0;
  double mean_hellinger_baseline = 0.0;
  bool converged = false;
  bool failed = false;
  std::string message;
};

struct SimResult {
  double mean_warp_distance = 0.0;
  double se_warp_distance = 0.0;
  double mean_hellinger = 0.0;
  double se_hellinger = 0.0;
  double mean_hellinger_baseline = 0.0;
  std::size_t failures = 0;
  std::vector<ReplicationRecord> replications;
};

//! Warp induced by the constant weight function w(omega) = weight.
WarpingFunction constant_weight_warp(const Grid& grid, double weight);

//! The configured true warp, or the constant-weight default.
WarpingFunction resolve_true_beta(const SimConfig& config);

//! Random unit tangent direction at p: a 3-term Fourier sum with standard
//! normal weights, shaped by p, projected to the tangent space and
//! normalized. Near-parallel draws are redrawn, up to 10 attempts.
TangentVector tangent_direction(const HalfDensity& p, Rng& rng);

//! One predictor/response pair: the response sits at geodesic distance |c|
//! from f warped by the true beta, where c is the uniform noise multiplier.
GeneratedPair generate_pair(const GridDensity& f,
                            const WarpingFunction& true_beta,
                            double noise_halfwidth, Rng& rng);

//! m draws from f by inverse-CDF sampling of the trapezoid CDF.
SampleSet sample_from_density(const GridDensity& f, std::size_t m, Rng& rng,
                              std::string unit_id = std::string(),
                              VariableTag tag = VariableTag::f);

//! The full data set one replication fits on, reproducible from the config
//! seed and the replication index alone.
RegressionData generate_replication_data(const SimConfig& config,
                                         std::size_t rep_index);

//! Run the configured replications (in parallel when DENSEWARP_THREADS or
//! the hardware allows), fit each, and aggregate warp recovery and fitted
//! Hellinger distance. A replication that throws is recorded as failed and
//! excluded from the aggregates.
SimResult run_replications(const SimConfig& config);

}  // namespace densewarp
