#pragma once

#include <cstdint>
#include <cstddef>
#include <vector>

#include "densewarp/grid.hpp"
#include "densewarp/warping.hpp"

namespace densewarp {

struct DensityPair {
  GridDensity f;
  GridDensity g;
};

//! Paired predictor/response densities on one shared grid.
class RegressionData {
 public:
  RegressionData(Grid grid, std::vector<DensityPair> pairs);

  const Grid& grid() const { return grid_; }
  const std::vector<DensityPair>& pairs() const { return pairs_; }
  std::size_t n_units() const { return pairs_.size(); }

 private:
  Grid grid_;
  std::vector<DensityPair> pairs_;
};

std::vector<double> default_lambda_grid();

struct FitConfig {
  std::size_t n_basis = 4;  // K; the weight uses K+1 coefficients
  int spline_order = 4;
  double lambda = 1e-3;
  double grad_tol = 1e-6;
  std::size_t max_iter = 500;
  double fd_step = 1e-6;
  double armijo_slope = 1e-4;
  double backtrack_factor = 0.5;
  std::vector<double> lambda_grid = default_lambda_grid();
  std::size_t cv_folds = 5;
  std::uint64_t cv_seed = 0;
};

struct WarpFit {
  BasisExpansion coefficients;
  WarpingFunction beta_hat;
  double lambda_used = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  double grad_norm = 0.0;
  std::vector<double> objective_trace;
  std::vector<double> per_unit_hellinger;
};

//! Mean squared Hellinger distance between the responses and the warped
//! predictors, plus lambda times the integrated squared weight. Equal to
//! (1/2n) sum_i |sqrt(g_i) - sqrt((f_i o beta) beta')|^2 + lambda |w|^2.
double objective(const BasisExpansion& e, const RegressionData& data,
                 double lambda);

//! Central finite-difference gradient of the objective in coefficient space.
std::vector<double> gradient(const BasisExpansion& e, const RegressionData& data,
                             double lambda, double fd_step = 1e-6);

//! Penalized fit by gradient descent with Armijo backtracking from the
//! zero-weight (identity warp) start.
WarpFit fit(const RegressionData& data, const FitConfig& config = FitConfig());

struct CvResult {
  double lambda_best = 0.0;
  std::vector<double> lambdas;
  std::vector<double> mean_scores;
  std::uint64_t seed = 0;
};

//! K-fold cross-validation over the lambda grid; folds are contiguous blocks
//! of a seeded shuffle, scores are held-out mean squared Hellinger distances,
//! and score ties resolve toward the larger (smoother) lambda.
CvResult cross_validate(const RegressionData& data,
                        const FitConfig& config = FitConfig());

//! Response predicted for a new predictor density: f warped by the fit.
GridDensity predict(const GridDensity& f, const WarpFit& fit);
GridDensity predict(const GridDensity& f, const WarpingFunction& beta);

}  // namespace densewarp
