#include "densewarp/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "densewarp/rng.hpp"
#include "densewarp/sphere.hpp"
#include "loss_eval.hpp"

namespace densewarp {

namespace {

void validate_config(const FitConfig& c) {
  if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda)) {
    throw ConfigError("penalty weight must be finite and >= 0");
  }
  if (c.max_iter < 1) throw ConfigError("max_iter must be at least 1");
  if (!(c.grad_tol > 0.0)) throw ConfigError("grad_tol must be positive");
  if (!(c.fd_step > 0.0)) throw ConfigError("fd_step must be positive");
  if (!(c.armijo_slope > 0.0 && c.armijo_slope < 1.0)) {
    throw ConfigError("armijo_slope must lie in (0, 1)");
  }
  if (!(c.backtrack_factor > 0.0 && c.backtrack_factor < 1.0)) {
    throw ConfigError("backtrack_factor must lie in (0, 1)");
  }
  if (c.cv_folds < 2) throw ConfigError("cv_folds must be at least 2");
  if (c.lambda_grid.empty()) throw ConfigError("lambda grid is empty");
  for (double l : c.lambda_grid) {
    if (!(l >= 0.0) || !std::isfinite(l)) {
      throw ConfigError("lambda grid values must be finite and >= 0");
    }
  }
}

//! Objective machinery bound to one data set: coefficient vector in, penalized
//! loss out, reusing warp and interpolation buffers across evaluations.
class FitProblem {
 public:
  FitProblem(const RegressionData& data, std::size_t n_basis, int order)
      : loss_(data),
        basis_(n_basis, order, data.grid()),
        grid_(data.grid()),
        w_(data.grid().size()) {}

  std::size_t dim() const { return basis_.cols(); }

  double eval(std::span<const double> alpha, double lambda,
              std::vector<double>* per_unit = nullptr) {
    basis_.multiply(alpha, w_);
    detail::warp_from_weights(grid_, w_, warp_);
    const double data_term = loss_.mean_h2(warp_.beta, warp_.deriv, per_unit);
    const double pen = lambda > 0.0 ? lambda * detail::weight_penalty(grid_, w_) : 0.0;
    return data_term + pen;
  }

  void fd_gradient(std::span<const double> alpha, double lambda, double step,
                   std::span<double> grad) {
    std::vector<double> probe(alpha.begin(), alpha.end());
    for (std::size_t k = 0; k < probe.size(); ++k) {
      const double base = probe[k];
      probe[k] = base + step;
      const double up = eval(probe, lambda);
      probe[k] = base - step;
      const double down = eval(probe, lambda);
      probe[k] = base;
      grad[k] = (up - down) / (2.0 * step);
    }
  }

  const Grid& grid() const { return grid_; }

 private:
  detail::PairLoss loss_;
  BasisMatrix basis_;
  Grid grid_;
  std::vector<double> w_;
  detail::WarpBuffers warp_;
};

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

RegressionData::RegressionData(Grid grid, std::vector<DensityPair> pairs)
    : grid_(std::move(grid)), pairs_(std::move(pairs)) {
  if (pairs_.empty()) {
    throw DegenerateInputError("regression data has no density pairs");
  }
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    if (!(pairs_[i].f.grid() == grid_) || !(pairs_[i].g.grid() == grid_)) {
      throw StructuralError("density pair " + std::to_string(i) +
                            " does not share the common grid");
    }
  }
}

std::vector<double> default_lambda_grid() {
  // 7 log-spaced values from 1e-4 to 1e-2.
  std::vector<double> out(7);
  for (int i = 0; i < 7; ++i) {
    out[i] = std::pow(10.0, -4.0 + 2.0 * static_cast<double>(i) / 6.0);
  }
  return out;
}

double objective(const BasisExpansion& e, const RegressionData& data,
                 double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("penalty weight must be finite and >= 0");
  }
  FitProblem problem(data, e.n_basis(), e.order());
  return problem.eval(e.coefficients(), lambda);
}

std::vector<double> gradient(const BasisExpansion& e, const RegressionData& data,
                             double lambda, double fd_step) {
  if (!(fd_step > 0.0)) throw ConfigError("fd_step must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("penalty weight must be finite and >= 0");
  }
  FitProblem problem(data, e.n_basis(), e.order());
  std::vector<double> grad(problem.dim());
  problem.fd_gradient(e.coefficients(), lambda, fd_step, grad);
  return grad;
}

WarpFit fit(const RegressionData& data, const FitConfig& config) {
  validate_config(config);
  FitProblem problem(data, config.n_basis, config.spline_order);
  const std::size_t dim = problem.dim();

  std::vector<double> alpha(dim, 0.0);
  std::vector<double> grad(dim), candidate(dim);
  double value = problem.eval(alpha, config.lambda);
  std::vector<double> trace{value};

  bool converged = false;
  double grad_norm = 0.0;
  double step = 1.0;
  std::size_t iter = 0;
  for (; iter < config.max_iter; ++iter) {
    problem.fd_gradient(alpha, config.lambda, config.fd_step, grad);
    grad_norm = l2_norm(grad);
    if (grad_norm < config.grad_tol) {
      converged = true;
      break;
    }
    const double slope = grad_norm * grad_norm;
    bool accepted = false;
    for (double s = step; s > 1e-16; s *= config.backtrack_factor) {
      for (std::size_t k = 0; k < dim; ++k) candidate[k] = alpha[k] - s * grad[k];
      const double cand_value = problem.eval(candidate, config.lambda);
      if (cand_value <= value - config.armijo_slope * s * slope) {
        alpha.swap(candidate);
        value = cand_value;
        trace.push_back(value);
        // Reuse the accepted step and let it grow again.
        step = std::min(s / config.backtrack_factor, 1e3);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no descent direction at line-search resolution
  }

  BasisExpansion coeffs(config.n_basis, alpha, config.spline_order);
  WarpingFunction beta_hat = weight_to_warp(coeffs, problem.grid());

  std::vector<double> per_unit(data.n_units());
  for (std::size_t i = 0; i < data.n_units(); ++i) {
    per_unit[i] = hellinger(data.pairs()[i].g, act(data.pairs()[i].f, beta_hat));
  }

  WarpFit out{std::move(coeffs), std::move(beta_hat), 0.0, false, 0, 0.0,
              {}, {}};
  out.lambda_used = config.lambda;
  out.converged = converged;
  out.iterations = iter;
  out.grad_norm = grad_norm;
  out.objective_trace = std::move(trace);
  out.per_unit_hellinger = std::move(per_unit);
  return out;
}

CvResult cross_validate(const RegressionData& data, const FitConfig& config) {
  validate_config(config);
  const std::size_t n = data.n_units();
  if (n < config.cv_folds) {
    throw ConfigError("cross-validation needs at least as many units (" +
                      std::to_string(n) + ") as folds (" +
                      std::to_string(config.cv_folds) + ")");
  }

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = derive_rng(config.cv_seed, 0);
  std::shuffle(perm.begin(), perm.end(), rng);

  // Contiguous blocks of the shuffled order; the first n % folds blocks take
  // one extra unit.
  std::vector<std::size_t> fold_of(n);
  {
    const std::size_t base = n / config.cv_folds;
    const std::size_t extra = n % config.cv_folds;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < config.cv_folds; ++f) {
      const std::size_t len = base + (f < extra ? 1 : 0);
      for (std::size_t j = 0; j < len; ++j) fold_of[perm[pos++]] = f;
    }
  }

  std::vector<double> lambdas = config.lambda_grid;
  std::sort(lambdas.begin(), lambdas.end());
  std::vector<double> scores(lambdas.size(), 0.0);

  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    double held_out_sum = 0.0;
    for (std::size_t f = 0; f < config.cv_folds; ++f) {
      std::vector<DensityPair> train;
      std::vector<std::size_t> test_idx;
      train.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        if (fold_of[i] == f) {
          test_idx.push_back(i);
        } else {
          train.push_back(data.pairs()[i]);
        }
      }
      FitConfig fold_config = config;
      fold_config.lambda = lambdas[li];
      const WarpFit ft = fit(RegressionData(data.grid(), std::move(train)),
                             fold_config);
      for (std::size_t i : test_idx) {
        const double h = hellinger(data.pairs()[i].g,
                                   act(data.pairs()[i].f, ft.beta_hat));
        held_out_sum += h * h;
      }
    }
    scores[li] = held_out_sum / static_cast<double>(n);
  }

  const double best = *std::min_element(scores.begin(), scores.end());
  double lambda_best = lambdas.front();
  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    // Ties (to numerical resolution) resolve toward the smoother fit.
    if (scores[li] <= best + 1e-12) lambda_best = lambdas[li];
  }

  CvResult out;
  out.lambda_best = lambda_best;
  out.lambdas = std::move(lambdas);
  out.mean_scores = std::move(scores);
  out.seed = config.cv_seed;
  return out;
}

GridDensity predict(const GridDensity& f, const WarpFit& fit) {
  return act(f, fit.beta_hat);
}

GridDensity predict(const GridDensity& f, const WarpingFunction& beta) {
  return act(f, beta);
}

}  // namespace densewarp
