#include "densewarp/inference.hpp"

#include <algorithm>
#include <cmath>

#include "loss_eval.hpp"

namespace densewarp {

namespace {

constexpr double kBumpHeight = 1e-4;
constexpr double kCurvatureFloor = 1e-8;

void validate_level(double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw ConfigError("confidence level must lie strictly between 0 and 1");
  }
}

}  // namespace

SandwichVariance sandwich_variance(const WarpFit& fit,
                                   const RegressionData& data,
                                   std::span<const std::size_t> at_indices) {
  if (!fit.converged) {
    throw ConfigError("sandwich variance needs a converged fit");
  }
  const std::size_t n = data.n_units();
  if (n < 2) {
    throw ConfigError("sandwich variance needs at least two units");
  }
  const Grid& grid = data.grid();
  if (!(fit.beta_hat.grid() == grid)) {
    throw StructuralError("fit and data live on different grids");
  }
  const std::size_t N = grid.size();

  std::vector<std::size_t> indices;
  if (at_indices.empty()) {
    indices.resize(N);
    for (std::size_t j = 0; j < N; ++j) indices[j] = j;
  } else {
    indices.assign(at_indices.begin(), at_indices.end());
    for (std::size_t j : indices) {
      if (j >= N) {
        throw DomainError("variance index " + std::to_string(j) +
                          " is outside the grid");
      }
    }
  }

  const std::vector<double> w_hat = bspline_eval(fit.coefficients, grid);
  detail::PairLoss loss(data);
  detail::WarpBuffers warp;

  // Baseline per-unit losses at the fitted weight.
  std::vector<double> base(n);
  detail::warp_from_weights(grid, w_hat, warp);
  loss.mean_h2(warp.beta, warp.deriv, &base);

  SandwichVariance out;
  out.indices = indices;
  out.values.resize(indices.size());

  std::vector<double> perturbed(w_hat);
  std::vector<double> up(n), down(n);
  const double t = kBumpHeight;
  for (std::size_t pos = 0; pos < indices.size(); ++pos) {
    const std::size_t j = indices[pos];
    // Unit hat bump at node j has trapezoid mass h (h/2 at the boundary).
    const double mass =
        grid.spacing() * ((j == 0 || j == N - 1) ? 0.5 : 1.0);

    perturbed[j] = w_hat[j] + t;
    detail::warp_from_weights(grid, perturbed, warp);
    loss.mean_h2(warp.beta, warp.deriv, &up);

    perturbed[j] = w_hat[j] - t;
    detail::warp_from_weights(grid, perturbed, warp);
    loss.mean_h2(warp.beta, warp.deriv, &down);

    perturbed[j] = w_hat[j];

    double score_mean = 0.0, curv_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      score_mean += (up[i] - down[i]) / (2.0 * t * mass);
      curv_mean += (up[i] - 2.0 * base[i] + down[i]) / (t * t * mass * mass);
    }
    score_mean /= static_cast<double>(n);
    curv_mean /= static_cast<double>(n);

    double score_var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (up[i] - down[i]) / (2.0 * t * mass) - score_mean;
      score_var += d * d;
    }
    score_var /= static_cast<double>(n);

    double a = curv_mean;
    if (std::abs(a) < kCurvatureFloor) {
      a = (a < 0.0) ? -kCurvatureFloor : kCurvatureFloor;
      out.floored.push_back(j);
    }
    out.values[pos] = score_var / (static_cast<double>(n) * a * a);
  }
  return out;
}

PointwiseCI ci_for_w(const WarpFit& fit, const SandwichVariance& variance,
                     double level) {
  validate_level(level);
  const Grid& grid = fit.beta_hat.grid();
  const std::vector<double> w_hat = bspline_eval(fit.coefficients, grid);
  const double z = normal_quantile(0.5 * (1.0 + level));

  PointwiseCI out;
  out.grid = grid;
  out.level = level;
  out.indices = variance.indices;
  out.estimate.resize(variance.indices.size());
  out.lower.resize(variance.indices.size());
  out.upper.resize(variance.indices.size());
  for (std::size_t pos = 0; pos < variance.indices.size(); ++pos) {
    const std::size_t j = variance.indices[pos];
    const double half = z * std::sqrt(std::max(variance.values[pos], 0.0));
    out.estimate[pos] = w_hat[j];
    out.lower[pos] = w_hat[j] - half;
    out.upper[pos] = w_hat[j] + half;
  }
  return out;
}

PointwiseCI ci_for_beta(const WarpFit& fit, const SandwichVariance& variance,
                        double level) {
  validate_level(level);
  const Grid& grid = fit.beta_hat.grid();
  const std::size_t N = grid.size();
  if (variance.indices.size() != N) {
    throw ConfigError("warp band needs the variance on the full grid");
  }
  const std::vector<double> w_hat = bspline_eval(fit.coefficients, grid);
  const double z = normal_quantile(0.5 * (1.0 + level));

  std::vector<double> w_lo(N), w_hi(N);
  for (std::size_t pos = 0; pos < N; ++pos) {
    const std::size_t j = variance.indices[pos];
    const double half = z * std::sqrt(std::max(variance.values[pos], 0.0));
    w_lo[j] = w_hat[j] - half;
    w_hi[j] = w_hat[j] + half;
  }
  const WarpingFunction beta_lo = weight_to_warp(grid, w_lo);
  const WarpingFunction beta_hi = weight_to_warp(grid, w_hi);
  const auto& hat = fit.beta_hat.beta();

  PointwiseCI out;
  out.grid = grid;
  out.level = level;
  out.indices = variance.indices;
  out.estimate.resize(N);
  out.lower.resize(N);
  out.upper.resize(N);
  for (std::size_t j = 0; j < N; ++j) {
    const double a = beta_lo.beta()[j];
    const double b = beta_hi.beta()[j];
    out.estimate[j] = hat[j];
    out.lower[j] = std::min({a, b, hat[j]});
    out.upper[j] = std::max({a, b, hat[j]});
  }
  return out;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("normal quantile needs p strictly inside (0, 1)");
  }
  // Wichura's PPND16: rational approximations on three regions.
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        q * (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                  6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
              1.3314166789178437745e2) * r + 3.3871328727963666080e0);
    const double den =
        (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
              3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
            5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
          4.2313330701600911252e1) * r + 1.0);
    return num / den;
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
            3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
          4.63033784615654529590e0) * r + 1.42343711074968357734e0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
          2.05319162663775882187e0) * r + 1.0);
    value = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
          5.46378491116411436990e0) * r + 6.65790464350110377720e0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    value = num / den;
  }
  return (q < 0.0) ? -value : value;
}

}  // namespace densewarp
