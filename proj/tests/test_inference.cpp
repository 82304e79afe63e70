#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "densewarp/errors.hpp"
#include "densewarp/inference.hpp"
#include "densewarp/simulation.hpp"
#include "support.hpp"

using namespace densewarp;
using testsupport::convex_warp;
using testsupport::random_beta_pair;

namespace {

//! Exactly warped pairs plus a fit converged on them.
struct Fitted {
  RegressionData data;
  WarpFit fit;
};

Fitted fitted_exact(const Grid& grid, std::size_t n, std::uint64_t seed,
                    double lambda = 1e-4) {
  densewarp::Rng rng(seed);
  WarpingFunction truth = convex_warp(grid);
  std::vector<DensityPair> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    auto [f, unused] = random_beta_pair(grid, rng);
    (void)unused;
    pairs.push_back({f, act(f, truth)});
  }
  RegressionData data(grid, std::move(pairs));
  FitConfig config;
  config.lambda = lambda;
  config.grad_tol = 3e-5;
  config.max_iter = 1000;
  WarpFit fit_result = fit(data, config);
  REQUIRE(fit_result.converged);
  return {std::move(data), std::move(fit_result)};
}

//! Noisy pairs from the generative model, for variance scaling checks.
Fitted fitted_noisy(const Grid& grid, std::size_t n, std::uint64_t seed) {
  SimConfig config;
  config.grid = grid;
  config.n = n;
  config.seed = seed;
  config.fit_config = sim_fit_config();
  RegressionData data = generate_replication_data(config, 0);
  WarpFit fit_result = fit(data, config.fit_config);
  REQUIRE(fit_result.converged);
  return {std::move(data), std::move(fit_result)};
}

}  // namespace

TEST_CASE("sandwich variance vanishes on exactly fitted residuals") {
  Grid g;
  // Build data whose outcomes are exact warps of the predictors by the
  // fitted warp itself, so every per-unit loss derivative is identical.
  Fitted base = fitted_exact(g, 3, 61);
  std::vector<DensityPair> pairs;
  densewarp::Rng rng(62);
  for (int i = 0; i < 3; ++i) {
    auto [f, unused] = random_beta_pair(g, rng);
    (void)unused;
    pairs.push_back({f, act(f, base.fit.beta_hat)});
  }
  RegressionData data(g, pairs);
  std::vector<std::size_t> idx = {250, 500, 750};
  SandwichVariance v = sandwich_variance(base.fit, data, idx);
  for (double c : v.values) CHECK(std::fabs(c) < 1e-10);
}

TEST_CASE("doubling the data halves the variance") {
  Grid g;
  Fitted fitted = fitted_noisy(g, 8, 63);
  std::vector<std::size_t> idx = {200, 500, 800};
  SandwichVariance v1 = sandwich_variance(fitted.fit, fitted.data, idx);

  std::vector<DensityPair> doubled(fitted.data.pairs());
  doubled.insert(doubled.end(), fitted.data.pairs().begin(),
                 fitted.data.pairs().end());
  RegressionData data2(g, doubled);
  SandwichVariance v2 = sandwich_variance(fitted.fit, data2, idx);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    REQUIRE(v1.values[k] > 0.0);
    CHECK(v2.values[k] / v1.values[k] == doctest::Approx(0.5).epsilon(1e-8));
  }
}

TEST_CASE("sandwich variance is nonnegative across the grid") {
  Grid g;
  Fitted fitted = fitted_noisy(g, 6, 64);
  SandwichVariance v = sandwich_variance(fitted.fit, fitted.data);
  CHECK(v.indices.size() == g.size());
  for (double c : v.values) CHECK(c >= 0.0);
}

TEST_CASE("sandwich variance rejects bad preconditions") {
  Grid g;
  Fitted fitted = fitted_noisy(g, 4, 65);

  WarpFit unconverged = fitted.fit;
  unconverged.converged = false;
  CHECK_THROWS_AS(sandwich_variance(unconverged, fitted.data), ConfigError);

  RegressionData single(g, {fitted.data.pairs()[0]});
  CHECK_THROWS_AS(sandwich_variance(fitted.fit, single), ConfigError);

  std::vector<std::size_t> out_of_range = {g.size()};
  CHECK_THROWS_AS(sandwich_variance(fitted.fit, fitted.data, out_of_range),
                  DomainError);
}

TEST_CASE("index subset agrees with the full-grid computation") {
  Grid g;
  Fitted fitted = fitted_noisy(g, 4, 66);
  SandwichVariance full = sandwich_variance(fitted.fit, fitted.data);
  std::vector<std::size_t> idx = {100, 500, 900};
  SandwichVariance sub = sandwich_variance(fitted.fit, fitted.data, idx);
  for (std::size_t k = 0; k < idx.size(); ++k)
    CHECK(sub.values[k] == doctest::Approx(full.values[idx[k]]).epsilon(1e-12));
}

TEST_CASE("ci_for_w brackets the estimate and nests across levels") {
  Grid g;
  Fitted fitted = fitted_noisy(g, 6, 67);
  SandwichVariance v = sandwich_variance(fitted.fit, fitted.data);
  PointwiseCI ci95 = ci_for_w(fitted.fit, v, 0.95);
  PointwiseCI ci90 = ci_for_w(fitted.fit, v, 0.90);
  REQUIRE(ci95.indices.size() == g.size());
  std::vector<double> w_hat = bspline_eval(fitted.fit.coefficients, g);
  for (std::size_t i = 0; i < g.size(); i += 50) {
    CHECK(ci95.lower[i] <= ci95.estimate[i]);
    CHECK(ci95.estimate[i] <= ci95.upper[i]);
    CHECK(ci95.estimate[i] == doctest::Approx(w_hat[i]).epsilon(1e-12));
    CHECK(ci95.lower[i] <= ci90.lower[i] + 1e-12);
    CHECK(ci90.upper[i] <= ci95.upper[i] + 1e-12);
  }
  CHECK_THROWS_AS(ci_for_w(fitted.fit, v, 1.0), ConfigError);
}

TEST_CASE("band width grows with the confidence level") {
  Grid g;
  Fitted fitted = fitted_noisy(g, 6, 68);
  SandwichVariance v = sandwich_variance(fitted.fit, fitted.data);
  double prev = 0.0;
  for (double level : {0.5, 0.8, 0.9, 0.95, 0.99}) {
    PointwiseCI ci = ci_for_w(fitted.fit, v, level);
    double width = ci.upper[500] - ci.lower[500];
    CHECK(width >= prev);
    prev = width;
  }
}

TEST_CASE("ci_for_beta maps the band through valid warping functions") {
  Grid g;
  Fitted fitted = fitted_noisy(g, 6, 69);
  SandwichVariance v = sandwich_variance(fitted.fit, fitted.data);
  PointwiseCI band = ci_for_beta(fitted.fit, v, 0.95);
  CHECK(band.lower.front() == 0.0);
  CHECK(band.upper.front() == 0.0);
  CHECK(band.lower.back() == 1.0);
  CHECK(band.upper.back() == 1.0);
  for (std::size_t i = 0; i < g.size(); i += 100) {
    CHECK(band.lower[i] <= band.estimate[i] + 1e-12);
    CHECK(band.estimate[i] <= band.upper[i] + 1e-12);
  }
  // Envelope curves are monotone.
  for (std::size_t i = 1; i < g.size(); ++i) {
    CHECK(band.lower[i] >= band.lower[i - 1] - 1e-12);
    CHECK(band.upper[i] >= band.upper[i - 1] - 1e-12);
  }
}

TEST_CASE("degenerate variance collapses both bands onto the estimate") {
  Grid g;
  Fitted base = fitted_exact(g, 3, 70);
  std::vector<DensityPair> pairs;
  densewarp::Rng rng(71);
  for (int i = 0; i < 3; ++i) {
    auto [f, unused] = random_beta_pair(g, rng);
    (void)unused;
    pairs.push_back({f, act(f, base.fit.beta_hat)});
  }
  RegressionData data(g, pairs);
  SandwichVariance v = sandwich_variance(base.fit, data);
  PointwiseCI wband = ci_for_w(base.fit, v, 0.95);
  for (std::size_t i = 0; i < g.size(); i += 100) {
    CHECK(wband.upper[i] - wband.lower[i] < 1e-4);
  }
  PointwiseCI bband = ci_for_beta(base.fit, v, 0.95);
  for (std::size_t i = 0; i < g.size(); i += 100) {
    CHECK(bband.upper[i] - bband.lower[i] < 1e-4);
  }
}

TEST_CASE("normal_quantile matches reference values") {
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(0.95) == doctest::Approx(1.6448536269514722).epsilon(1e-12));
  CHECK(normal_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(0.9999) == doctest::Approx(3.71901648545568).epsilon(1e-9));
  CHECK_THROWS_AS(normal_quantile(0.0), DomainError);
  CHECK_THROWS_AS(normal_quantile(1.0), DomainError);
}

TEST_CASE("ci width shrinks like the square root of the sample size") {
  Grid g;
  Fitted fitted = fitted_noisy(g, 10, 72);
  std::vector<std::size_t> idx = {500};
  SandwichVariance v1 = sandwich_variance(fitted.fit, fitted.data, idx);

  std::vector<DensityPair> doubled(fitted.data.pairs());
  doubled.insert(doubled.end(), fitted.data.pairs().begin(),
                 fitted.data.pairs().end());
  RegressionData data2(g, doubled);
  SandwichVariance v2 = sandwich_variance(fitted.fit, data2, idx);
  double ratio = std::sqrt(v2.values[0]) / std::sqrt(v1.values[0]);
  CHECK(ratio == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.1));
}
