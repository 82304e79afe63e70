#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "densewarp/errors.hpp"
#include "support.hpp"

using namespace densewarp;

TEST_CASE("grid points are uniform on [0,1]") {
  Grid g(1001);
  CHECK(g.size() == 1001);
  CHECK(g[0] == doctest::Approx(0.0));
  CHECK(g[1000] == doctest::Approx(1.0));
  CHECK(g.spacing() == doctest::Approx(0.001));
  CHECK(g[500] == doctest::Approx(0.5));
  CHECK_THROWS_AS(Grid(1), ConfigError);
}

TEST_CASE("integrate matches closed forms") {
  Grid g;
  std::vector<double> ones(g.size(), 1.0);
  CHECK(integrate(g, ones) == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> line(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) line[i] = g[i];
  CHECK(integrate(g, line) == doctest::Approx(0.5).epsilon(1e-12));

  // Trapezoid rule is exact for piecewise-linear integrands, second order
  // otherwise: x^2 on 1001 points errs well below 1e-6.
  std::vector<double> sq(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) sq[i] = g[i] * g[i];
  CHECK(std::fabs(integrate(g, sq) - 1.0 / 3.0) < 1e-6);
}

TEST_CASE("cumulative_trapezoid starts at zero and ends at the integral") {
  Grid g;
  std::vector<double> line(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) line[i] = 2.0 * g[i];
  auto cum = cumulative_trapezoid(g, line);
  CHECK(cum.front() == 0.0);
  CHECK(cum.back() == doctest::Approx(integrate(g, line)).epsilon(1e-12));
  CHECK(cum[500] == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(std::is_sorted(cum.begin(), cum.end()));
}

TEST_CASE("normalize rescales to unit mass and floors the tails") {
  Grid g;
  std::vector<double> bump(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    bump[i] = std::exp(-50.0 * (g[i] - 0.5) * (g[i] - 0.5));
  GridDensity f = normalize(g, bump);
  CHECK(integrate(f) == doctest::Approx(1.0).epsilon(1e-10));
  for (double v : f.values()) CHECK(v > 0.0);

  std::vector<double> zeros(g.size(), 0.0);
  CHECK_THROWS_AS(normalize(g, zeros), DegenerateInputError);
  std::vector<double> negative(g.size(), -1.0);
  CHECK_THROWS_AS(normalize(g, negative), StructuralError);
}

TEST_CASE("GridDensity validates mass and shape") {
  Grid g;
  std::vector<double> ones(g.size(), 1.0);
  GridDensity u(g, ones);
  CHECK(integrate(u) == doctest::Approx(1.0));

  std::vector<double> off(g.size(), 2.0);
  CHECK_THROWS_AS(GridDensity(g, off), StructuralError);
  std::vector<double> wrong(5, 1.0);
  CHECK_THROWS_AS(GridDensity(g, wrong), StructuralError);
}

TEST_CASE("beta_density matches the closed-form density") {
  Grid g;
  GridDensity b22 = beta_density(g, 2.0, 2.0);
  // Beta(2,2) = 6 w (1-w).
  CHECK(b22.values()[500] == doctest::Approx(6.0 * 0.25).epsilon(1e-6));
  CHECK(integrate(b22) == doctest::Approx(1.0).epsilon(1e-9));

  GridDensity b25 = beta_density(g, 2.0, 5.0);
  CHECK(integrate(b25) == doctest::Approx(1.0).epsilon(1e-9));
  // Mode of Beta(2,5) sits at (a-1)/(a+b-2) = 0.2.
  std::size_t argmax = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (b25.values()[i] > b25.values()[argmax]) argmax = i;
  CHECK(g[argmax] == doctest::Approx(0.2).epsilon(0.01));
}

TEST_CASE("kde concentrates at a point cloud's center") {
  Grid g;
  densewarp::Rng rng(11);
  std::normal_distribution<double> jitter(0.0, 1e-3);
  SampleSet s{"u1", VariableTag::f, {}};
  for (int i = 0; i < 200; ++i) s.samples.push_back(0.5 + jitter(rng));
  GridDensity f = kde(s, g);
  std::size_t argmax = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (f.values()[i] > f.values()[argmax]) argmax = i;
  CHECK(std::fabs(g[argmax] - 0.5) < 0.01);
  CHECK(integrate(f) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("kde on uniform draws stays close to the flat density") {
  Grid g;
  densewarp::Rng rng(12);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  SampleSet s{"u1", VariableTag::f, {}};
  for (int i = 0; i < 10000; ++i) s.samples.push_back(unif(rng));
  GridDensity f = kde(s, g);
  double sup = 0.0;
  for (double v : f.values()) sup = std::max(sup, std::fabs(v - 1.0));
  CHECK(sup < 0.1);
}

TEST_CASE("kde recovers a Beta(2,5) sample within Hellinger 0.05") {
  Grid g;
  densewarp::Rng rng(13);
  std::gamma_distribution<double> ga(2.0, 1.0), gb(5.0, 1.0);
  SampleSet s{"u1", VariableTag::f, {}};
  for (int i = 0; i < 10000; ++i) {
    double x = ga(rng), y = gb(rng);
    s.samples.push_back(x / (x + y));
  }
  GridDensity est = kde(s, g);
  GridDensity truth = beta_density(g, 2.0, 5.0);
  CHECK(hellinger(est, truth) < 0.05);
}

TEST_CASE("kde rejects degenerate samples") {
  Grid g;
  SampleSet s{"u1", VariableTag::f, {0.5, 0.5, 0.5}};
  CHECK_THROWS_AS(kde(s, g), DegenerateInputError);
  SampleSet one{"u1", VariableTag::f, {0.5}};
  CHECK_THROWS_AS(kde(one, g), DegenerateInputError);
}

TEST_CASE("rescale_to_unit maps extremes to the interval ends") {
  std::vector<double> samples = {3.0, 7.0, 5.0, 4.0};
  auto [scaled, map] = rescale_to_unit(samples);
  CHECK(*std::min_element(scaled.begin(), scaled.end()) == doctest::Approx(0.0));
  CHECK(*std::max_element(scaled.begin(), scaled.end()) == doctest::Approx(1.0));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(map.apply(samples[i]) == doctest::Approx(scaled[i]));
    CHECK(map.invert(scaled[i]) == doctest::Approx(samples[i]));
  }
  std::vector<double> flat = {2.0, 2.0};
  CHECK_THROWS_AS(rescale_to_unit(flat), DegenerateInputError);
}

TEST_CASE("interp_density evaluates linearly between nodes") {
  Grid g;
  GridDensity b = beta_density(g, 2.0, 2.0);
  CHECK(interp_at(b, 0.5) == doctest::Approx(b.values()[500]));
  CHECK(interp_at(b, 0.0) == doctest::Approx(b.values()[0]));
  CHECK(interp_at(b, 1.0) == doctest::Approx(b.values()[1000]));
  double mid = interp_at(b, 0.5 + 0.5 * g.spacing());
  CHECK(mid == doctest::Approx(0.5 * (b.values()[500] + b.values()[501])));
  CHECK_THROWS_AS(interp_at(b, -0.1), DomainError);
  CHECK_THROWS_AS(interp_at(b, 1.1), DomainError);
}
