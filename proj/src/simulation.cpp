#include "densewarp/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>
#include <thread>

namespace densewarp {

namespace {

void validate(const SimConfig& config) {
  if (config.n < 1) throw ConfigError("simulation needs n >= 1");
  if (config.replications < 1) {
    throw ConfigError("simulation needs at least one replication");
  }
  if (!(config.noise_halfwidth >= 0.0)) {
    throw ConfigError("noise_halfwidth must be >= 0");
  }
  if (!(config.predictor_a >= 1.0) || !(config.predictor_b >= 1.0)) {
    throw ConfigError("predictor Beta shapes must be >= 1");
  }
  if (!(config.predictor_jitter >= 0.0)) {
    throw ConfigError("predictor_jitter must be >= 0");
  }
}

std::size_t resolve_thread_count(std::size_t jobs) {
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("DENSEWARP_THREADS")) {
    std::size_t parsed = 0;
    const char* end = env + std::char_traits<char>::length(env);
    auto [ptr, ec] = std::from_chars(env, end, parsed);
    if (ec != std::errc() || ptr != end || parsed < 1) {
      throw ConfigError("DENSEWARP_THREADS must be a positive integer, got '" +
                        std::string(env) + "'");
    }
    threads = parsed;
  }
  return std::min(threads, jobs);
}

GridDensity unit_predictor(const SimConfig& config, const GridDensity& base,
                           Rng& rng) {
  if (config.predictor_jitter == 0.0) return base;
  std::uniform_real_distribution<double> jitter(-config.predictor_jitter,
                                                config.predictor_jitter);
  const double a = std::max(1.0, config.predictor_a + jitter(rng));
  const double b = std::max(1.0, config.predictor_b + jitter(rng));
  return beta_density(base.grid(), a, b);
}

}  // namespace

FitConfig sim_fit_config() {
  FitConfig config;
  config.lambda = 1e-4;
  config.grad_tol = 3e-5;
  config.max_iter = 1000;
  return config;
}

WarpingFunction constant_weight_warp(const Grid& grid, double weight) {
  std::vector<double> w(grid.size(), weight);
  return weight_to_warp(grid, w);
}

WarpingFunction resolve_true_beta(const SimConfig& config) {
  if (config.true_beta) return *config.true_beta;
  return constant_weight_warp(config.grid, config.true_weight);
}

TangentVector tangent_direction(const HalfDensity& p, Rng& rng) {
  const Grid& grid = p.grid();
  const std::size_t N = grid.size();
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr int kTerms = 3;
  constexpr int kAttempts = 10;

  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    double a[kTerms], b[kTerms];
    for (int j = 0; j < kTerms; ++j) {
      a[j] = normal(rng);
      b[j] = normal(rng);
    }
    std::vector<double> v(N);
    for (std::size_t i = 0; i < N; ++i) {
      const double omega = grid[i];
      double s = 0.0;
      for (int j = 0; j < kTerms; ++j) {
        const double arg = 2.0 * std::numbers::pi * (j + 1) * omega;
        s += a[j] * std::cos(arg) + b[j] * std::sin(arg);
      }
      // Shaping by p keeps exp_map steps inside the cone of nonnegative
      // functions, so the step length is exactly the geodesic distance.
      v[i] = s * p.values()[i];
    }
    const double ip = inner(grid, v, p.values());
    for (std::size_t i = 0; i < N; ++i) v[i] -= ip * p.values()[i];
    const double nv = norm_l2(grid, v);
    if (nv < 1e-8) continue;
    for (std::size_t i = 0; i < N; ++i) v[i] /= nv;
    return TangentVector(p, std::move(v));
  }
  throw DegenerateInputError(
      "tangent_direction failed to draw a non-parallel direction");
}

GeneratedPair generate_pair(const GridDensity& f,
                            const WarpingFunction& true_beta,
                            double noise_halfwidth, Rng& rng) {
  if (!(noise_halfwidth >= 0.0)) {
    throw ConfigError("noise_halfwidth must be >= 0");
  }
  GridDensity warped = act(f, true_beta);
  const HalfDensity p = srf(warped);
  const TangentVector u = tangent_direction(p, rng);
  std::uniform_real_distribution<double> uniform(-noise_halfwidth,
                                                 noise_halfwidth);
  const double c = uniform(rng);
  if (std::abs(c) >= std::numbers::pi) {
    throw DomainError("noise multiplier reaches the cut locus");
  }
  if (c == 0.0) return {f, std::move(warped), c};

  std::vector<double> e(u.values());
  for (double& x : e) x *= c;
  GridDensity g = srf_inverse(exp_map(TangentVector(p, std::move(e))));
  return {f, std::move(g), c};
}

SampleSet sample_from_density(const GridDensity& f, std::size_t m, Rng& rng,
                              std::string unit_id, VariableTag tag) {
  if (m < 1) throw ConfigError("sample_from_density needs m >= 1");
  const Grid& grid = f.grid();
  std::vector<double> cdf = cumulative_trapezoid(grid, f.values());
  const double total = cdf.back();
  if (!(total > 0.0)) {
    throw DegenerateInputError("cannot sample from a zero-mass density");
  }
  for (double& c : cdf) c /= total;

  SampleSet out;
  out.unit_id = std::move(unit_id);
  out.tag = tag;
  out.samples.resize(m);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (std::size_t k = 0; k < m; ++k) {
    const double u = uniform(rng);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t j = static_cast<std::size_t>(it - cdf.begin());
    if (j == 0) j = 1;
    if (j >= cdf.size()) j = cdf.size() - 1;
    const double span = cdf[j] - cdf[j - 1];
    const double frac = span > 0.0 ? (u - cdf[j - 1]) / span : 0.0;
    out.samples[k] = grid[j - 1] + frac * grid.spacing();
  }
  return out;
}

RegressionData generate_replication_data(const SimConfig& config,
                                         std::size_t rep_index) {
  validate(config);
  Rng rng = derive_rng(config.seed, rep_index);
  const WarpingFunction beta_star = resolve_true_beta(config);
  const GridDensity base =
      beta_density(config.grid, config.predictor_a, config.predictor_b);

  std::vector<DensityPair> pairs;
  pairs.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    GridDensity f_i = unit_predictor(config, base, rng);
    GeneratedPair pair =
        generate_pair(f_i, beta_star, config.noise_halfwidth, rng);
    GridDensity f_use = pair.f;
    GridDensity g_use = pair.g;
    if (config.m1 > 0) {
      f_use = kde(sample_from_density(pair.f, config.m1, rng), config.grid);
    }
    if (config.m2 > 0) {
      g_use = kde(sample_from_density(pair.g, config.m2, rng), config.grid);
    }
    pairs.push_back({std::move(f_use), std::move(g_use)});
  }
  return RegressionData(config.grid, std::move(pairs));
}

SimResult run_replications(const SimConfig& config) {
  validate(config);
  const WarpingFunction beta_star = resolve_true_beta(config);
  const std::size_t R = config.replications;

  SimResult result;
  result.replications.resize(R);

  auto run_one = [&](std::size_t r) {
    ReplicationRecord& rec = result.replications[r];
    rec.index = r;
    try {
      RegressionData data = generate_replication_data(config, r);
      WarpFit fitted = fit(data, config.fit_config);
      rec.converged = fitted.converged;
      rec.warp_distance = warp_distance(fitted.beta_hat, beta_star);
      double h_sum = 0.0;
      for (double h : fitted.per_unit_hellinger) h_sum += h;
      rec.mean_hellinger = h_sum / static_cast<double>(data.n_units());
      double base_sum = 0.0;
      for (const DensityPair& pair : data.pairs()) {
        base_sum += hellinger(pair.g, pair.f);
      }
      rec.mean_hellinger_baseline =
          base_sum / static_cast<double>(data.n_units());
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.message = e.what();
    }
  };

  const std::size_t threads = resolve_thread_count(R);
  if (threads <= 1) {
    for (std::size_t r = 0; r < R; ++r) run_one(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t r = next.fetch_add(1); r < R; r = next.fetch_add(1)) {
          run_one(r);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  std::size_t ok = 0;
  double wd_sum = 0.0, h_sum = 0.0, base_sum = 0.0;
  for (const ReplicationRecord& rec : result.replications) {
    if (rec.failed) {
      ++result.failures;
      continue;
    }
    ++ok;
    wd_sum += rec.warp_distance;
    h_sum += rec.mean_hellinger;
    base_sum += rec.mean_hellinger_baseline;
  }
  if (ok > 0) {
    const double n_ok = static_cast<double>(ok);
    result.mean_warp_distance = wd_sum / n_ok;
    result.mean_hellinger = h_sum / n_ok;
    result.mean_hellinger_baseline = base_sum / n_ok;
    if (ok > 1) {
      double wd_var = 0.0, h_var = 0.0;
      for (const ReplicationRecord& rec : result.replications) {
        if (rec.failed) continue;
        wd_var += (rec.warp_distance - result.mean_warp_distance) *
                  (rec.warp_distance - result.mean_warp_distance);
        h_var += (rec.mean_hellinger - result.mean_hellinger) *
                 (rec.mean_hellinger - result.mean_hellinger);
      }
      wd_var /= n_ok - 1.0;
      h_var /= n_ok - 1.0;
      result.se_warp_distance = std::sqrt(wd_var / n_ok);
      result.se_hellinger = std::sqrt(h_var / n_ok);
    }
  }
  return result;
}

}  // namespace densewarp
