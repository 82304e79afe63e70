#include "densewarp/cli.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "densewarp/estimator.hpp"
#include "densewarp/inference.hpp"
#include "densewarp/io.hpp"
#include "densewarp/simulation.hpp"

namespace densewarp::cli {

namespace {

using nlohmann::ordered_json;

struct FitArgs {
  std::string input;
  std::string out = "fit.json";
  std::string lambda = "auto";
  std::string plot_dir;
  std::size_t k = 4;
  int order = 4;
  std::size_t folds = 5;
  std::size_t max_iter = 500;
  double grad_tol = 1e-6;
  std::size_t grid_points = 1001;
  std::uint64_t seed = 0;
};

struct PredictArgs {
  std::string fit_path;
  std::string density;
  std::string column;
  std::string out = "predicted.csv";
};

struct InferArgs {
  std::string fit_path;
  std::string input;
  std::string out = "ci.csv";
  std::string plot_dir;
  double level = 0.95;
};

struct SimulateArgs {
  std::size_t n = 100;
  std::size_t m = 0;
  std::size_t reps = 50;
  double noise = 0.1;
  double true_weight = 1.5;
  double jitter = 0.0;
  double lambda = 1e-4;
  std::size_t k = 4;
  std::size_t grid_points = 1001;
  std::uint64_t seed = 1;
  std::string out = "simresult.json";
  std::string emit_pairs;
};

struct DistanceArgs {
  std::string metric = "hellinger";
  std::string file_a;
  std::string file_b;
  std::string col_a;
  std::string col_b;
};

std::optional<std::string> opt_str(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return s;
}

ordered_json affine_json(const std::optional<AffineMap>& map) {
  if (!map) return nullptr;
  return ordered_json{{"offset", map->offset}, {"scale", map->scale}};
}

ordered_json input_info_json(const std::string& path,
                             const LoadedPairs& loaded) {
  return ordered_json{{"path", path},
                      {"format", loaded.format},
                      {"n_units", loaded.data.n_units()},
                      {"unit_ids", loaded.unit_ids},
                      {"rescale_f", affine_json(loaded.rescale_f)},
                      {"rescale_g", affine_json(loaded.rescale_g)}};
}

std::vector<std::string> generated_unit_ids(std::size_t n) {
  std::size_t width = 3;
  for (std::size_t v = (n > 0 ? n - 1 : 0); v >= 1000; v /= 10) ++width;
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string id = std::to_string(i);
    if (id.size() < width) id.insert(0, width - id.size(), '0');
    ids.push_back(std::move(id));
  }
  return ids;
}

int cmd_fit(const FitArgs& a, const std::vector<std::string>& raw_args) {
  const Grid requested(a.grid_points);
  LoadedPairs loaded = read_pairs(a.input, requested);
  const Grid& grid = loaded.data.grid();

  FitConfig config;
  config.n_basis = a.k;
  config.spline_order = a.order;
  config.grad_tol = a.grad_tol;
  config.max_iter = a.max_iter;
  config.cv_folds = a.folds;
  config.cv_seed = a.seed;

  std::optional<CvResult> cv;
  if (a.lambda == "auto") {
    cv = cross_validate(loaded.data, config);
    config.lambda = cv->lambda_best;
  } else {
    const char* begin = a.lambda.data();
    const char* end = begin + a.lambda.size();
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
      throw ConfigError("--lambda must be a number or 'auto', got '" +
                        a.lambda + "'");
    }
    config.lambda = value;
  }

  WarpFit fitted = fit(loaded.data, config);

  const RunManifest m = make_manifest(
      "fit", raw_args, a.seed,
      ordered_json{{"input", a.input},
                   {"out", a.out},
                   {"grid_points", grid.size()},
                   {"lambda_mode", a.lambda == "auto" ? "auto" : "fixed"},
                   {"fit", fit_config_json(config)}});
  write_fit_json(a.out, m, fitted, grid, cv, input_info_json(a.input, loaded));
  if (!a.plot_dir.empty()) {
    emit_plot_data(a.plot_dir, loaded.data, loaded.unit_ids, fitted,
                   std::nullopt, m);
  }

  std::printf("lambda %g (%s), %s after %zu iterations, objective %.6g\n",
              fitted.lambda_used, a.lambda == "auto" ? "auto" : "fixed",
              fitted.converged ? "converged" : "stopped",
              fitted.iterations, fitted.objective_trace.back());
  if (!fitted.converged) {
    std::fprintf(stderr,
                 "fit did not converge (gradient norm %.3g > tolerance %.3g); "
                 "results written to %s\n",
                 fitted.grad_norm, config.grad_tol, a.out.c_str());
    return 3;
  }
  return 0;
}

int cmd_predict(const PredictArgs& a,
                const std::vector<std::string>& raw_args) {
  LoadedFit lf = read_fit_json(a.fit_path);
  GridDensity f = read_density_csv(a.density, opt_str(a.column));
  if (!(f.grid() == lf.grid)) {
    throw StructuralError("density grid (" + std::to_string(f.grid().size()) +
                          " points) does not match the fit grid (" +
                          std::to_string(lf.grid.size()) + ")");
  }
  const GridDensity g = predict(f, lf.fit);
  const RunManifest m = make_manifest(
      "predict", raw_args, 0,
      ordered_json{{"fit", a.fit_path},
                   {"density", a.density},
                   {"column", a.column.empty() ? ordered_json(nullptr)
                                               : ordered_json(a.column)},
                   {"out", a.out}});
  write_density_csv(a.out, g, "predicted", m);
  return 0;
}

int cmd_infer(const InferArgs& a, const std::vector<std::string>& raw_args) {
  LoadedFit lf = read_fit_json(a.fit_path);
  LoadedPairs loaded = read_pairs(a.input, lf.grid);
  if (!(loaded.data.grid() == lf.grid)) {
    throw StructuralError("input grid (" +
                          std::to_string(loaded.data.grid().size()) +
                          " points) does not match the fit grid (" +
                          std::to_string(lf.grid.size()) + ")");
  }
  const SandwichVariance variance = sandwich_variance(lf.fit, loaded.data);
  const PointwiseCI w_ci = ci_for_w(lf.fit, variance, a.level);
  const PointwiseCI beta_ci = ci_for_beta(lf.fit, variance, a.level);
  const RunManifest m = make_manifest(
      "infer", raw_args, 0,
      ordered_json{{"fit", a.fit_path},
                   {"input", a.input},
                   {"level", a.level},
                   {"out", a.out}});
  write_ci_csv(a.out, w_ci, beta_ci, m);
  if (!a.plot_dir.empty()) {
    emit_plot_data(a.plot_dir, loaded.data, loaded.unit_ids, lf.fit,
                   std::make_pair(w_ci, beta_ci), m);
  }
  if (!variance.floored.empty()) {
    std::fprintf(stderr,
                 "warning: curvature floored at %zu grid points; the band "
                 "is unreliable there\n",
                 variance.floored.size());
  }
  return 0;
}

int cmd_simulate(const SimulateArgs& a,
                 const std::vector<std::string>& raw_args) {
  SimConfig config;
  config.grid = Grid(a.grid_points);
  config.n = a.n;
  config.m1 = a.m;
  config.m2 = a.m;
  config.noise_halfwidth = a.noise;
  config.true_weight = a.true_weight;
  config.predictor_jitter = a.jitter;
  config.replications = a.reps;
  config.seed = a.seed;
  config.fit_config = sim_fit_config();
  config.fit_config.n_basis = a.k;
  config.fit_config.lambda = a.lambda;

  const SimResult result = run_replications(config);

  const RunManifest m = make_manifest(
      "simulate", raw_args, a.seed,
      ordered_json{{"out", a.out},
                   {"emit_pairs", a.emit_pairs.empty()
                                      ? ordered_json(nullptr)
                                      : ordered_json(a.emit_pairs)},
                   {"sim", sim_config_json(config)}});
  write_simresult_json(a.out, m, config, result);

  if (!a.emit_pairs.empty()) {
    std::filesystem::create_directories(a.emit_pairs);
    const std::filesystem::path dir(a.emit_pairs);
    write_warp_csv((dir / "true_beta.csv").string(),
                   resolve_true_beta(config), m);
    const std::vector<std::string> ids = generated_unit_ids(config.n);
    char name[48];
    for (std::size_t r = 0; r < config.replications; ++r) {
      RegressionData data = generate_replication_data(config, r);
      std::snprintf(name, sizeof name, "pairs_rep%03zu.csv", r);
      write_pairs_csv((dir / name).string(), data, ids, m);
    }
  }

  std::printf("replications %zu, failures %zu\n",
              config.replications, result.failures);
  std::printf("mean warp distance %.6g (se %.3g)\n",
              result.mean_warp_distance, result.se_warp_distance);
  std::printf("mean fitted Hellinger %.6g (se %.3g), no-warp baseline %.6g\n",
              result.mean_hellinger, result.se_hellinger,
              result.mean_hellinger_baseline);
  return 0;
}

int cmd_distance(const DistanceArgs& a) {
  const GridDensity fa = read_density_csv(a.file_a, opt_str(a.col_a));
  const GridDensity fb = read_density_csv(a.file_b, opt_str(a.col_b));
  if (!(fa.grid() == fb.grid())) {
    throw StructuralError("the two files use different grids (" +
                          std::to_string(fa.grid().size()) + " vs " +
                          std::to_string(fb.grid().size()) + " points)");
  }
  double d = 0.0;
  if (a.metric == "hellinger") {
    d = hellinger(fa, fb);
  } else if (a.metric == "fisher_rao") {
    d = fisher_rao_distance(fa, fb);
  } else if (a.metric == "wasserstein") {
    d = wasserstein_1d(fa, fb);
  } else {
    d = kl_divergence(fa, fb);
  }
  std::printf("%.6f\n", d);
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Density-on-density regression through boundary-preserving "
               "warping functions"};
  app.name("densewarp");
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit_cmd =
      app.add_subcommand("fit", "Estimate the warp from paired densities");
  fit_cmd->add_option("--input", fit_args.input,
                      "pairs CSV: wide densities or long samples")
      ->required();
  fit_cmd->add_option("--out", fit_args.out, "output JSON path");
  fit_cmd->add_option("--lambda", fit_args.lambda,
                      "penalty weight, or 'auto' for cross-validation");
  fit_cmd->add_option("--k", fit_args.k, "basis dimension parameter K");
  fit_cmd->add_option("--order", fit_args.order, "B-spline order");
  fit_cmd->add_option("--folds", fit_args.folds, "cross-validation folds");
  fit_cmd->add_option("--max-iter", fit_args.max_iter,
                      "gradient descent iteration cap");
  fit_cmd->add_option("--grad-tol", fit_args.grad_tol,
                      "gradient norm stopping tolerance");
  fit_cmd->add_option("--grid-points", fit_args.grid_points,
                      "grid size used when smoothing raw samples");
  fit_cmd->add_option("--seed", fit_args.seed, "cross-validation fold seed");
  fit_cmd->add_option("--plot-data", fit_args.plot_dir,
                      "directory for plot-ready CSVs");

  PredictArgs predict_args;
  CLI::App* predict_cmd = app.add_subcommand(
      "predict", "Warp a predictor density through a stored fit");
  predict_cmd->add_option("--fit", predict_args.fit_path, "fit JSON path")
      ->required();
  predict_cmd->add_option("--density", predict_args.density,
                          "CSV holding the predictor density")
      ->required();
  predict_cmd->add_option("--column", predict_args.column,
                          "column to read when the CSV has several");
  predict_cmd->add_option("--out", predict_args.out, "output CSV path");

  InferArgs infer_args;
  CLI::App* infer_cmd = app.add_subcommand(
      "infer", "Pointwise confidence band for the fitted weight and warp");
  infer_cmd->add_option("--fit", infer_args.fit_path, "fit JSON path")
      ->required();
  infer_cmd->add_option("--input", infer_args.input,
                        "the pairs CSV the fit was built from")
      ->required();
  infer_cmd->add_option("--level", infer_args.level, "confidence level");
  infer_cmd->add_option("--out", infer_args.out, "output CSV path");
  infer_cmd->add_option("--plot-data", infer_args.plot_dir,
                        "directory for plot-ready CSVs");

  SimulateArgs sim_args;
  CLI::App* sim_cmd = app.add_subcommand(
      "simulate", "Replicated recovery study with known true warp");
  sim_cmd->add_option("--n", sim_args.n, "units per replication");
  sim_cmd->add_option("--m", sim_args.m,
                      "samples per density (0 fits from true densities)");
  sim_cmd->add_option("--reps", sim_args.reps, "replication count");
  sim_cmd->add_option("--noise", sim_args.noise,
                      "uniform noise multiplier half-width");
  sim_cmd->add_option("--true-weight", sim_args.true_weight,
                      "constant weight defining the true warp");
  sim_cmd->add_option("--jitter", sim_args.jitter,
                      "per-unit Beta shape jitter amplitude");
  sim_cmd->add_option("--lambda", sim_args.lambda, "penalty weight");
  sim_cmd->add_option("--k", sim_args.k, "basis dimension parameter K");
  sim_cmd->add_option("--grid-points", sim_args.grid_points, "grid size");
  sim_cmd->add_option("--seed", sim_args.seed, "master seed");
  sim_cmd->add_option("--out", sim_args.out, "output JSON path");
  sim_cmd->add_option("--emit-pairs", sim_args.emit_pairs,
                      "directory for generated pairs CSVs and the true warp");

  DistanceArgs dist_args;
  CLI::App* dist_cmd =
      app.add_subcommand("distance", "Distance between two densities");
  dist_cmd->add_option("--metric", dist_args.metric, "distance to compute")
      ->check(CLI::IsMember({"hellinger", "fisher_rao", "wasserstein", "kl"}));
  dist_cmd->add_option("file_a", dist_args.file_a, "first density CSV")
      ->required();
  dist_cmd->add_option("file_b", dist_args.file_b, "second density CSV")
      ->required();
  dist_cmd->add_option("--col-a", dist_args.col_a,
                       "column to read from file_a");
  dist_cmd->add_option("--col-b", dist_args.col_b,
                       "column to read from file_b");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 4;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit_args, args);
    if (predict_cmd->parsed()) return cmd_predict(predict_args, args);
    if (infer_cmd->parsed()) return cmd_infer(infer_args, args);
    if (sim_cmd->parsed()) return cmd_simulate(sim_args, args);
    return cmd_distance(dist_args);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 4;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace densewarp::cli
