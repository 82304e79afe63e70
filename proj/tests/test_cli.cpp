#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "densewarp/cli.hpp"
#include "densewarp/io.hpp"
#include "support.hpp"

using namespace densewarp;
using testsupport::max_abs_diff;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() / "densewarp_cli_test";
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

struct RunResult {
  int code = -1;
  std::string out;
};

//! cli::run with stdout redirected to a scratch file, so tests can assert
//! on what the command prints.
RunResult run_captured(const std::vector<std::string>& args) {
  const std::string capture =
      (std::filesystem::temp_directory_path() / "densewarp_cli_stdout.txt")
          .string();
  std::fflush(stdout);
  const int saved = dup(fileno(stdout));
  REQUIRE(saved >= 0);
  REQUIRE(std::freopen(capture.c_str(), "w", stdout) != nullptr);
  RunResult result;
  result.code = cli::run(args);
  std::fflush(stdout);
  dup2(saved, fileno(stdout));
  close(saved);

  std::ifstream stream(capture);
  result.out.assign(std::istreambuf_iterator<char>(stream),
                    std::istreambuf_iterator<char>());
  return result;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream stream(path, std::ios::binary);
  stream << content;
}

RunManifest test_manifest() {
  return make_manifest("test", {}, 0, nlohmann::ordered_json::object());
}

//! Exact-warp pairs CSV on a 201-point grid, plus the warp they were built
//! from.
struct Fixture {
  Grid grid{201};
  WarpingFunction beta_star;
  RegressionData data;
  std::string pairs_path;
};

Fixture make_fixture(const TempDir& dir, std::size_t n, std::uint64_t seed) {
  Grid g(201);
  WarpingFunction beta_star = constant_weight_warp(g, 1.2);
  densewarp::Rng rng(seed);
  std::vector<DensityPair> pairs;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) {
    auto [f, unused] = testsupport::random_beta_pair(g, rng);
    (void)unused;
    pairs.push_back({f, act(f, beta_star)});
    ids.push_back("u" + std::to_string(i));
  }
  RegressionData data(g, std::move(pairs));
  const std::string path = dir.file("pairs.csv");
  write_pairs_csv(path, data, ids, test_manifest());
  return Fixture{g, std::move(beta_star), std::move(data), path};
}

}  // namespace

TEST_CASE("fit recovers the warp and writes the fit file") {
  TempDir dir;
  Fixture fx = make_fixture(dir, 3, 201);
  const std::string out = dir.file("fit.json");

  RunResult r = run_captured({"fit", "--input", fx.pairs_path, "--out", out,
                              "--lambda", "1e-4", "--grad-tol", "1e-4",
                              "--max-iter", "500"});
  CHECK(r.code == 0);
  CHECK(r.out.find("converged") != std::string::npos);

  LoadedFit loaded = read_fit_json(out);
  CHECK(loaded.fit.converged);
  CHECK(loaded.fit.lambda_used == 1e-4);
  CHECK(warp_distance(loaded.fit.beta_hat, fx.beta_star) < 0.05);
}

TEST_CASE("fit with automatic penalty selection records the sweep") {
  TempDir dir;
  Fixture fx = make_fixture(dir, 4, 202);
  const std::string out = dir.file("fit_auto.json");

  RunResult r = run_captured({"fit", "--input", fx.pairs_path, "--out", out,
                              "--folds", "2", "--grad-tol", "1e-4",
                              "--max-iter", "300"});
  CHECK(r.code == 0);
  CHECK(r.out.find("auto") != std::string::npos);

  std::ifstream stream(out);
  nlohmann::ordered_json j = nlohmann::ordered_json::parse(stream);
  REQUIRE_FALSE(j.at("cv").is_null());
  const double best = j.at("cv").at("lambda_best").get<double>();
  CHECK(best == j.at("lambda").get<double>());
  bool found = false;
  for (const auto& l : j.at("cv").at("lambdas")) {
    if (l.get<double>() == best) found = true;
  }
  CHECK(found);
}

TEST_CASE("fit reports non-convergence but still writes output") {
  TempDir dir;
  Fixture fx = make_fixture(dir, 3, 203);
  const std::string out = dir.file("fit_stopped.json");

  RunResult r = run_captured({"fit", "--input", fx.pairs_path, "--out", out,
                              "--lambda", "1e-4", "--grad-tol", "1e-12",
                              "--max-iter", "3"});
  CHECK(r.code == 3);
  LoadedFit loaded = read_fit_json(out);
  CHECK_FALSE(loaded.fit.converged);
  CHECK(loaded.fit.iterations == 3);
}

TEST_CASE("input and flag failures use distinct exit codes") {
  TempDir dir;
  Fixture fx = make_fixture(dir, 3, 204);

  CHECK(run_captured({"fit", "--input", dir.file("absent.csv")}).code == 2);

  const std::string no_variable = dir.file("no_variable.csv");
  write_text(no_variable, "unit_id,value\na,0.5\n");
  CHECK(run_captured({"fit", "--input", no_variable}).code == 2);

  CHECK(run_captured({"fit", "--input", fx.pairs_path, "--lambda",
                      "notanumber"})
            .code == 4);
  CHECK(run_captured({"fit", "--input", fx.pairs_path, "--bogus-flag"})
            .code == 4);
  CHECK(run_captured({"nonsense"}).code == 4);
}

TEST_CASE("distance prints the requested metric") {
  TempDir dir;
  Grid g;
  std::vector<double> flat(g.size(), 1.0);
  GridDensity uniform(g, flat);
  GridDensity b22 = beta_density(g, 2.0, 2.0);
  const std::string file_a = dir.file("uniform.csv");
  const std::string file_b = dir.file("b22.csv");
  write_density_csv(file_a, uniform, "f", test_manifest());
  write_density_csv(file_b, b22, "f", test_manifest());

  auto printed = [](double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f\n", value);
    return std::string(buf);
  };

  RunResult hell = run_captured({"distance", file_a, file_b});
  CHECK(hell.code == 0);
  CHECK(hell.out == printed(hellinger(uniform, b22)));

  RunResult fr = run_captured(
      {"distance", "--metric", "fisher_rao", file_a, file_b});
  CHECK(fr.code == 0);
  CHECK(fr.out == printed(fisher_rao_distance(uniform, b22)));

  RunResult kl = run_captured({"distance", "--metric", "kl", file_a, file_b});
  CHECK(kl.code == 0);
  CHECK(kl.out == printed(kl_divergence(uniform, b22)));

  CHECK(run_captured({"distance", "--metric", "mahalanobis", file_a, file_b})
            .code == 4);
}

TEST_CASE("predict applies a stored fit to a new predictor") {
  TempDir dir;
  Fixture fx = make_fixture(dir, 3, 205);
  const std::string fit_out = dir.file("fit.json");
  REQUIRE(run_captured({"fit", "--input", fx.pairs_path, "--out", fit_out,
                        "--lambda", "1e-4", "--grad-tol", "1e-4",
                        "--max-iter", "500"})
              .code == 0);

  densewarp::Rng rng(206);
  auto [fresh, unused] = testsupport::random_beta_pair(fx.grid, rng);
  (void)unused;
  const std::string density_path = dir.file("fresh.csv");
  write_density_csv(density_path, fresh, "f", test_manifest());

  const std::string out = dir.file("predicted.csv");
  RunResult r = run_captured({"predict", "--fit", fit_out, "--density",
                              density_path, "--out", out});
  CHECK(r.code == 0);

  LoadedFit loaded = read_fit_json(fit_out);
  GridDensity expected = predict(fresh, loaded.fit);
  GridDensity written = read_density_csv(out);
  CHECK(max_abs_diff(written.values(), expected.values()) == 0.0);

  Grid small(101);
  GridDensity tiny = beta_density(small, 2.0, 3.0);
  const std::string tiny_path = dir.file("tiny.csv");
  write_density_csv(tiny_path, tiny, "f", test_manifest());
  CHECK(run_captured({"predict", "--fit", fit_out, "--density", tiny_path})
            .code == 2);
}

TEST_CASE("infer writes the confidence band next to the fit") {
  TempDir dir;
  Fixture fx = make_fixture(dir, 4, 207);
  const std::string fit_out = dir.file("fit.json");
  REQUIRE(run_captured({"fit", "--input", fx.pairs_path, "--out", fit_out,
                        "--lambda", "1e-4", "--grad-tol", "1e-4",
                        "--max-iter", "500"})
              .code == 0);

  const std::string ci_out = dir.file("ci.csv");
  const std::string plot_dir = dir.file("plots");
  RunResult r = run_captured({"infer", "--fit", fit_out, "--input",
                              fx.pairs_path, "--out", ci_out, "--plot-data",
                              plot_dir});
  CHECK(r.code == 0);
  REQUIRE(std::filesystem::exists(ci_out));
  std::ifstream stream(ci_out);
  std::string line;
  std::getline(stream, line);
  CHECK(line.rfind("# manifest: ", 0) == 0);
  std::getline(stream, line);
  CHECK(line == "omega,w_hat,w_lo,w_hi,beta_hat,beta_lo,beta_hi");
  CHECK(std::filesystem::exists(plot_dir + "/ci_band.csv"));
  CHECK(std::filesystem::exists(plot_dir + "/beta_curve.csv"));

  CHECK(run_captured({"infer", "--fit", fit_out, "--input", fx.pairs_path,
                      "--level", "1.5"})
            .code == 4);
}

TEST_CASE("simulate reproduces its emitted pairs deterministically") {
  TempDir dir;
  const std::string sim_out = dir.file("sim.json");
  const std::string pairs_dir = dir.file("emitted");
  RunResult r = run_captured({"simulate", "--n", "4", "--reps", "2",
                              "--grid-points", "201", "--seed", "5", "--out",
                              sim_out, "--emit-pairs", pairs_dir});
  CHECK(r.code == 0);
  CHECK(r.out.find("replications 2") != std::string::npos);

  std::ifstream stream(sim_out);
  nlohmann::ordered_json j = nlohmann::ordered_json::parse(stream);
  CHECK(j.at("replications").size() == 2);
  CHECK(j.at("summary").at("failures") == 0);

  REQUIRE(std::filesystem::exists(pairs_dir + "/true_beta.csv"));
  REQUIRE(std::filesystem::exists(pairs_dir + "/pairs_rep000.csv"));
  REQUIRE(std::filesystem::exists(pairs_dir + "/pairs_rep001.csv"));

  SimConfig config;
  config.grid = Grid(201);
  config.n = 4;
  config.replications = 2;
  config.seed = 5;
  config.fit_config = sim_fit_config();
  RegressionData expected = generate_replication_data(config, 0);
  LoadedPairs emitted =
      read_pairs(pairs_dir + "/pairs_rep000.csv", config.grid);
  REQUIRE(emitted.data.n_units() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(max_abs_diff(emitted.data.pairs()[i].f.values(),
                       expected.pairs()[i].f.values()) == 0.0);
    CHECK(max_abs_diff(emitted.data.pairs()[i].g.values(),
                       expected.pairs()[i].g.values()) == 0.0);
  }

  RunResult refit = run_captured({"fit", "--input",
                                  pairs_dir + "/pairs_rep000.csv", "--out",
                                  dir.file("refit.json"), "--lambda", "1e-4",
                                  "--grad-tol", "3e-5", "--max-iter",
                                  "1000"});
  CHECK(refit.code == 0);
  LoadedFit refitted = read_fit_json(dir.file("refit.json"));
  WarpingFunction true_beta = resolve_true_beta(config);
  CHECK(warp_distance(refitted.fit.beta_hat, true_beta) < 0.05);
}
