#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "densewarp/estimator.hpp"
#include "densewarp/grid.hpp"
#include "densewarp/inference.hpp"
#include "densewarp/simulation.hpp"
#include "densewarp/warping.hpp"

namespace densewarp {

inline constexpr const char* kToolVersion = "0.1.0";

//! Provenance block carried by every output file: JSON outputs embed it,
//! CSV outputs hold it in a leading "# manifest:" comment line.
struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  std::uint64_t seed = 0;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::string tool_version = kToolVersion;
  std::string timestamp;
};

RunManifest make_manifest(std::string command, std::vector<std::string> args,
                          std::uint64_t seed, nlohmann::ordered_json config);
nlohmann::ordered_json manifest_json(const RunManifest& m);
std::string iso_utc_now();

//! Parsed regression input. A densities file brings its own grid; a samples
//! file is smoothed onto the requested grid, with any affine rescale of the
//! raw samples recorded for back-transformation.
struct LoadedPairs {
  RegressionData data;
  std::vector<std::string> unit_ids;
  std::string format;
  std::optional<AffineMap> rescale_f;
  std::optional<AffineMap> rescale_g;
};

//! Read either input format, detected from the header: wide densities
//! (omega, f_<id>, g_<id>, ...) or long samples (unit_id, variable, value).
LoadedPairs read_pairs(const std::string& path, const Grid& grid);

//! Read one density column from a wide CSV. column selects among several
//! value columns; a file with a single value column needs no hint.
GridDensity read_density_csv(const std::string& path,
                             const std::optional<std::string>& column = {});

void write_pairs_csv(const std::string& path, const RegressionData& data,
                     const std::vector<std::string>& unit_ids,
                     const RunManifest& m);
void write_density_csv(const std::string& path, const GridDensity& f,
                       const std::string& name, const RunManifest& m);
void write_warp_csv(const std::string& path, const WarpingFunction& beta,
                    const RunManifest& m);
void write_ci_csv(const std::string& path, const PointwiseCI& w_ci,
                  const PointwiseCI& beta_ci, const RunManifest& m);

nlohmann::ordered_json fit_config_json(const FitConfig& config);
nlohmann::ordered_json sim_config_json(const SimConfig& config);

void write_fit_json(const std::string& path, const RunManifest& m,
                    const WarpFit& fit, const Grid& grid,
                    const std::optional<CvResult>& cv,
                    const nlohmann::ordered_json& input_info);

struct LoadedFit {
  Grid grid;
  WarpFit fit;
};

//! Rebuild a fit from fit.json; the warp is reconstructed from the stored
//! basis coefficients.
LoadedFit read_fit_json(const std::string& path);

void write_simresult_json(const std::string& path, const RunManifest& m,
                          const SimConfig& config, const SimResult& result);

//! Plot-ready CSVs in out_dir: the fitted warp curve, per-unit density
//! overlays (f, g, predicted g), and the confidence band when given.
void emit_plot_data(
    const std::string& out_dir, const RegressionData& data,
    const std::vector<std::string>& unit_ids, const WarpFit& fit,
    const std::optional<std::pair<PointwiseCI, PointwiseCI>>& ci,
    const RunManifest& m);

}  // namespace densewarp
