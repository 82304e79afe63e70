#include "densewarp/io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>

namespace densewarp {

namespace {

using nlohmann::ordered_json;

void append_num(std::string& out, double x) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  out.append(buf, ptr);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream stream(path, std::ios::binary);
  if (!stream) {
    throw StructuralError("cannot open '" + path + "' for writing");
  }
  stream.write(content.data(),
               static_cast<std::streamsize>(content.size()));
  if (!stream) {
    throw StructuralError("failed while writing '" + path + "'");
  }
}

std::string manifest_comment(const RunManifest& m) {
  return "# manifest: " + manifest_json(m).dump() + "\n";
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return std::string();
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

double parse_num(const std::string& token, std::size_t line_no,
                 const std::string& column) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  if (begin != end && *begin == '+') ++begin;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw StructuralError("line " + std::to_string(line_no) + ", column '" +
                          column + "': cannot parse '" + token +
                          "' as a finite number");
  }
  return value;
}

//! All rows of a CSV, comment and blank lines skipped, with the physical
//! line number of each kept for diagnostics.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

CsvTable read_csv(const std::string& path) {
  std::ifstream stream(path, std::ios::binary);
  if (!stream) {
    throw StructuralError("cannot open '" + path + "' for reading");
  }
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool first_content = true;
  while (std::getline(stream, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first_content && line.size() >= 3 && line[0] == '\xEF' &&
        line[1] == '\xBB' && line[2] == '\xBF') {
      line.erase(0, 3);
    }
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    if (first_content) {
      table.header = split_line(line);
      first_content = false;
      continue;
    }
    std::vector<std::string> row = split_line(line);
    if (row.size() != table.header.size()) {
      throw StructuralError(
          "line " + std::to_string(line_no) + ": expected " +
          std::to_string(table.header.size()) + " columns, got " +
          std::to_string(row.size()));
    }
    table.rows.push_back(std::move(row));
    table.line_numbers.push_back(line_no);
  }
  if (first_content) {
    throw StructuralError("'" + path + "' has no header row");
  }
  if (table.rows.empty()) {
    throw StructuralError("'" + path + "' has no data rows");
  }
  return table;
}

//! Numeric columns of a wide CSV whose first column is the omega grid.
struct WideCsv {
  Grid grid{2};
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
};

WideCsv read_wide_csv(const std::string& path) {
  CsvTable table = read_csv(path);
  if (table.header.empty() || table.header[0] != "omega") {
    throw StructuralError("'" + path +
                          "': first column of a densities file must be "
                          "'omega'");
  }
  if (table.header.size() < 2) {
    throw StructuralError("'" + path + "' has no value columns");
  }
  const std::size_t n = table.rows.size();
  if (n < 2) {
    throw StructuralError("'" + path + "' needs at least 2 grid rows");
  }

  WideCsv wide;
  wide.names.assign(table.header.begin() + 1, table.header.end());
  wide.columns.assign(wide.names.size(), std::vector<double>(n));
  std::vector<double> omega(n);
  for (std::size_t i = 0; i < n; ++i) {
    omega[i] = parse_num(table.rows[i][0], table.line_numbers[i], "omega");
    for (std::size_t k = 0; k < wide.names.size(); ++k) {
      wide.columns[k][i] =
          parse_num(table.rows[i][k + 1], table.line_numbers[i],
                    wide.names[k]);
    }
  }

  wide.grid = Grid(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(omega[i] - wide.grid[i]) > 1e-9) {
      throw StructuralError(
          "line " + std::to_string(table.line_numbers[i]) +
          ": omega must be the uniform grid on [0, 1] (expected " +
          std::to_string(wide.grid[i]) + ")");
    }
  }
  return wide;
}

GridDensity column_density(const Grid& grid, std::vector<double> values,
                           const std::string& name) {
  try {
    const double mass = integrate(grid, values);
    if (std::abs(mass - 1.0) <= kMassTolerance) {
      return GridDensity(grid, std::move(values));
    }
    return normalize(grid, std::move(values));
  } catch (const Error& e) {
    throw StructuralError("column '" + name + "': " + e.what());
  }
}

LoadedPairs read_pairs_wide(const std::string& path) {
  WideCsv wide = read_wide_csv(path);

  std::vector<std::string> order;
  std::map<std::string, std::size_t> f_col, g_col;
  for (std::size_t k = 0; k < wide.names.size(); ++k) {
    const std::string& name = wide.names[k];
    if (name.rfind("f_", 0) == 0) {
      const std::string id = name.substr(2);
      if (!f_col.emplace(id, k).second) {
        throw StructuralError("duplicate column '" + name + "'");
      }
      order.push_back(id);
    } else if (name.rfind("g_", 0) == 0) {
      if (!g_col.emplace(name.substr(2), k).second) {
        throw StructuralError("duplicate column '" + name + "'");
      }
    } else {
      throw StructuralError("column '" + name +
                            "' is neither f_<id> nor g_<id>");
    }
  }
  for (const auto& [id, k] : g_col) {
    if (!f_col.count(id)) {
      throw StructuralError("unit '" + id + "' has a g column but no f");
    }
  }

  std::vector<DensityPair> pairs;
  pairs.reserve(order.size());
  for (const std::string& id : order) {
    auto g_it = g_col.find(id);
    if (g_it == g_col.end()) {
      throw StructuralError("unit '" + id + "' has an f column but no g");
    }
    pairs.push_back(
        {column_density(wide.grid, std::move(wide.columns[f_col[id]]),
                        "f_" + id),
         column_density(wide.grid, std::move(wide.columns[g_it->second]),
                        "g_" + id)});
  }
  return LoadedPairs{RegressionData(wide.grid, std::move(pairs)),
                     std::move(order), "densities", std::nullopt,
                     std::nullopt};
}

LoadedPairs read_pairs_samples(const CsvTable& table, const Grid& grid) {
  auto find_column = [&](const std::string& name) {
    auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) {
      throw StructuralError("missing required column '" + name + "'");
    }
    return static_cast<std::size_t>(it - table.header.begin());
  };
  const std::size_t id_col = find_column("unit_id");
  const std::size_t var_col = find_column("variable");
  const std::size_t val_col = find_column("value");

  std::vector<std::string> order;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>
      units;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string& id = row[id_col];
    if (id.empty()) {
      throw StructuralError("line " + std::to_string(table.line_numbers[i]) +
                            ": empty unit_id");
    }
    const double value =
        parse_num(row[val_col], table.line_numbers[i], "value");
    auto [it, inserted] = units.try_emplace(id);
    if (inserted) order.push_back(id);
    if (row[var_col] == "f") {
      it->second.first.push_back(value);
    } else if (row[var_col] == "g") {
      it->second.second.push_back(value);
    } else {
      throw StructuralError("line " + std::to_string(table.line_numbers[i]) +
                            ": variable must be 'f' or 'g', got '" +
                            row[var_col] + "'");
    }
  }

  auto pooled_rescale = [&](bool predictor) -> std::optional<AffineMap> {
    std::vector<double> pooled;
    for (const auto& [id, fg] : units) {
      const auto& v = predictor ? fg.first : fg.second;
      pooled.insert(pooled.end(), v.begin(), v.end());
    }
    if (pooled.empty()) return std::nullopt;
    const auto [lo, hi] = std::minmax_element(pooled.begin(), pooled.end());
    if (*lo >= -1e-12 && *hi <= 1.0 + 1e-12) return std::nullopt;
    const AffineMap map = rescale_to_unit(pooled).second;
    for (auto& [id, fg] : units) {
      for (double& x : (predictor ? fg.first : fg.second)) {
        x = std::clamp(map.apply(x), 0.0, 1.0);
      }
    }
    return map;
  };
  std::optional<AffineMap> rescale_f = pooled_rescale(true);
  std::optional<AffineMap> rescale_g = pooled_rescale(false);

  std::vector<DensityPair> pairs;
  pairs.reserve(order.size());
  for (const std::string& id : order) {
    auto& [f_samples, g_samples] = units[id];
    if (f_samples.empty() || g_samples.empty()) {
      throw StructuralError("unit '" + id + "' is missing its " +
                            (f_samples.empty() ? "f" : "g") + " samples");
    }
    try {
      pairs.push_back(
          {kde({id, VariableTag::f, std::move(f_samples)}, grid),
           kde({id, VariableTag::g, std::move(g_samples)}, grid)});
    } catch (const Error& e) {
      throw StructuralError("unit '" + id + "': " + e.what());
    }
  }
  return LoadedPairs{RegressionData(grid, std::move(pairs)),
                     std::move(order), "samples", rescale_f, rescale_g};
}

}  // namespace

RunManifest make_manifest(std::string command, std::vector<std::string> args,
                          std::uint64_t seed, ordered_json config) {
  RunManifest m;
  m.command = std::move(command);
  m.args = std::move(args);
  m.seed = seed;
  m.config = std::move(config);
  m.timestamp = iso_utc_now();
  return m;
}

ordered_json manifest_json(const RunManifest& m) {
  return ordered_json{{"tool", "densewarp"},
                      {"tool_version", m.tool_version},
                      {"command", m.command},
                      {"args", m.args},
                      {"seed", m.seed},
                      {"config", m.config},
                      {"timestamp", m.timestamp}};
}

std::string iso_utc_now() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

LoadedPairs read_pairs(const std::string& path, const Grid& grid) {
  CsvTable table = read_csv(path);
  if (!table.header.empty() && table.header[0] == "omega") {
    return read_pairs_wide(path);
  }
  return read_pairs_samples(table, grid);
}

GridDensity read_density_csv(const std::string& path,
                             const std::optional<std::string>& column) {
  WideCsv wide = read_wide_csv(path);
  std::size_t k = 0;
  if (column) {
    auto it = std::find(wide.names.begin(), wide.names.end(), *column);
    if (it == wide.names.end()) {
      std::string available;
      for (const std::string& name : wide.names) {
        if (!available.empty()) available += ", ";
        available += name;
      }
      throw StructuralError("'" + path + "' has no column '" + *column +
                            "' (available: " + available + ")");
    }
    k = static_cast<std::size_t>(it - wide.names.begin());
  } else if (wide.names.size() != 1) {
    throw StructuralError("'" + path + "' has " +
                          std::to_string(wide.names.size()) +
                          " value columns; pass a column name to choose one");
  }
  return column_density(wide.grid, std::move(wide.columns[k]),
                        wide.names[k]);
}

void write_pairs_csv(const std::string& path, const RegressionData& data,
                     const std::vector<std::string>& unit_ids,
                     const RunManifest& m) {
  if (unit_ids.size() != data.n_units()) {
    throw StructuralError("unit id count does not match the data");
  }
  std::string out = manifest_comment(m);
  out += "omega";
  for (const std::string& id : unit_ids) {
    out += ",f_" + id + ",g_" + id;
  }
  out += '\n';
  const Grid& grid = data.grid();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    append_num(out, grid[i]);
    for (const DensityPair& pair : data.pairs()) {
      out += ',';
      append_num(out, pair.f.values()[i]);
      out += ',';
      append_num(out, pair.g.values()[i]);
    }
    out += '\n';
  }
  write_file(path, out);
}

void write_density_csv(const std::string& path, const GridDensity& f,
                       const std::string& name, const RunManifest& m) {
  std::string out = manifest_comment(m);
  out += "omega," + name + "\n";
  const Grid& grid = f.grid();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    append_num(out, grid[i]);
    out += ',';
    append_num(out, f.values()[i]);
    out += '\n';
  }
  write_file(path, out);
}

void write_warp_csv(const std::string& path, const WarpingFunction& beta,
                    const RunManifest& m) {
  std::string out = manifest_comment(m);
  out += "omega,beta,beta_prime\n";
  const Grid& grid = beta.grid();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    append_num(out, grid[i]);
    out += ',';
    append_num(out, beta.beta()[i]);
    out += ',';
    append_num(out, beta.deriv()[i]);
    out += '\n';
  }
  write_file(path, out);
}

void write_ci_csv(const std::string& path, const PointwiseCI& w_ci,
                  const PointwiseCI& beta_ci, const RunManifest& m) {
  if (w_ci.indices != beta_ci.indices) {
    throw StructuralError("weight and warp bands cover different indices");
  }
  std::string out = manifest_comment(m);
  out += "omega,w_hat,w_lo,w_hi,beta_hat,beta_lo,beta_hi\n";
  for (std::size_t pos = 0; pos < w_ci.indices.size(); ++pos) {
    append_num(out, w_ci.grid[w_ci.indices[pos]]);
    out += ',';
    append_num(out, w_ci.estimate[pos]);
    out += ',';
    append_num(out, w_ci.lower[pos]);
    out += ',';
    append_num(out, w_ci.upper[pos]);
    out += ',';
    append_num(out, beta_ci.estimate[pos]);
    out += ',';
    append_num(out, beta_ci.lower[pos]);
    out += ',';
    append_num(out, beta_ci.upper[pos]);
    out += '\n';
  }
  write_file(path, out);
}

ordered_json fit_config_json(const FitConfig& config) {
  return ordered_json{{"n_basis", config.n_basis},
                      {"spline_order", config.spline_order},
                      {"lambda", config.lambda},
                      {"grad_tol", config.grad_tol},
                      {"max_iter", config.max_iter},
                      {"fd_step", config.fd_step},
                      {"armijo_slope", config.armijo_slope},
                      {"backtrack_factor", config.backtrack_factor},
                      {"lambda_grid", config.lambda_grid},
                      {"cv_folds", config.cv_folds},
                      {"cv_seed", config.cv_seed}};
}

ordered_json sim_config_json(const SimConfig& config) {
  return ordered_json{{"grid_points", config.grid.size()},
                      {"n", config.n},
                      {"m1", config.m1},
                      {"m2", config.m2},
                      {"noise_halfwidth", config.noise_halfwidth},
                      {"predictor_a", config.predictor_a},
                      {"predictor_b", config.predictor_b},
                      {"predictor_jitter", config.predictor_jitter},
                      {"true_weight", config.true_weight},
                      {"replications", config.replications},
                      {"seed", config.seed},
                      {"fit", fit_config_json(config.fit_config)}};
}

void write_fit_json(const std::string& path, const RunManifest& m,
                    const WarpFit& fit, const Grid& grid,
                    const std::optional<CvResult>& cv,
                    const ordered_json& input_info) {
  ordered_json j{
      {"manifest", manifest_json(m)},
      {"grid", {{"n_points", grid.size()}}},
      {"n_basis", fit.coefficients.n_basis()},
      {"spline_order", fit.coefficients.order()},
      {"lambda", fit.lambda_used},
      {"coefficients", fit.coefficients.coefficients()},
      {"converged", fit.converged},
      {"iterations", fit.iterations},
      {"grad_norm", fit.grad_norm},
      {"objective_trace", fit.objective_trace},
      {"per_unit_hellinger", fit.per_unit_hellinger},
      {"beta", fit.beta_hat.beta()},
      {"beta_prime", fit.beta_hat.deriv()},
  };
  if (cv) {
    j["cv"] = ordered_json{{"lambda_best", cv->lambda_best},
                           {"lambdas", cv->lambdas},
                           {"mean_scores", cv->mean_scores},
                           {"seed", cv->seed}};
  } else {
    j["cv"] = nullptr;
  }
  j["input"] = input_info;
  write_file(path, j.dump(2) + "\n");
}

LoadedFit read_fit_json(const std::string& path) {
  std::ifstream stream(path, std::ios::binary);
  if (!stream) {
    throw StructuralError("cannot open '" + path + "' for reading");
  }
  try {
    const ordered_json j = ordered_json::parse(stream);
    const Grid grid(j.at("grid").at("n_points").get<std::size_t>());
    BasisExpansion coeff(j.at("n_basis").get<std::size_t>(),
                         j.at("coefficients").get<std::vector<double>>(),
                         j.at("spline_order").get<int>());
    WarpingFunction beta_hat = weight_to_warp(coeff, grid);
    WarpFit fit{std::move(coeff),
                std::move(beta_hat),
                j.at("lambda").get<double>(),
                j.at("converged").get<bool>(),
                j.at("iterations").get<std::size_t>(),
                j.at("grad_norm").get<double>(),
                j.at("objective_trace").get<std::vector<double>>(),
                j.at("per_unit_hellinger").get<std::vector<double>>()};
    return LoadedFit{grid, std::move(fit)};
  } catch (const nlohmann::json::exception& e) {
    throw StructuralError("fit file '" + path + "': " + e.what());
  }
}

void write_simresult_json(const std::string& path, const RunManifest& m,
                          const SimConfig& config, const SimResult& result) {
  ordered_json reps = ordered_json::array();
  for (const ReplicationRecord& rec : result.replications) {
    reps.push_back(ordered_json{
        {"index", rec.index},
        {"warp_distance", rec.warp_distance},
        {"mean_hellinger", rec.mean_hellinger},
        {"mean_hellinger_baseline", rec.mean_hellinger_baseline},
        {"converged", rec.converged},
        {"failed", rec.failed},
        {"message", rec.message}});
  }
  const ordered_json j{
      {"manifest", manifest_json(m)},
      {"config", sim_config_json(config)},
      {"summary",
       {{"mean_warp_distance", result.mean_warp_distance},
        {"se_warp_distance", result.se_warp_distance},
        {"mean_hellinger", result.mean_hellinger},
        {"se_hellinger", result.se_hellinger},
        {"mean_hellinger_baseline", result.mean_hellinger_baseline},
        {"failures", result.failures}}},
      {"replications", reps}};
  write_file(path, j.dump(2) + "\n");
}

void emit_plot_data(
    const std::string& out_dir, const RegressionData& data,
    const std::vector<std::string>& unit_ids, const WarpFit& fit,
    const std::optional<std::pair<PointwiseCI, PointwiseCI>>& ci,
    const RunManifest& m) {
  if (unit_ids.size() != data.n_units()) {
    throw StructuralError("unit id count does not match the data");
  }
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  const Grid& grid = data.grid();

  std::string curve = manifest_comment(m);
  curve += "omega,beta\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    append_num(curve, grid[i]);
    curve += ',';
    append_num(curve, fit.beta_hat.beta()[i]);
    curve += '\n';
  }
  write_file((dir / "beta_curve.csv").string(), curve);

  std::vector<GridDensity> predicted;
  predicted.reserve(data.n_units());
  for (const DensityPair& pair : data.pairs()) {
    predicted.push_back(predict(pair.f, fit));
  }
  std::string overlays = manifest_comment(m);
  overlays += "omega";
  for (const std::string& id : unit_ids) {
    overlays += ",f_" + id + ",g_" + id + ",ghat_" + id;
  }
  overlays += '\n';
  for (std::size_t i = 0; i < grid.size(); ++i) {
    append_num(overlays, grid[i]);
    for (std::size_t u = 0; u < data.n_units(); ++u) {
      overlays += ',';
      append_num(overlays, data.pairs()[u].f.values()[i]);
      overlays += ',';
      append_num(overlays, data.pairs()[u].g.values()[i]);
      overlays += ',';
      append_num(overlays, predicted[u].values()[i]);
    }
    overlays += '\n';
  }
  write_file((dir / "density_overlays.csv").string(), overlays);

  if (ci) {
    write_ci_csv((dir / "ci_band.csv").string(), ci->first, ci->second, m);
  }
}

}  // namespace densewarp
