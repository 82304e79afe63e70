#pragma once

// Internal fast path shared by the estimator and the sandwich variance:
// turn a weight function into a warp and accumulate per-unit squared
// Hellinger losses without constructing the public value types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "densewarp/estimator.hpp"
#include "densewarp/grid.hpp"

namespace densewarp::detail {

struct WarpBuffers {
  std::vector<double> running;  // running integral of w
  std::vector<double> expw;     // floored exp(W - max W)
  std::vector<double> beta;
  std::vector<double> deriv;

  void resize(std::size_t n) {
    running.resize(n);
    expw.resize(n);
    beta.resize(n);
    deriv.resize(n);
  }
};

constexpr double kWarpExpFloor = 1e-10;

inline void warp_from_weights(const Grid& grid, std::span<const double> w,
                              WarpBuffers& buf) {
  const std::size_t n = w.size();
  buf.resize(n);
  const double half_h = 0.5 * grid.spacing();
  double acc = 0.0;
  double w_max = 0.0;
  buf.running[0] = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    acc += half_h * (w[i - 1] + w[i]);
    buf.running[i] = acc;
    w_max = std::max(w_max, acc);
  }
  for (std::size_t i = 0; i < n; ++i) {
    buf.expw[i] = std::max(std::exp(buf.running[i] - w_max), kWarpExpFloor);
  }
  acc = 0.0;
  buf.beta[0] = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    acc += half_h * (buf.expw[i - 1] + buf.expw[i]);
    buf.beta[i] = acc;
  }
  const double total = buf.beta[n - 1];
  const double inv_total = 1.0 / total;
  for (std::size_t i = 0; i < n; ++i) {
    buf.beta[i] *= inv_total;
    buf.deriv[i] = buf.expw[i] * inv_total;
  }
  buf.beta[n - 1] = 1.0;
}

//! Borrowed views of one regression data set plus precomputed floored
//! response roots.
class PairLoss {
 public:
  explicit PairLoss(const RegressionData& data)
      : grid_(data.grid()), n_(data.grid().size()) {
    const std::size_t units = data.n_units();
    f_.reserve(units);
    sqrt_g_.resize(units);
    warped_.resize(n_);
    for (std::size_t i = 0; i < units; ++i) {
      f_.push_back(data.pairs()[i].f.values().data());
      const auto& g = data.pairs()[i].g.values();
      sqrt_g_[i].resize(n_);
      for (std::size_t j = 0; j < n_; ++j) {
        sqrt_g_[i][j] = std::sqrt(std::max(g[j], kDensityFloor));
      }
    }
  }

  std::size_t n_units() const { return f_.size(); }
  const Grid& grid() const { return grid_; }

  //! Squared Hellinger distance between unit i's response and its warped,
  //! renormalized predictor.
  double unit_h2(std::size_t i, std::span<const double> beta,
                 std::span<const double> deriv) {
    const double* f = f_[i];
    const double scale = static_cast<double>(n_ - 1);
    double mass = 0.0;
    for (std::size_t j = 0; j < n_; ++j) {
      const double pos = beta[j] * scale;
      std::size_t k = static_cast<std::size_t>(pos);
      if (k >= n_ - 1) k = n_ - 2;
      const double t = pos - static_cast<double>(k);
      const double v = (f[k] + t * (f[k + 1] - f[k])) * deriv[j];
      warped_[j] = v;
      mass += (j == 0 || j == n_ - 1) ? 0.5 * v : v;
    }
    mass *= grid_.spacing();
    const double* sg = sqrt_g_[i].data();
    double bc = 0.0;
    for (std::size_t j = 0; j < n_; ++j) {
      const double v = std::sqrt(std::max(warped_[j], kDensityFloor)) * sg[j];
      bc += (j == 0 || j == n_ - 1) ? 0.5 * v : v;
    }
    bc *= grid_.spacing() / std::sqrt(mass);
    return 1.0 - std::min(bc, 1.0);
  }

  double mean_h2(std::span<const double> beta, std::span<const double> deriv,
                 std::vector<double>* per_unit = nullptr) {
    const std::size_t units = f_.size();
    if (per_unit) per_unit->resize(units);
    double s = 0.0;
    for (std::size_t i = 0; i < units; ++i) {
      const double h2 = unit_h2(i, beta, deriv);
      if (per_unit) (*per_unit)[i] = h2;
      s += h2;
    }
    return s / static_cast<double>(units);
  }

 private:
  Grid grid_;
  std::size_t n_;
  std::vector<const double*> f_;
  std::vector<std::vector<double>> sqrt_g_;
  std::vector<double> warped_;
};

//! Trapezoid integral of w^2 over the grid.
inline double weight_penalty(const Grid& grid, std::span<const double> w) {
  const std::size_t n = w.size();
  double s = 0.5 * (w[0] * w[0] + w[n - 1] * w[n - 1]);
  for (std::size_t j = 1; j + 1 < n; ++j) s += w[j] * w[j];
  return s * grid.spacing();
}

}  // namespace densewarp::detail
