#include "densewarp/warping.hpp"

#include <algorithm>
#include <cmath>

namespace densewarp {

namespace {

constexpr double kExpFloor = 1e-10;
constexpr double kEndpointTol = 1e-9;

//! Linear interpolation of grid values at x in [0, 1] (uniform spacing).
double lerp_uniform(const std::vector<double>& v, double x) {
  const std::size_t n = v.size();
  const double pos = std::clamp(x, 0.0, 1.0) * static_cast<double>(n - 1);
  std::size_t k = static_cast<std::size_t>(pos);
  if (k >= n - 1) k = n - 2;
  const double t = pos - static_cast<double>(k);
  return v[k] + t * (v[k + 1] - v[k]);
}

}  // namespace

WarpingFunction::WarpingFunction(Grid grid, std::vector<double> beta_values,
                                 std::vector<double> deriv_values)
    : grid_(std::move(grid)),
      beta_(std::move(beta_values)),
      deriv_(std::move(deriv_values)) {
  const std::size_t n = grid_.size();
  if (beta_.size() != n || deriv_.size() != n) {
    throw StructuralError("warp value vectors do not match the grid length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(beta_[i]) || !std::isfinite(deriv_[i])) {
      throw StructuralError("warp contains a non-finite value at index " +
                            std::to_string(i));
    }
    if (!(deriv_[i] > 0.0)) {
      throw StructuralError("warp derivative is not positive at index " +
                            std::to_string(i));
    }
  }
  if (std::abs(beta_.front()) > kEndpointTol ||
      std::abs(beta_.back() - 1.0) > kEndpointTol) {
    throw StructuralError("warp does not preserve the boundary: beta(0)=" +
                          std::to_string(beta_.front()) + ", beta(1)=" +
                          std::to_string(beta_.back()));
  }
  beta_.front() = 0.0;
  beta_.back() = 1.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (!(beta_[i + 1] > beta_[i])) {
      throw StructuralError("warp is not strictly increasing between indices " +
                            std::to_string(i) + " and " + std::to_string(i + 1));
    }
  }
  const double mass = integrate(grid_, deriv_);
  for (double& d : deriv_) d /= mass;
}

WarpingFunction WarpingFunction::identity(const Grid& grid) {
  return WarpingFunction(grid, grid.points(),
                         std::vector<double>(grid.size(), 1.0));
}

double WarpingFunction::beta_at(double x) const {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw DomainError("warp evaluation point " + std::to_string(x) +
                      " is outside [0, 1]");
  }
  return lerp_uniform(beta_, x);
}

BasisExpansion::BasisExpansion(std::size_t n_basis,
                               std::vector<double> coefficients, int order)
    : n_basis_(n_basis), order_(order), coefficients_(std::move(coefficients)) {
  if (order_ < 2) {
    throw ConfigError("spline order must be at least 2, got " +
                      std::to_string(order_));
  }
  if (n_basis_ + 1 < static_cast<std::size_t>(order_)) {
    throw ConfigError("n_basis=" + std::to_string(n_basis_) +
                      " is too small for order " + std::to_string(order_) +
                      " (need n_basis >= order-1)");
  }
  if (coefficients_.size() != n_basis_ + 1) {
    throw StructuralError("expected " + std::to_string(n_basis_ + 1) +
                          " coefficients, got " +
                          std::to_string(coefficients_.size()));
  }
  for (double c : coefficients_) {
    if (!std::isfinite(c)) {
      throw StructuralError("basis coefficient is not finite");
    }
  }
}

BasisMatrix::BasisMatrix(std::size_t n_basis, int order, const Grid& grid)
    : rows_(grid.size()), cols_(n_basis + 1), m_(rows_ * cols_, 0.0) {
  const std::size_t p = static_cast<std::size_t>(order);
  if (cols_ < p) {
    throw ConfigError("n_basis too small for the spline order");
  }
  // Open-uniform knot vector: `order` copies of 0 and 1, interior knots
  // uniform so that there are exactly cols_ basis functions.
  const std::size_t n_knots = cols_ + p;
  std::vector<double> t(n_knots);
  const std::size_t n_interior = cols_ - p;
  for (std::size_t i = 0; i < p; ++i) t[i] = 0.0;
  for (std::size_t j = 1; j <= n_interior; ++j) {
    t[p - 1 + j] = static_cast<double>(j) / static_cast<double>(n_interior + 1);
  }
  for (std::size_t i = n_knots - p; i < n_knots; ++i) t[i] = 1.0;

  std::vector<double> N(p), left(p), right(p);
  for (std::size_t row = 0; row < rows_; ++row) {
    const double x = grid[row];
    // Knot span index: largest mu with t[mu] <= x < t[mu+1]; x = 1 falls in
    // the last nondegenerate span.
    std::size_t mu = cols_ - 1;
    if (x < 1.0) {
      mu = p - 1;
      while (mu + 1 < cols_ && t[mu + 1] <= x) ++mu;
    }
    N[0] = 1.0;
    for (std::size_t j = 1; j < p; ++j) {
      left[j] = x - t[mu + 1 - j];
      right[j] = t[mu + j] - x;
      double saved = 0.0;
      for (std::size_t r = 0; r < j; ++r) {
        const double tmp = N[r] / (right[r + 1] + left[j - r]);
        N[r] = saved + right[r + 1] * tmp;
        saved = left[j - r] * tmp;
      }
      N[j] = saved;
    }
    for (std::size_t r = 0; r < p; ++r) {
      m_[row * cols_ + (mu + 1 - p + r)] = N[r];
    }
  }
}

void BasisMatrix::multiply(std::span<const double> coeff,
                           std::span<double> out) const {
  if (coeff.size() != cols_ || out.size() != rows_) {
    throw StructuralError("basis multiply operand sizes do not match");
  }
  for (std::size_t i = 0; i < rows_; ++i) {
    const double* row = m_.data() + i * cols_;
    double s = 0.0;
    for (std::size_t k = 0; k < cols_; ++k) s += row[k] * coeff[k];
    out[i] = s;
  }
}

std::vector<double> bspline_eval(const BasisExpansion& e, const Grid& grid) {
  BasisMatrix basis(e.n_basis(), e.order(), grid);
  std::vector<double> out(grid.size());
  basis.multiply(e.coefficients(), out);
  return out;
}

WarpingFunction weight_to_warp(const Grid& grid, std::span<const double> w) {
  if (w.size() != grid.size()) {
    throw StructuralError("weight vector does not match the grid length");
  }
  for (double x : w) {
    if (!std::isfinite(x)) {
      throw DomainError("weight function contains a non-finite value");
    }
  }
  std::vector<double> W = cumulative_trapezoid(grid, w);
  const double w_max = *std::max_element(W.begin(), W.end());
  std::vector<double> e(W.size());
  for (std::size_t i = 0; i < W.size(); ++i) {
    e[i] = std::max(std::exp(W[i] - w_max), kExpFloor);
  }
  std::vector<double> acc = cumulative_trapezoid(grid, e);
  const double total = acc.back();
  std::vector<double> beta(acc.size());
  std::vector<double> deriv(e.size());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    beta[i] = acc[i] / total;
    deriv[i] = e[i] / total;
  }
  return WarpingFunction(grid, std::move(beta), std::move(deriv));
}

WarpingFunction weight_to_warp(const BasisExpansion& e, const Grid& grid) {
  return weight_to_warp(grid, bspline_eval(e, grid));
}

GridDensity act(const GridDensity& f, const WarpingFunction& b) {
  if (!(f.grid() == b.grid())) {
    throw StructuralError("act: density and warp live on different grids");
  }
  const auto& beta = b.beta();
  const auto& deriv = b.deriv();
  const auto& fv = f.values();
  std::vector<double> out(fv.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = lerp_uniform(fv, beta[i]) * deriv[i];
  }
  return normalize(f.grid(), std::move(out));
}

WarpingFunction invert(const WarpingFunction& b) {
  const Grid& grid = b.grid();
  const auto& beta = b.beta();
  const auto& pts = grid.points();
  const std::size_t n = beta.size();
  std::vector<double> inv(n), inv_deriv(n);
  std::size_t k = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double target = pts[j];
    while (k + 2 < n && beta[k + 1] < target) ++k;
    const double den = beta[k + 1] - beta[k];
    const double t = std::clamp((target - beta[k]) / den, 0.0, 1.0);
    const double x = pts[k] + t * grid.spacing();
    inv[j] = x;
    inv_deriv[j] = 1.0 / lerp_uniform(b.deriv(), x);
  }
  inv.front() = 0.0;
  inv.back() = 1.0;
  return WarpingFunction(grid, std::move(inv), std::move(inv_deriv));
}

WarpingFunction compose(const WarpingFunction& b1, const WarpingFunction& b2) {
  if (!(b1.grid() == b2.grid())) {
    throw StructuralError("compose: warps live on different grids");
  }
  const std::size_t n = b1.size();
  std::vector<double> beta(n), deriv(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double inner_val = b2.beta()[i];
    beta[i] = lerp_uniform(b1.beta(), inner_val);
    deriv[i] = lerp_uniform(b1.deriv(), inner_val) * b2.deriv()[i];
  }
  return WarpingFunction(b1.grid(), std::move(beta), std::move(deriv));
}

std::vector<double> srsf(const WarpingFunction& b) {
  std::vector<double> out(b.size());
  const auto& d = b.deriv();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(d[i]);
  return out;
}

double warp_distance(const WarpingFunction& b1, const WarpingFunction& b2) {
  if (!(b1.grid() == b2.grid())) {
    throw StructuralError("warp_distance: warps live on different grids");
  }
  const auto& d1 = b1.deriv();
  const auto& d2 = b2.deriv();
  const std::size_t n = d1.size();
  auto term = [&](std::size_t i) { return std::sqrt(d1[i] * d2[i]); };
  double s = 0.5 * (term(0) + term(n - 1));
  for (std::size_t i = 1; i + 1 < n; ++i) s += term(i);
  return std::acos(std::clamp(s * b1.grid().spacing(), 0.0, 1.0));
}

}  // namespace densewarp
