#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "densewarp/grid.hpp"

namespace densewarp {

//! Boundary-preserving diffeomorphism of [0, 1], stored as grid values of
//! beta and its derivative. The constructor pins beta(0)=0 and beta(1)=1,
//! requires strict monotonicity and a positive derivative, and rescales the
//! derivative to unit integral so that sqrt(beta') has exactly unit L2 norm.
class WarpingFunction {
 public:
  WarpingFunction(Grid grid, std::vector<double> beta_values,
                  std::vector<double> deriv_values);

  static WarpingFunction identity(const Grid& grid);

  const Grid& grid() const { return grid_; }
  const std::vector<double>& beta() const { return beta_; }
  const std::vector<double>& deriv() const { return deriv_; }
  std::size_t size() const { return beta_.size(); }

  //! beta evaluated between nodes by linear interpolation.
  double beta_at(double x) const;

 private:
  Grid grid_;
  std::vector<double> beta_;
  std::vector<double> deriv_;
};

enum class BasisKind { bspline };

//! Coefficients for a weight function w = sum alpha_k phi_k, where the
//! phi_k are the K+1 B-spline basis functions of the given order on an
//! open-uniform knot vector over [0, 1]. The family is a partition of
//! unity, so constants are represented exactly.
class BasisExpansion {
 public:
  BasisExpansion(std::size_t n_basis, std::vector<double> coefficients,
                 int order = 4);

  BasisKind kind() const { return BasisKind::bspline; }
  std::size_t n_basis() const { return n_basis_; }
  int order() const { return order_; }
  const std::vector<double>& coefficients() const { return coefficients_; }

 private:
  std::size_t n_basis_;
  int order_;
  std::vector<double> coefficients_;
};

//! Dense evaluation of all K+1 basis functions on a grid, row-major.
class BasisMatrix {
 public:
  BasisMatrix(std::size_t n_basis, int order, const Grid& grid);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t i, std::size_t k) const {
    return m_[i * cols_ + k];
  }
  const std::vector<double>& flat() const { return m_; }

  //! w_i = sum_k coeff[k] * basis(i, k) for every grid row.
  void multiply(std::span<const double> coeff, std::span<double> out) const;

 private:
  std::size_t rows_, cols_;
  std::vector<double> m_;
};

//! Weight function values sum alpha_k phi_k on the grid.
std::vector<double> bspline_eval(const BasisExpansion& e, const Grid& grid);

//! Solve D^2 beta = w . D beta for the warp with beta(0)=0, beta(1)=1:
//! beta(x) = int_0^x exp(W) / int_0^1 exp(W) with W the running integral
//! of w. exp is stabilized by max subtraction and floored so extreme
//! weights saturate instead of producing a flat (invalid) warp.
WarpingFunction weight_to_warp(const Grid& grid, std::span<const double> w);
WarpingFunction weight_to_warp(const BasisExpansion& e, const Grid& grid);

//! Group action (f, beta) -> (f o beta) beta', renormalized to absorb
//! quadrature drift.
GridDensity act(const GridDensity& f, const WarpingFunction& b);

//! Pointwise inverse warp on the same grid.
WarpingFunction invert(const WarpingFunction& b);

//! Composition b1 o b2.
WarpingFunction compose(const WarpingFunction& b1, const WarpingFunction& b2);

//! Square-root slope function sqrt(beta'), a unit vector in L2.
std::vector<double> srsf(const WarpingFunction& b);

//! Geodesic distance between warps: arccos of the inner product of their
//! square-root slope functions.
double warp_distance(const WarpingFunction& b1, const WarpingFunction& b2);

}  // namespace densewarp
