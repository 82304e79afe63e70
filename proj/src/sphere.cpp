#include "densewarp/sphere.hpp"

#include <algorithm>
#include <cmath>

namespace densewarp {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) {
    throw StructuralError(std::string(what) + ": operands live on different grids (" +
                          std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + " points)");
  }
}

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

}  // namespace

double inner(const Grid& grid, std::span<const double> a,
             std::span<const double> b) {
  if (a.size() != grid.size() || b.size() != grid.size()) {
    throw StructuralError("inner product operands do not match the grid length");
  }
  const std::size_t n = a.size();
  double s = 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1]);
  for (std::size_t i = 1; i + 1 < n; ++i) s += a[i] * b[i];
  return s * grid.spacing();
}

double norm_l2(const Grid& grid, std::span<const double> a) {
  return std::sqrt(std::max(0.0, inner(grid, a, a)));
}

HalfDensity::HalfDensity(Grid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    throw StructuralError("half density has " + std::to_string(values_.size()) +
                          " values on a grid of " + std::to_string(grid_.size()) +
                          " points");
  }
  double neg_sq = 0.0;
  for (double v : values_) {
    if (!std::isfinite(v)) {
      throw StructuralError("half density contains a non-finite value");
    }
    if (v < 0.0) neg_sq += v * v;
  }
  if (neg_sq > 0.0) {
    if (std::sqrt(neg_sq * grid_.spacing()) > 1e-6) {
      throw StructuralError("half density has substantially negative values");
    }
    for (double& v : values_) v = std::max(v, 0.0);
  }
  const double nrm = norm_l2(grid_, values_);
  if (std::abs(nrm - 1.0) > kMassTolerance) {
    throw StructuralError("half density has norm " + std::to_string(nrm) +
                          ", expected 1 within 1e-6");
  }
  for (double& v : values_) v /= nrm;
}

TangentVector::TangentVector(HalfDensity base, std::vector<double> values)
    : base_(std::move(base)), values_(std::move(values)) {
  if (values_.size() != base_.size()) {
    throw StructuralError("tangent vector length does not match its base point");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) {
      throw StructuralError("tangent vector contains a non-finite value");
    }
  }
  const double ip = inner(grid(), values_, base_.values());
  const double scale = std::max(1.0, norm_l2(grid(), values_));
  if (std::abs(ip) > 1e-8 * scale) {
    throw StructuralError("tangent vector is not orthogonal to its base point (<v,p> = " +
                          std::to_string(ip) + ")");
  }
}

double TangentVector::norm() const { return norm_l2(grid(), values_); }

HalfDensity srf(const GridDensity& f) {
  std::vector<double> vals(f.size());
  const auto& fv = f.values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    vals[i] = std::sqrt(std::max(fv[i], kDensityFloor));
  }
  return HalfDensity(f.grid(), std::move(vals));
}

GridDensity srf_inverse(const HalfDensity& p) {
  std::vector<double> vals(p.size());
  const auto& pv = p.values();
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = pv[i] * pv[i];
  return normalize(p.grid(), std::move(vals));
}

HalfDensity exp_map(const TangentVector& v) {
  const double nv = v.norm();
  if (nv >= kPi) {
    throw DomainError("exp_map step of length " + std::to_string(nv) +
                      " reaches the cut locus (needs |v| < pi)");
  }
  if (nv < 1e-300) return v.base();
  const double c = std::cos(nv);
  const double s = std::sin(nv) / nv;
  const auto& pv = v.base().values();
  const auto& tv = v.values();
  std::vector<double> out(pv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * pv[i] + s * tv[i];
  return HalfDensity(v.grid(), std::move(out));
}

TangentVector log_map(const HalfDensity& p, const HalfDensity& q) {
  require_same_grid(p.grid(), q.grid(), "log_map");
  const double ip = clamp_unit(inner(p.grid(), p.values(), q.values()));
  if (ip <= -1.0 + 1e-9) {
    throw DomainError("log_map is undefined for antipodal points");
  }
  const double theta = std::acos(ip);
  std::vector<double> out(p.size(), 0.0);
  if (theta > 1e-12) {
    const double scale = theta / std::sin(theta);
    const auto& pv = p.values();
    const auto& qv = q.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = scale * (qv[i] - ip * pv[i]);
    }
  }
  return TangentVector(p, std::move(out));
}

GridDensity geodesic(const GridDensity& f1, const GridDensity& f2, double tau) {
  require_same_grid(f1.grid(), f2.grid(), "geodesic");
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw DomainError("geodesic parameter " + std::to_string(tau) +
                      " is outside [0, 1]");
  }
  if (tau == 0.0) return f1;
  if (tau == 1.0) return f2;
  const HalfDensity p1 = srf(f1);
  const HalfDensity p2 = srf(f2);
  const double ip = clamp_unit(inner(f1.grid(), p1.values(), p2.values()));
  const double theta = std::acos(ip);
  if (theta <= 1e-10) return f1;
  const double inv_sin = 1.0 / std::sin(theta);
  const double a = std::sin((1.0 - tau) * theta) * inv_sin;
  const double b = std::sin(tau * theta) * inv_sin;
  std::vector<double> vals(f1.size());
  for (std::size_t i = 0; i < vals.size(); ++i) {
    vals[i] = a * p1.values()[i] + b * p2.values()[i];
  }
  return srf_inverse(HalfDensity(f1.grid(), std::move(vals)));
}

TangentVector parallel_transport(const TangentVector& v, const HalfDensity& p2) {
  require_same_grid(v.grid(), p2.grid(), "parallel_transport");
  const auto& p1v = v.base().values();
  const auto& p2v = p2.values();
  std::vector<double> s(p1v.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = p1v[i] + p2v[i];
  const double ss = inner(v.grid(), s, s);
  if (ss < 1e-12) {
    throw DomainError("parallel_transport is undefined between antipodal points");
  }
  const double coef = 2.0 * inner(v.grid(), v.values(), p2v) / ss;
  std::vector<double> out(v.values());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= coef * s[i];
  return TangentVector(p2, std::move(out));
}

double bhattacharyya(const GridDensity& f1, const GridDensity& f2) {
  require_same_grid(f1.grid(), f2.grid(), "bhattacharyya");
  const auto& a = f1.values();
  const auto& b = f2.values();
  const std::size_t n = a.size();
  auto term = [&](std::size_t i) {
    return std::sqrt(std::max(a[i], kDensityFloor) *
                     std::max(b[i], kDensityFloor));
  };
  double s = 0.5 * (term(0) + term(n - 1));
  for (std::size_t i = 1; i + 1 < n; ++i) s += term(i);
  return std::clamp(s * f1.grid().spacing(), 0.0, 1.0);
}

double hellinger(const GridDensity& f1, const GridDensity& f2) {
  return std::sqrt(std::max(0.0, 1.0 - bhattacharyya(f1, f2)));
}

double fisher_rao_distance(const GridDensity& f1, const GridDensity& f2) {
  return std::acos(bhattacharyya(f1, f2));
}

double wasserstein_1d(const GridDensity& f1, const GridDensity& f2,
                      std::size_t n_quantiles) {
  require_same_grid(f1.grid(), f2.grid(), "wasserstein_1d");
  if (n_quantiles < 1) {
    throw ConfigError("wasserstein_1d needs at least one quantile level");
  }
  const Grid& grid = f1.grid();
  std::vector<double> c1 = cumulative_trapezoid(grid, f1.values());
  std::vector<double> c2 = cumulative_trapezoid(grid, f2.values());
  for (double& x : c1) x /= c1.back();
  for (double& x : c2) x /= c2.back();

  const auto& pts = grid.points();
  auto invert = [&](const std::vector<double>& cdf, double p,
                    std::size_t& k) -> double {
    while (k + 2 < cdf.size() && cdf[k + 1] < p) ++k;
    const double den = cdf[k + 1] - cdf[k];
    if (den <= 0.0) return pts[k];
    const double t = std::clamp((p - cdf[k]) / den, 0.0, 1.0);
    return pts[k] + t * grid.spacing();
  };

  double acc = 0.0;
  std::size_t k1 = 0, k2 = 0;
  for (std::size_t j = 0; j < n_quantiles; ++j) {
    const double p = (static_cast<double>(j) + 0.5) / static_cast<double>(n_quantiles);
    const double d = invert(c1, p, k1) - invert(c2, p, k2);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(n_quantiles));
}

namespace {

// Integral over [0, L] of (p + q t) * log(r + s t) dt, with r + s t > 0 on
// (0, L]. Endpoint zeros of the log argument are admissible (y log y -> 0).
double integral_linear_log(double p, double q, double r, double s, double L) {
  const double span = std::abs(s) * L;
  if (span <= 1e-9 * (std::abs(r) + span)) {
    const double mid = r + 0.5 * s * L;
    return (p * L + 0.5 * q * L * L) * std::log(std::max(mid, 1e-300));
  }
  const double A = p - q * r / s;
  const double B = q / s;
  auto F = [&](double y) {
    if (y <= 0.0) return 0.0;
    const double ly = std::log(y);
    return A * (y * ly - y) + B * (0.5 * y * y * ly - 0.25 * y * y);
  };
  return (F(r + s * L) - F(r)) / s;
}

}  // namespace

double kl_divergence(const GridDensity& f1, const GridDensity& f2) {
  require_same_grid(f1.grid(), f2.grid(), "kl_divergence");
  const auto& a = f1.values();
  const auto& b = f2.values();
  const double h = f1.grid().spacing();
  double kl = 0.0;
  for (std::size_t i = 0; i + 1 < a.size(); ++i) {
    const double a0 = a[i], a1 = a[i + 1];
    if (a0 <= 0.0 && a1 <= 0.0) continue;
    const double b0 = std::max(b[i], kDensityFloor);
    const double b1 = std::max(b[i + 1], kDensityFloor);
    const double qa = (a1 - a0) / h;
    kl += integral_linear_log(a0, qa, a0, qa, h) -
          integral_linear_log(a0, qa, b0, (b1 - b0) / h, h);
  }
  return kl;
}

double fisher_rao_inner(const GridDensity& f, std::span<const double> v1,
                        std::span<const double> v2) {
  if (v1.size() != f.size() || v2.size() != f.size()) {
    throw StructuralError("fisher_rao_inner operands do not match the grid length");
  }
  const auto& fv = f.values();
  const std::size_t n = fv.size();
  auto term = [&](std::size_t i) {
    return v1[i] * v2[i] / std::max(fv[i], kDensityFloor);
  };
  double s = 0.5 * (term(0) + term(n - 1));
  for (std::size_t i = 1; i + 1 < n; ++i) s += term(i);
  return s * f.grid().spacing();
}

}  // namespace densewarp
