#include "clusterkr/regress.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "clusterkr/bandwidth.hpp"
#include "clusterkr/error.hpp"
#include "clusterkr/format.hpp"
#include "window.hpp"

namespace ckr {

namespace detail {

void check_point(const ClusteredDataset& ds, double h, std::span<const double> x) {
  if (!(h > 0.0) || !std::isfinite(h)) throw_invalid("bandwidth must be positive and finite, got " + format_double(h));
  if (ds.empty()) throw Error(ErrorKind::validation, "dataset has no observations");
  if (x.size() != ds.d())
    throw_invalid("evaluation point has dimension " + std::to_string(x.size()) + ", dataset has d=" +
                  std::to_string(ds.d()));
  for (double v : x)
    if (!std::isfinite(v)) throw_invalid("evaluation point must be finite");
}

}  // namespace detail

namespace {

constexpr int kMaxLocalDim = 17;  // d <= 16 regressors for local linear fits

std::vector<double> to_vec(std::span<const double> x) { return {x.begin(), x.end()}; }

FitResult nw_impl(const ClusteredDataset& ds, const Kernel& kernel, double h, std::span<const double> x,
                  Exclusion ex) {
  // Responses are centered on the first in-window Y so constants come back exactly.
  double sw = 0.0, swy = 0.0, anchor = 0.0;
  std::size_t count = 0;
  detail::for_each_weighted(ds, kernel, h, x, ex, [&](std::size_t i, double w) {
    if (count == 0) anchor = ds.y(i);
    sw += w;
    swy += w * (ds.y(i) - anchor);
    ++count;
  });
  if (count == 0) throw EmptyWindowError(to_vec(x), h);
  FitResult r;
  r.x = to_vec(x);
  r.estimate = anchor + swy / sw;
  r.denom = sw;
  r.n_effective = count;
  return r;
}

// Solves the kernel-weighted least squares of Y on (1, (X - x)/h) and returns
// the intercept. Scaling the slope columns by 1/h leaves the intercept intact.
template <class Mat, class Vec>
FitResult ll_impl(const ClusteredDataset& ds, const Kernel& kernel, double h, std::span<const double> x,
                  Exclusion ex, Mat A, Vec c) {
  const Eigen::Index dim = A.rows();
  const std::size_t d = ds.d();
  A.setZero();
  c.setZero();
  Vec z(dim);
  std::size_t count = 0;
  detail::for_each_weighted(ds, kernel, h, x, ex, [&](std::size_t i, double w) {
    const auto xi = ds.x(i);
    z(0) = 1.0;
    for (std::size_t q = 0; q < d; ++q) z(static_cast<Eigen::Index>(q) + 1) = (xi[q] - x[q]) / h;
    const double yi = ds.y(i);
    for (Eigen::Index a = 0; a < dim; ++a) {
      const double wz = w * z(a);
      c(a) += wz * yi;
      for (Eigen::Index b = a; b < dim; ++b) A(a, b) += wz * z(b);
    }
    ++count;
  });
  if (count == 0) throw EmptyWindowError(to_vec(x), h);
  for (Eigen::Index a = 0; a < dim; ++a)
    for (Eigen::Index b = 0; b < a; ++b) A(a, b) = A(b, a);

  FitResult r;
  r.x = to_vec(x);
  r.n_effective = count;

  // Column equilibration, then the reciprocal condition of the symmetric
  // positive semidefinite system from its extreme eigenvalues.
  Vec s(dim);
  bool degenerate = false;
  for (Eigen::Index a = 0; a < dim; ++a) {
    if (!(A(a, a) > 0.0)) {
      degenerate = true;
      s(a) = 0.0;
    } else {
      s(a) = 1.0 / std::sqrt(A(a, a));
    }
  }
  double rcond = 0.0;
  if (!degenerate) {
    Mat E = s.asDiagonal() * A * s.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Mat> eig;
    if constexpr (Mat::RowsAtCompileTime == 2 || Mat::RowsAtCompileTime == 3) {
      eig.computeDirect(E, Eigen::EigenvaluesOnly);
    } else {
      eig.compute(E, Eigen::EigenvaluesOnly);
    }
    const auto& ev = eig.eigenvalues();
    const double lmax = ev(dim - 1);
    const double lmin = std::max(ev(0), 0.0);
    rcond = lmax > 0.0 ? lmin / lmax : 0.0;
    if (rcond >= kLocalLinearRcondFloor) {
      Vec rhs = s.cwiseProduct(c);
      Vec beta = E.fullPivLu().solve(rhs);
      r.estimate = s(0) * beta(0);
      r.denom = rcond;
      return r;
    }
  }
  r.estimate = c(0) / A(0, 0);
  r.denom = 0.0;
  r.nw_fallback = true;
  return r;
}

FitResult ll_dispatch(const ClusteredDataset& ds, const Kernel& kernel, double h, std::span<const double> x,
                      Exclusion ex) {
  const std::size_t dim = ds.d() + 1;
  if (dim == 2) return ll_impl(ds, kernel, h, x, ex, Eigen::Matrix2d{}, Eigen::Vector2d{});
  if (dim > static_cast<std::size_t>(kMaxLocalDim))
    throw_invalid("local linear fits support at most " + std::to_string(kMaxLocalDim - 1) + " regressors");
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxLocalDim, kMaxLocalDim>;
  using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxLocalDim, 1>;
  const auto n = static_cast<Eigen::Index>(dim);
  return ll_impl(ds, kernel, h, x, ex, Mat(n, n), Vec(n));
}

}  // namespace

std::string_view to_string(Estimator est) noexcept { return est == Estimator::nw ? "nw" : "ll"; }

Estimator parse_estimator(std::string_view name) {
  if (name == "nw") return Estimator::nw;
  if (name == "ll") return Estimator::ll;
  throw_invalid("unknown estimator '" + std::string(name) + "' (expected nw or ll)");
}

std::string_view to_string(ResidualVariant v) noexcept {
  switch (v) {
    case ResidualVariant::fitted: return "fitted";
    case ResidualVariant::jackknife: return "jackknife";
    case ResidualVariant::leave_one_out: return "leave-one-out";
    case ResidualVariant::global_poly4_loco: return "global-poly4-loco";
  }
  return "unknown";
}

FitResult fit_excluding(const ClusteredDataset& ds, const Kernel& kernel, Estimator est, double h,
                        std::span<const double> x, Exclusion ex) {
  detail::check_point(ds, h, x);
  return est == Estimator::nw ? nw_impl(ds, kernel, h, x, ex) : ll_dispatch(ds, kernel, h, x, ex);
}

FitResult nw_fit(const ClusteredDataset& ds, const Kernel& kernel, double h, std::span<const double> x) {
  return fit_excluding(ds, kernel, Estimator::nw, h, x, Exclusion::nothing());
}

FitResult ll_fit(const ClusteredDataset& ds, const Kernel& kernel, double h, std::span<const double> x) {
  return fit_excluding(ds, kernel, Estimator::ll, h, x, Exclusion::nothing());
}

FitResult fit(const ClusteredDataset& ds, const Kernel& kernel, Estimator est, double h,
              std::span<const double> x) {
  return fit_excluding(ds, kernel, est, h, x, Exclusion::nothing());
}

FitResult fit_loco(const ClusteredDataset& ds, const Kernel& kernel, double h, std::span<const double> x,
                   std::size_t g, Estimator est) {
  if (g >= ds.G())
    throw_invalid("cluster index " + std::to_string(g) + " out of range (G=" + std::to_string(ds.G()) + ")");
  if (ds.cluster_size(g) == ds.n())
    throw Error(ErrorKind::validation, "no observations remain after dropping cluster '" + ds.cluster_id(g) + "'");
  return fit_excluding(ds, kernel, est, h, x, Exclusion::cluster(g));
}

ResidualSet residuals(const ClusteredDataset& ds, const Kernel& kernel, double h, Estimator est,
                      ResidualVariant variant, std::span<const char> needed) {
  if (!needed.empty() && needed.size() != ds.n())
    throw_invalid("residual mask length does not match the dataset");
  if (variant == ResidualVariant::global_poly4_loco) {
    ResidualSet r = poly4_loco_residuals(ds);
    if (!needed.empty())
      for (std::size_t i = 0; i < ds.n(); ++i)
        if (!needed[i]) r.values[i] = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  if (ds.empty()) throw Error(ErrorKind::validation, "dataset has no observations");
  if (variant == ResidualVariant::jackknife && ds.G() < 2)
    throw Error(ErrorKind::validation, "jackknife residuals need at least two clusters");
  if (variant == ResidualVariant::leave_one_out && ds.n() < 2)
    throw Error(ErrorKind::validation, "leave-one-out residuals need at least two observations");

  ResidualSet r;
  r.variant = variant;
  r.values.assign(ds.n(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (!needed.empty() && !needed[i]) continue;
    Exclusion ex;
    if (variant == ResidualVariant::jackknife) ex = Exclusion::cluster(ds.cluster_of(i));
    if (variant == ResidualVariant::leave_one_out) ex = Exclusion::observation(i);
    try {
      r.values[i] = ds.y(i) - fit_excluding(ds, kernel, est, h, ds.x(i), ex).estimate;
    } catch (const EmptyWindowError& e) {
      throw EmptyWindowError(e.x(), h,
                             std::string(to_string(variant)) + " residual of observation " + std::to_string(i) +
                                 " in cluster '" + ds.cluster_id(ds.cluster_of(i)) + "'");
    }
  }
  return r;
}

}  // namespace ckr
