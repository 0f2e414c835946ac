#include "clusterkr/bandwidth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "clusterkr/error.hpp"
#include "clusterkr/format.hpp"
#include "clusterkr/parallel.hpp"

namespace ckr {

WeightWindow::WeightWindow(std::vector<double> lo, std::vector<double> hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.empty() || lo_.size() != hi_.size()) throw_invalid("weight window bounds must have equal, nonzero length");
  for (std::size_t q = 0; q < lo_.size(); ++q)
    if (!(lo_[q] < hi_[q]) || !std::isfinite(lo_[q]) || !std::isfinite(hi_[q]))
      throw_invalid("weight window needs finite lo < hi in every coordinate");
}

bool WeightWindow::contains(std::span<const double> x) const noexcept {
  for (std::size_t q = 0; q < lo_.size(); ++q)
    if (x[q] < lo_[q] || x[q] > hi_[q]) return false;
  return true;
}

double WeightWindow::volume() const noexcept {
  double v = 1.0;
  for (std::size_t q = 0; q < lo_.size(); ++q) v *= hi_[q] - lo_[q];
  return v;
}

std::string_view to_string(BandwidthMethod m) noexcept {
  switch (m) {
    case BandwidthMethod::rot: return "rot";
    case BandwidthMethod::cr_rot: return "cr-rot";
    case BandwidthMethod::cv: return "cv";
    case BandwidthMethod::cr_cv: return "cr-cv";
    case BandwidthMethod::aimse: return "aimse";
    case BandwidthMethod::reference: return "reference";
  }
  return "unknown";
}

BandwidthMethod parse_bandwidth_method(std::string_view name) {
  for (auto m : {BandwidthMethod::rot, BandwidthMethod::cr_rot, BandwidthMethod::cv, BandwidthMethod::cr_cv,
                 BandwidthMethod::aimse, BandwidthMethod::reference})
    if (name == to_string(m)) return m;
  throw_invalid("unknown bandwidth method '" + std::string(name) + "'");
}

double PolyFit4::value(double x) const noexcept {
  return coef[0] + x * (coef[1] + x * (coef[2] + x * (coef[3] + x * coef[4])));
}

double PolyFit4::half_second_derivative(double x) const noexcept {
  return coef[2] + 3.0 * coef[3] * x + 6.0 * coef[4] * x * x;
}

double aimse_h0(double bias_bar, double sigma2_bar, double r_k, std::size_t d, std::size_t n) {
  if (!(bias_bar > 0.0) || !(sigma2_bar > 0.0) || !(r_k > 0.0) || d == 0 || n == 0)
    throw_invalid("aimse_h0 needs positive B, sigma2, R_k, d and n");
  const double dd = static_cast<double>(d);
  const double inv = 1.0 / (dd + 4.0);
  return std::pow(dd * std::pow(r_k, dd) * sigma2_bar / (4.0 * bias_bar), inv) *
         std::pow(static_cast<double>(n), -inv);
}

namespace {

void require_univariate(const ClusteredDataset& ds, const char* what) {
  if (ds.d_ind() != 1 || ds.d_cls() != 0)
    throw_invalid(std::string(what) + " requires exactly one individual-level regressor and no cluster-level ones");
}

}  // namespace

PolyFit4 global_poly4(const ClusteredDataset& ds, std::optional<std::size_t> exclude) {
  require_univariate(ds, "global quartic fit");
  if (exclude && *exclude >= ds.G()) throw_invalid("cluster index out of range");
  std::size_t rows = ds.n();
  if (exclude) rows -= ds.cluster_size(*exclude);
  std::set<double> distinct;
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows), 5);
  Eigen::VectorXd Y(static_cast<Eigen::Index>(rows));
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (exclude && ds.cluster_of(i) == *exclude) continue;
    const double x = ds.x(i)[0];
    if (distinct.size() < 5) distinct.insert(x);
    double p = 1.0;
    for (int k = 0; k < 5; ++k, p *= x) X(r, k) = p;
    Y(r) = ds.y(i);
    ++r;
  }
  if (distinct.size() < 5)
    throw Error(ErrorKind::singular, "quartic pilot fit needs at least 5 distinct regressor values");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < 5) throw Error(ErrorKind::singular, "quartic pilot design is rank deficient");
  Eigen::VectorXd beta = qr.solve(Y);
  PolyFit4 out;
  for (int k = 0; k < 5; ++k) out.coef[static_cast<std::size_t>(k)] = beta(k);
  for (double c : out.coef)
    if (!std::isfinite(c)) throw Error(ErrorKind::numeric, "quartic pilot fit produced non-finite coefficients");
  return out;
}

PolyFit4 global_poly4_loco(const ClusteredDataset& ds, std::size_t g) { return global_poly4(ds, g); }

ResidualSet poly4_loco_residuals(const ClusteredDataset& ds) {
  require_univariate(ds, "quartic pilot residuals");
  if (ds.G() < 2) throw Error(ErrorKind::validation, "leave-one-cluster-out pilot fits need at least two clusters");
  ResidualSet r;
  r.variant = ResidualVariant::global_poly4_loco;
  r.values.resize(ds.n());
  for (std::size_t g = 0; g < ds.G(); ++g) {
    const PolyFit4 fit = global_poly4(ds, g);
    for (std::size_t i = ds.cluster_begin(g); i < ds.cluster_end(g); ++i) r.values[i] = ds.y(i) - fit.value(ds.x(i)[0]);
  }
  return r;
}

BandwidthReport rot(const ClusteredDataset& ds, const Kernel& kernel, const WeightWindow& window,
                    bool cluster_robust) {
  require_univariate(ds, "rule-of-thumb bandwidth");
  if (window.dim() != 1) throw_invalid("weight window dimension must match the regressor");
  if (cluster_robust && ds.G() < 2)
    throw Error(ErrorKind::validation, "cluster-robust rule of thumb needs at least two clusters");

  double bias_sum = 0.0, resid_sum = 0.0;
  auto accumulate = [&](const PolyFit4& fit, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double x = ds.x(i)[0];
      const double e = ds.y(i) - fit.value(x);
      resid_sum += e * e;
      if (window.contains(ds.x(i))) {
        const double b = fit.half_second_derivative(x);
        bias_sum += b * b;
      }
    }
  };
  if (cluster_robust) {
    for (std::size_t g = 0; g < ds.G(); ++g) accumulate(global_poly4(ds, g), ds.cluster_begin(g), ds.cluster_end(g));
  } else {
    const PolyFit4 full = global_poly4(ds);
    accumulate(full, 0, ds.n());
  }
  const double n = static_cast<double>(ds.n());
  RotComponents comp{bias_sum / n, resid_sum / n * window.volume()};
  if (!(comp.bias > 0.0))
    throw Error(ErrorKind::numeric, "rule-of-thumb bias constant is zero (weight window excludes all data or the pilot has no curvature)");
  if (!(comp.sigma2 > 0.0)) throw Error(ErrorKind::numeric, "rule-of-thumb variance constant is zero");

  BandwidthReport rep;
  rep.method = cluster_robust ? BandwidthMethod::cr_rot : BandwidthMethod::rot;
  rep.h = aimse_h0(comp.bias, comp.sigma2, kernel.roughness(), 1, ds.n());
  rep.components = comp;
  const auto s = size_summary(ds);
  const double guard = static_cast<double>(s.max_ng) * std::pow(rep.h, static_cast<double>(ds.d_ind()));
  if (guard > 1.0)
    rep.warnings.push_back("largest cluster is big relative to the bandwidth (max n_g * h^d_ind = " +
                           format_double(guard) + "); the AIMSE-based choice may be unreliable, prefer cr-cv");
  return rep;
}

double cv_criterion(const ClusteredDataset& ds, const Kernel& kernel, double h, Estimator est,
                    const WeightWindow& window, CvMode mode) {
  if (!(h > 0.0) || !std::isfinite(h)) throw_invalid("bandwidth must be positive and finite, got " + format_double(h));
  if (window.dim() != ds.d()) throw_invalid("weight window dimension must match the regressors");
  if (ds.empty()) throw Error(ErrorKind::validation, "dataset has no observations");
  double sum = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (!window.contains(ds.x(i))) continue;
    const Exclusion ex =
        mode == CvMode::leave_one_cluster_out ? Exclusion::cluster(ds.cluster_of(i)) : Exclusion::observation(i);
    double pred = 0.0;
    try {
      pred = fit_excluding(ds, kernel, est, h, ds.x(i), ex).estimate;
    } catch (const EmptyWindowError& e) {
      throw EmptyWindowError(e.x(), h, "CV prediction for observation " + std::to_string(i) + " in cluster '" +
                                           ds.cluster_id(ds.cluster_of(i)) + "'");
    }
    const double e = ds.y(i) - pred;
    sum += e * e;
  }
  return sum / static_cast<double>(ds.n());
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (n == 0 || !(lo > 0.0) || !(hi >= lo) || !std::isfinite(hi)) throw_invalid("log grid needs n >= 1 and 0 < lo <= hi");
  if (n == 1) return {lo};
  std::vector<double> out(n);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t k = 0; k < n; ++k)
    out[k] = std::exp(a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::vector<double> default_cv_grid(double pilot, std::size_t n, double span_lo, double span_hi) {
  if (!(pilot > 0.0)) throw_invalid("pilot bandwidth must be positive");
  if (!(span_lo > 0.0) || !(span_hi >= span_lo)) throw_invalid("grid span must satisfy 0 < lo <= hi");
  return log_grid(pilot * span_lo, pilot * span_hi, n);
}

BandwidthReport cv_select(const ClusteredDataset& ds, const Kernel& kernel, Estimator est,
                          const WeightWindow& window, CvMode mode, std::span<const double> grid, unsigned threads) {
  if (grid.empty()) throw_invalid("bandwidth grid is empty");
  std::vector<double> hs(grid.begin(), grid.end());
  for (double h : hs)
    if (!(h > 0.0) || !std::isfinite(h)) throw_invalid("bandwidth grid values must be positive and finite");
  std::sort(hs.begin(), hs.end());
  hs.erase(std::unique(hs.begin(), hs.end()), hs.end());

  BandwidthReport rep;
  rep.method = mode == CvMode::leave_one_cluster_out ? BandwidthMethod::cr_cv : BandwidthMethod::cv;
  rep.trace.resize(hs.size());
  parallel_for(hs.size(), threads, [&](std::size_t k) {
    TracePoint& tp = rep.trace[k];
    tp.h = hs[k];
    try {
      tp.criterion = cv_criterion(ds, kernel, hs[k], est, window, mode);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::invalid_argument || e.kind() == ErrorKind::validation) throw;
      tp.ok = false;
      tp.criterion = std::numeric_limits<double>::quiet_NaN();
      tp.error = e.what();
    }
  });

  const TracePoint* best = nullptr;
  for (const auto& tp : rep.trace)
    if (tp.ok && (!best || tp.criterion < best->criterion)) best = &tp;
  if (!best) {
    throw Error(ErrorKind::numeric, "cross-validation failed at all " + std::to_string(rep.trace.size()) +
                                        " grid points; first failure: " + rep.trace.front().error);
  }
  rep.h = best->h;
  std::size_t failed = 0;
  for (const auto& tp : rep.trace) failed += tp.ok ? 0 : 1;
  if (failed > 0)
    rep.warnings.push_back(std::to_string(failed) + " of " + std::to_string(rep.trace.size()) +
                           " grid points could not be evaluated (empty kernel windows)");
  if (best == &rep.trace.front() || best == &rep.trace.back())
    rep.warnings.push_back("selected bandwidth lies on the edge of the search grid");
  return rep;
}

double undersmooth(double h, std::size_t n) {
  if (!(h > 0.0) || n == 0) throw_invalid("undersmooth needs h > 0 and n >= 1");
  const double nn = static_cast<double>(n);
  return h * std::pow(nn, 1.0 / 5.0) * std::pow(nn, -2.0 / 7.0);
}

double reference_h(const ClusteredDataset& ds) {
  if (ds.d() != 1) throw_invalid("reference bandwidth is defined for a single regressor");
  if (ds.n() < 2) throw Error(ErrorKind::validation, "reference bandwidth needs at least two observations");
  const auto xs = ds.xs();
  double mean = 0.0;
  for (double v : xs) mean += v;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double v : xs) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  if (!(sd > 0.0)) throw Error(ErrorKind::numeric, "reference bandwidth undefined: regressor has zero variance");
  return 1.049 * sd * std::pow(static_cast<double>(ds.n()), -0.2);
}

BandwidthReport select_bandwidth(const ClusteredDataset& ds, const Kernel& kernel, const WeightWindow& window,
                                 const SelectionOptions& opts) {
  switch (opts.method) {
    case BandwidthMethod::rot: return rot(ds, kernel, window, false);
    case BandwidthMethod::cr_rot: return rot(ds, kernel, window, true);
    case BandwidthMethod::reference: {
      BandwidthReport rep;
      rep.method = BandwidthMethod::reference;
      rep.h = reference_h(ds);
      return rep;
    }
    case BandwidthMethod::aimse:
      throw_invalid("the AIMSE bandwidth needs known B and sigma2; use aimse_h0");
    case BandwidthMethod::cv:
    case BandwidthMethod::cr_cv: {
      const BandwidthReport pilot = rot(ds, kernel, window, true);
      const auto grid = default_cv_grid(pilot.h, opts.grid_n, opts.span_lo, opts.span_hi);
      const CvMode mode = opts.method == BandwidthMethod::cr_cv ? CvMode::leave_one_cluster_out : CvMode::leave_one_out;
      BandwidthReport rep = cv_select(ds, kernel, opts.estimator, window, mode, grid, opts.threads);
      rep.warnings.insert(rep.warnings.begin(), pilot.warnings.begin(), pilot.warnings.end());
      return rep;
    }
  }
  throw_invalid("unknown bandwidth method");
}

}  // namespace ckr
