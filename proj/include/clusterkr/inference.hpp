#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clusterkr/dataset.hpp"
#include "clusterkr/kernels.hpp"
#include "clusterkr/regress.hpp"
#include "clusterkr/variance.hpp"

namespace ckr {

/// Phi^{-1}(p) for 0 < p < 1.
double normal_quantile(double p);
/// z_{1 - alpha/2}
double z_two_sided(double alpha);

/// sqrt(R_k^d sigma2 / (n h^d f_hat))
double se_iid(double r_k, std::size_t d, double sigma2_at_x, double fhat_at_x, std::size_t n, double h);
/// Same shape as se_iid with the jackknife conditional variance.
double se_cr(double r_k, std::size_t d, double sigma2_tilde_at_x, double fhat_at_x, std::size_t n, double h);

struct SeLambda {
  double value = 0.0;
  bool clamped = false;  ///< bracket was negative; the covariance term was dropped
};

/// sqrt((1/(n h^d)) (cr_term + cov.value)) with cr_term = R_k^d sigma2_tilde / f_hat.
SeLambda se_lambda(double cr_term, const CovTermEstimate& cov, double fhat_at_x, std::size_t n, double h,
                   std::size_t d);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const noexcept { return hi - lo; }
  bool contains(double v) const noexcept { return lo <= v && v <= hi; }
};

struct BandConfig {
  Estimator estimator = Estimator::ll;
  double h_m = 0.0;
  double h_f = 0.0;
  double h_sigma2 = 0.0;
  /// Pair bandwidth for the nonparametric covariance term; defaults to h_f.
  std::optional<double> b;
  double alpha = 0.05;
  CovMethod cov_method = CovMethod::parametric_compromise;
  unsigned threads = 1;
};

struct InferenceBand {
  std::vector<double> x;
  double estimate = 0.0;
  double fhat = 0.0;
  double sigma2_hat = 0.0;
  double sigma2_tilde = 0.0;
  double lambda = 0.0;
  CovTermEstimate cov_term;
  double se_iid = 0.0;
  double se_cr = 0.0;
  double se_lambda = 0.0;
  Interval ci_iid;
  Interval ci_cr;
  Interval ci_lambda;
  double h_m = 0.0;
  double h_f = 0.0;
  double h_sigma2 = 0.0;
  std::vector<std::string> warnings;
};

/// Bands at several points sharing one set of residuals.
std::vector<InferenceBand> make_bands(const ClusteredDataset& ds, const Kernel& kernel,
                                      std::span<const std::vector<double>> points, const BandConfig& cfg);

InferenceBand make_band(const ClusteredDataset& ds, const Kernel& kernel, std::span<const double> x,
                        const BandConfig& cfg);

/// x columns, mhat, se_iid, se_cr, se_lambda, ci_*_lo/hi, warnings.
void write_bands_csv(std::ostream& out, std::span<const InferenceBand> bands);
/// x columns, mhat, then lo/hi per interval variant.
void write_plot_csv(std::ostream& out, std::span<const InferenceBand> bands);
std::string bands_to_json(std::span<const InferenceBand> bands);
/// Self-contained SVG line chart; single regressor only.
void write_plot_svg(std::ostream& out, std::span<const InferenceBand> bands);

}  // namespace ckr
