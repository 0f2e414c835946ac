#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>

#include "clusterkr/dataset.hpp"
#include "clusterkr/kernels.hpp"
#include "clusterkr/regress.hpp"

namespace ckr {

/// NW regression of squared residuals at x:
///   sum K((X_i - x)/h) e_i^2 / sum K((X_i - x)/h)
double cond_var_nw(const ClusteredDataset& ds, const Kernel& kernel, double h, std::span<const double> x,
                   const ResidualSet& res);

/// NW regression of within-cluster residual products e_j e_l over pairs j < l,
/// weighted by the stacked pair kernel at (x_ind, x_ind; x_cls) with bandwidth b.
double cond_cov_nw(const ClusteredDataset& ds, const Kernel& kernel, double b, std::span<const double> x_ind,
                   std::span<const double> x_cls, const ResidualSet& res);

struct LambdaHat {
  double value = 0.0;
  double h_used = 0.0;
  double mean_sq_size = 0.0;  ///< (1/n) sum n_g^2
};

/// ((1/n) sum n_g^2) h^d_ind
LambdaHat lambda_hat(const ClusterSizeSummary& summary, double h, std::size_t d_ind);

/// Moments of (X_j^ind, X_l^ind) over all ordered within-cluster pairs j != l.
/// Both coordinates share mu1 and Sigma11; Sigma12 is the cross block.
struct MvnMoments {
  Eigen::VectorXd mu1;
  Eigen::MatrixXd sigma11;
  Eigen::MatrixXd sigma12;
};

MvnMoments pair_moments(const ClusteredDataset& ds);

/// Density at x of the first pair coordinate given the second equals x:
/// N(mu1 + S12 S11^{-1} (x - mu1), S11 - S12 S11^{-1} S12^T).
double conditional_normal_density(const MvnMoments& m, std::span<const double> x);

enum class CovMethod { nonparametric, parametric_compromise };

std::string_view to_string(CovMethod m) noexcept;
CovMethod parse_cov_method(std::string_view name);

/// Covariance contribution to the variance bracket, already divided by f_hat^2:
///   lambda R_k^d_cls f2 sigma / f_hat^2
/// May be negative.
struct CovTermEstimate {
  double value = 0.0;
  CovMethod method = CovMethod::parametric_compromise;
};

/// Fully nonparametric term from the pair density and pair covariance at bandwidth b.
CovTermEstimate nonparametric_cov_term(const ClusteredDataset& ds, const Kernel& kernel, double b,
                                       std::span<const double> x_ind, std::span<const double> x_cls,
                                       const ResidualSet& res, const LambdaHat& lambda, double fhat_at_x);

/// lambda R_k^d_cls (mean over unordered pairs of e_j e_l) p(x|x) / f_hat(x),
/// with `res` typically the leave-one-cluster-out quartic residuals.
CovTermEstimate parametric_cov_term(const ClusteredDataset& ds, const ResidualSet& res, const LambdaHat& lambda,
                                    double r_k, std::span<const double> x_ind, double fhat_at_x);

}  // namespace ckr
