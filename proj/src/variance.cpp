#include "clusterkr/variance.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "clusterkr/density.hpp"
#include "clusterkr/error.hpp"
#include "clusterkr/format.hpp"
#include "pairs.hpp"
#include "window.hpp"

namespace ckr {

namespace {

void check_residuals(const ClusteredDataset& ds, const ResidualSet& res) {
  if (res.size() != ds.n())
    throw_invalid("residual set has " + std::to_string(res.size()) + " entries for " + std::to_string(ds.n()) +
                  " observations");
}

std::vector<double> to_vec(std::span<const double> x) { return {x.begin(), x.end()}; }

std::vector<double> stacked(std::span<const double> x_ind, std::span<const double> x_cls) {
  std::vector<double> out(x_ind.begin(), x_ind.end());
  out.insert(out.end(), x_ind.begin(), x_ind.end());
  out.insert(out.end(), x_cls.begin(), x_cls.end());
  return out;
}

[[noreturn]] void missing_residual(const ClusteredDataset& ds, std::size_t i) {
  throw Error(ErrorKind::numeric, "residual for observation " + std::to_string(i) + " in cluster '" +
                                      ds.cluster_id(ds.cluster_of(i)) + "' is undefined but receives kernel weight");
}

}  // namespace

double cond_var_nw(const ClusteredDataset& ds, const Kernel& kernel, double h, std::span<const double> x,
                   const ResidualSet& res) {
  detail::check_point(ds, h, x);
  check_residuals(ds, res);
  double num = 0.0, den = 0.0;
  detail::for_each_weighted(ds, kernel, h, x, Exclusion::nothing(), [&](std::size_t i, double w) {
    const double e = res[i];
    if (std::isnan(e)) missing_residual(ds, i);
    num += w * e * e;
    den += w;
  });
  if (den == 0.0) throw EmptyWindowError(to_vec(x), h, "conditional variance");
  return num / den;
}

double cond_cov_nw(const ClusteredDataset& ds, const Kernel& kernel, double b, std::span<const double> x_ind,
                   std::span<const double> x_cls, const ResidualSet& res) {
  check_residuals(ds, res);
  if (within_cluster_pairs(ds) == 0)
    throw Error(ErrorKind::validation, "conditional covariance undefined: no cluster has two or more members");
  double num = 0.0, den = 0.0;
  detail::for_each_pair_weight(ds, kernel, b, x_ind, x_cls, [&](std::size_t i, std::size_t l, double w) {
    if (std::isnan(res[i])) missing_residual(ds, i);
    if (std::isnan(res[l])) missing_residual(ds, l);
    num += w * res[i] * res[l];
    den += w;
  });
  if (den == 0.0) throw EmptyWindowError(stacked(x_ind, x_cls), b, "conditional covariance over within-cluster pairs");
  return num / den;
}

LambdaHat lambda_hat(const ClusterSizeSummary& summary, double h, std::size_t d_ind) {
  if (!(h > 0.0) || !std::isfinite(h)) throw_invalid("lambda needs a positive bandwidth, got " + format_double(h));
  if (summary.n == 0) throw_invalid("lambda needs a nonempty dataset");
  LambdaHat out;
  out.h_used = h;
  out.mean_sq_size = summary.mean_sq_size();
  out.value = out.mean_sq_size * std::pow(h, static_cast<double>(d_ind));
  return out;
}

MvnMoments pair_moments(const ClusteredDataset& ds) {
  const std::size_t pairs = within_cluster_pairs(ds);
  if (pairs == 0) throw Error(ErrorKind::validation, "pair moments undefined: no cluster has two or more members");
  const auto d = static_cast<Eigen::Index>(ds.d_ind());
  const double ordered = 2.0 * static_cast<double>(pairs);

  MvnMoments m;
  m.mu1 = Eigen::VectorXd::Zero(d);
  for (std::size_t g = 0; g < ds.G(); ++g) {
    const double mult = static_cast<double>(ds.cluster_size(g)) - 1.0;
    for (std::size_t i = ds.cluster_begin(g); i < ds.cluster_end(g); ++i) {
      const auto xi = ds.x_ind(i);
      for (Eigen::Index q = 0; q < d; ++q) m.mu1(q) += mult * xi[static_cast<std::size_t>(q)];
    }
  }
  m.mu1 /= ordered;

  m.sigma11 = Eigen::MatrixXd::Zero(d, d);
  m.sigma12 = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd a(d), c(d), sum(d);
  for (std::size_t g = 0; g < ds.G(); ++g) {
    const std::size_t size = ds.cluster_size(g);
    if (size < 2) continue;
    const double mult = static_cast<double>(size) - 1.0;
    sum.setZero();
    for (std::size_t i = ds.cluster_begin(g); i < ds.cluster_end(g); ++i) {
      const auto xi = ds.x_ind(i);
      for (Eigen::Index q = 0; q < d; ++q) a(q) = xi[static_cast<std::size_t>(q)] - m.mu1(q);
      m.sigma11.noalias() += mult * a * a.transpose();
      sum += a;
    }
    // sum over ordered pairs j != l of a_j a_l^T = S S^T - sum_j a_j a_j^T
    m.sigma12.noalias() += sum * sum.transpose();
    for (std::size_t i = ds.cluster_begin(g); i < ds.cluster_end(g); ++i) {
      const auto xi = ds.x_ind(i);
      for (Eigen::Index q = 0; q < d; ++q) c(q) = xi[static_cast<std::size_t>(q)] - m.mu1(q);
      m.sigma12.noalias() -= c * c.transpose();
    }
  }
  m.sigma11 /= ordered;
  m.sigma12 /= ordered;
  m.sigma12 = 0.5 * (m.sigma12 + m.sigma12.transpose()).eval();
  return m;
}

double conditional_normal_density(const MvnMoments& m, std::span<const double> x) {
  const auto d = m.mu1.size();
  if (static_cast<Eigen::Index>(x.size()) != d) throw_invalid("evaluation point dimension does not match the moments");
  Eigen::LDLT<Eigen::MatrixXd> s11(m.sigma11);
  if (s11.info() != Eigen::Success || !s11.isPositive() || (s11.vectorD().array() <= 0.0).any())
    throw Error(ErrorKind::singular, "pair covariance block is singular");
  Eigen::VectorXd dev(d);
  for (Eigen::Index q = 0; q < d; ++q) dev(q) = x[static_cast<std::size_t>(q)] - m.mu1(q);
  const Eigen::VectorXd mean = m.mu1 + m.sigma12 * s11.solve(dev);
  const Eigen::MatrixXd cov = m.sigma11 - m.sigma12 * s11.solve(m.sigma12.transpose());
  Eigen::LLT<Eigen::MatrixXd> chol(0.5 * (cov + cov.transpose()));
  if (chol.info() != Eigen::Success)
    throw Error(ErrorKind::singular, "conditional pair covariance is not positive definite");
  Eigen::VectorXd r(d);
  for (Eigen::Index q = 0; q < d; ++q) r(q) = x[static_cast<std::size_t>(q)] - mean(q);
  const Eigen::VectorXd z = chol.matrixL().solve(r);
  double log_det = 0.0;
  for (Eigen::Index q = 0; q < d; ++q) log_det += 2.0 * std::log(chol.matrixL()(q, q));
  const double dd = static_cast<double>(d);
  return std::exp(-0.5 * z.squaredNorm() - 0.5 * log_det - 0.5 * dd * std::log(2.0 * std::numbers::pi));
}

std::string_view to_string(CovMethod m) noexcept {
  return m == CovMethod::nonparametric ? "nonparametric" : "parametric";
}

CovMethod parse_cov_method(std::string_view name) {
  if (name == "nonparametric") return CovMethod::nonparametric;
  if (name == "parametric") return CovMethod::parametric_compromise;
  throw_invalid("unknown covariance method '" + std::string(name) + "' (expected parametric or nonparametric)");
}

CovTermEstimate nonparametric_cov_term(const ClusteredDataset& ds, const Kernel& kernel, double b,
                                       std::span<const double> x_ind, std::span<const double> x_cls,
                                       const ResidualSet& res, const LambdaHat& lambda, double fhat_at_x) {
  if (!(fhat_at_x > 0.0)) throw Error(ErrorKind::numeric, "density estimate at x is not positive");
  const double f2 = joint_density_pairs(ds, kernel, b, x_ind, x_cls).value;
  const double cov = cond_cov_nw(ds, kernel, b, x_ind, x_cls, res);
  const double rk = std::pow(kernel.roughness(), static_cast<double>(ds.d_cls()));
  CovTermEstimate out;
  out.method = CovMethod::nonparametric;
  out.value = lambda.value * rk * f2 * cov / (fhat_at_x * fhat_at_x);
  if (!std::isfinite(out.value)) throw Error(ErrorKind::numeric, "covariance term is not finite");
  return out;
}

CovTermEstimate parametric_cov_term(const ClusteredDataset& ds, const ResidualSet& res, const LambdaHat& lambda,
                                    double r_k, std::span<const double> x_ind, double fhat_at_x) {
  check_residuals(ds, res);
  if (!(fhat_at_x > 0.0)) throw Error(ErrorKind::numeric, "density estimate at x is not positive");
  if (x_ind.size() != ds.d_ind()) throw_invalid("evaluation point must have d_ind coordinates");
  const std::size_t pairs = within_cluster_pairs(ds);
  if (pairs == 0)
    throw Error(ErrorKind::validation, "parametric covariance term undefined: no cluster has two or more members");

  double cross = 0.0;
  for (std::size_t g = 0; g < ds.G(); ++g) {
    const std::size_t b = ds.cluster_begin(g), e = ds.cluster_end(g);
    for (std::size_t j = b; j < e; ++j)
      for (std::size_t l = j + 1; l < e; ++l) {
        if (std::isnan(res[j])) missing_residual(ds, j);
        if (std::isnan(res[l])) missing_residual(ds, l);
        cross += res[j] * res[l];
      }
  }
  const double mean_cross = cross / static_cast<double>(pairs);
  const double p = conditional_normal_density(pair_moments(ds), x_ind);
  CovTermEstimate out;
  out.method = CovMethod::parametric_compromise;
  out.value = lambda.value * std::pow(r_k, static_cast<double>(ds.d_cls())) * mean_cross * p / fhat_at_x;
  if (!std::isfinite(out.value)) throw Error(ErrorKind::numeric, "covariance term is not finite");
  return out;
}

}  // namespace ckr
