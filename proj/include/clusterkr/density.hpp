#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "clusterkr/dataset.hpp"
#include "clusterkr/kernels.hpp"

namespace ckr {

struct DensityEstimate {
  std::vector<double> x;
  double value = 0.0;
  double bandwidth = 0.0;
};

struct JointDensityEstimate {
  std::vector<double> x_ind;
  std::vector<double> x_cls;
  double value = 0.0;
  double bandwidth_b = 0.0;
  /// N = sum over clusters with n_g >= 2 of n_g (n_g - 1) / 2
  std::size_t n_pairs = 0;
};

/// f_hat(x) = 1/(n h^d) sum_i K((X_i - x)/h). Cluster structure plays no role.
DensityEstimate density(const ClusteredDataset& ds, const Kernel& kernel, double h, std::span<const double> x);

/// Number of unordered within-cluster pairs.
std::size_t within_cluster_pairs(const ClusteredDataset& ds) noexcept;

/// Within-cluster pair density at (x_ind, x_ind; x_cls). Each pair j < l of a
/// cluster contributes one product kernel over the stacked vector
/// (X_j^ind, X_l^ind, X^cls) - (x_ind, x_ind, x_cls), scaled by b.
JointDensityEstimate joint_density_pairs(const ClusteredDataset& ds, const Kernel& kernel, double b,
                                         std::span<const double> x_ind, std::span<const double> x_cls);

}  // namespace ckr
