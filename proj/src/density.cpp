#include "clusterkr/density.hpp"

#include <cmath>
#include <string>

#include "clusterkr/error.hpp"
#include "clusterkr/format.hpp"
#include "pairs.hpp"
#include "window.hpp"

namespace ckr {

DensityEstimate density(const ClusteredDataset& ds, const Kernel& kernel, double h, std::span<const double> x) {
  detail::check_point(ds, h, x);
  double sum = 0.0;
  detail::for_each_weighted(ds, kernel, h, x, Exclusion::nothing(), [&](std::size_t, double w) { sum += w; });
  DensityEstimate out;
  out.x.assign(x.begin(), x.end());
  out.bandwidth = h;
  out.value = sum / (static_cast<double>(ds.n()) * std::pow(h, static_cast<double>(ds.d())));
  return out;
}

std::size_t within_cluster_pairs(const ClusteredDataset& ds) noexcept {
  std::size_t total = 0;
  for (std::size_t g = 0; g < ds.G(); ++g) {
    const std::size_t ng = ds.cluster_size(g);
    total += ng * (ng - 1) / 2;
  }
  return total;
}

JointDensityEstimate joint_density_pairs(const ClusteredDataset& ds, const Kernel& kernel, double b,
                                         std::span<const double> x_ind, std::span<const double> x_cls) {
  const std::size_t N = within_cluster_pairs(ds);
  if (N == 0) throw Error(ErrorKind::validation, "joint density undefined: no cluster has two or more members");
  double sum = 0.0;
  detail::for_each_pair_weight(ds, kernel, b, x_ind, x_cls, [&](std::size_t, std::size_t, double w) { sum += w; });
  JointDensityEstimate out;
  out.x_ind.assign(x_ind.begin(), x_ind.end());
  out.x_cls.assign(x_cls.begin(), x_cls.end());
  out.bandwidth_b = b;
  out.n_pairs = N;
  const double dim = static_cast<double>(2 * ds.d_ind() + ds.d_cls());
  out.value = sum / (static_cast<double>(N) * std::pow(b, dim));
  return out;
}

}  // namespace ckr
