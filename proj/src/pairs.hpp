#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "clusterkr/dataset.hpp"
#include "clusterkr/error.hpp"
#include "clusterkr/format.hpp"
#include "clusterkr/kernels.hpp"

namespace ckr::detail {

// Calls fn(i, l, w) for every within-cluster pair i < l (dataset indices)
// with positive stacked kernel weight
//   w = prod k((X_i^ind - x_ind)/b) * prod k((X_l^ind - x_ind)/b) * prod k((X^cls - x_cls)/b).
// The product factorizes over the stacked coordinates, so the per-member
// factors are computed once per cluster.
template <class Fn>
void for_each_pair_weight(const ClusteredDataset& ds, const Kernel& kernel, double b,
                          std::span<const double> x_ind, std::span<const double> x_cls, Fn&& fn) {
  if (!(b > 0.0) || !std::isfinite(b)) throw_invalid("bandwidth b must be positive and finite, got " + format_double(b));
  if (x_ind.size() != ds.d_ind() || x_cls.size() != ds.d_cls())
    throw_invalid("evaluation point dimensions do not match the dataset's individual/cluster split");
  std::vector<std::size_t> members;
  std::vector<double> factor;
  for (std::size_t g = 0; g < ds.G(); ++g) {
    if (ds.cluster_size(g) < 2) continue;
    const std::size_t begin = ds.cluster_begin(g);
    const double cls = ds.d_cls() == 0 ? 1.0 : kernel.product_scaled(ds.x_cls(begin), x_cls, b);
    if (cls == 0.0) continue;
    members.clear();
    factor.clear();
    for (std::size_t i = begin; i < ds.cluster_end(g); ++i) {
      const double w = kernel.product_scaled(ds.x_ind(i), x_ind, b);
      if (w > 0.0) {
        members.push_back(i);
        factor.push_back(w);
      }
    }
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t c = a + 1; c < members.size(); ++c) fn(members[a], members[c], factor[a] * factor[c] * cls);
  }
}

}  // namespace ckr::detail
