#pragma once

#include <algorithm>
#include <span>

#include "clusterkr/dataset.hpp"
#include "clusterkr/kernels.hpp"
#include "clusterkr/regress.hpp"

namespace ckr::detail {

// Calls fn(i, w) for every non-excluded observation with positive product
// kernel weight w = K((X_i - x) / h). Candidates come from a binary search on
// the first coordinate and are visited in the dataset's sorted order.
template <class Fn>
void for_each_weighted(const ClusteredDataset& ds, const Kernel& kernel, double h,
                       std::span<const double> x, Exclusion ex, Fn&& fn) {
  const double reach = kernel.support_radius() * h;
  const auto first = ds.sorted_first();
  const auto order = ds.sorted_order();
  const auto lo = std::lower_bound(first.begin(), first.end(), x[0] - reach);
  const auto hi = std::upper_bound(lo, first.end(), x[0] + reach);
  for (auto it = lo; it != hi; ++it) {
    const std::size_t i = order[static_cast<std::size_t>(it - first.begin())];
    if (ex.excludes(ds, i)) continue;
    const double w = kernel.product_scaled(ds.x(i), x, h);
    if (w > 0.0) fn(i, w);
  }
}

void check_point(const ClusteredDataset& ds, double h, std::span<const double> x);

}  // namespace ckr::detail
