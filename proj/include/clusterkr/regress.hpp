#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "clusterkr/dataset.hpp"
#include "clusterkr/kernels.hpp"

namespace ckr {

enum class Estimator { nw, ll };

std::string_view to_string(Estimator est) noexcept;
Estimator parse_estimator(std::string_view name);

/// Which observations a fit must ignore.
struct Exclusion {
  enum class Kind { none, cluster, observation };
  Kind kind = Kind::none;
  std::size_t index = 0;

  static Exclusion nothing() noexcept { return {}; }
  static Exclusion cluster(std::size_t g) noexcept { return {Kind::cluster, g}; }
  static Exclusion observation(std::size_t i) noexcept { return {Kind::observation, i}; }

  bool excludes(const ClusteredDataset& ds, std::size_t i) const noexcept {
    switch (kind) {
      case Kind::none: return false;
      case Kind::cluster: return ds.cluster_of(i) == index;
      case Kind::observation: return i == index;
    }
    return false;
  }
};

struct FitResult {
  std::vector<double> x;
  double estimate = 0.0;
  /// NW: sum of kernel weights. LL: reciprocal condition number of the
  /// equilibrated local design matrix (0 when the NW fallback was taken).
  double denom = 0.0;
  std::size_t n_effective = 0;
  /// LL only: the local design was degenerate and the NW value was returned.
  bool nw_fallback = false;
};

/// Reciprocal condition below which the local linear fit degrades to NW.
inline constexpr double kLocalLinearRcondFloor = 1e-12;

FitResult nw_fit(const ClusteredDataset& ds, const Kernel& kernel, double h, std::span<const double> x);
FitResult ll_fit(const ClusteredDataset& ds, const Kernel& kernel, double h, std::span<const double> x);
FitResult fit(const ClusteredDataset& ds, const Kernel& kernel, Estimator est, double h,
              std::span<const double> x);

/// Fit at x ignoring the observations selected by `ex`. Sums run over the
/// remaining points in the same order as on the reduced dataset, so
/// fit_excluding(ds, ..., Exclusion::cluster(g)) is bit-identical to
/// fit(drop_cluster(ds, g), ...).
FitResult fit_excluding(const ClusteredDataset& ds, const Kernel& kernel, Estimator est, double h,
                        std::span<const double> x, Exclusion ex);

/// Leave-one-cluster-out fit at x.
FitResult fit_loco(const ClusteredDataset& ds, const Kernel& kernel, double h, std::span<const double> x,
                   std::size_t g, Estimator est);

enum class ResidualVariant {
  fitted,            ///< Y - m_hat(X)
  jackknife,         ///< Y - m_tilde_{-g}(X), own cluster removed
  leave_one_out,     ///< Y - m_{-i}(X), only the observation removed
  global_poly4_loco  ///< Y - quartic global fit without the own cluster
};

std::string_view to_string(ResidualVariant v) noexcept;

/// Residuals aligned with dataset order. Entries that were not requested
/// are NaN and must never receive positive weight downstream.
struct ResidualSet {
  ResidualVariant variant = ResidualVariant::fitted;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t i) const noexcept { return values[i]; }
};

/// Residuals for every observation, or only where `needed[i]` is nonzero
/// when a mask of length n is given.
ResidualSet residuals(const ClusteredDataset& ds, const Kernel& kernel, double h, Estimator est,
                      ResidualVariant variant, std::span<const char> needed = {});

}  // namespace ckr
