#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clusterkr/dataset.hpp"
#include "clusterkr/kernels.hpp"
#include "clusterkr/regress.hpp"

namespace ckr {

/// w(x) = 1{lo <= x <= hi}, coordinate-wise box in d > 1.
class WeightWindow {
 public:
  WeightWindow(std::vector<double> lo, std::vector<double> hi);
  static WeightWindow interval(double lo, double hi) { return WeightWindow({lo}, {hi}); }

  std::size_t dim() const noexcept { return lo_.size(); }
  const std::vector<double>& lo() const noexcept { return lo_; }
  const std::vector<double>& hi() const noexcept { return hi_; }

  bool contains(std::span<const double> x) const noexcept;
  /// int w(x) dx
  double volume() const noexcept;

 private:
  std::vector<double> lo_;
  std::vector<double> hi_;
};

enum class BandwidthMethod { rot, cr_rot, cv, cr_cv, aimse, reference };

std::string_view to_string(BandwidthMethod m) noexcept;
BandwidthMethod parse_bandwidth_method(std::string_view name);

enum class CvMode { leave_one_cluster_out, leave_one_out };

struct TracePoint {
  double h = 0.0;
  double criterion = 0.0;  ///< NaN when the evaluation failed
  bool ok = true;
  std::string error;
};

struct RotComponents {
  double bias = 0.0;     ///< B-check
  double sigma2 = 0.0;   ///< sigma2-check (already multiplied by int w)
};

struct BandwidthReport {
  BandwidthMethod method = BandwidthMethod::cr_cv;
  double h = 0.0;
  std::vector<TracePoint> trace;
  std::optional<RotComponents> components;
  std::vector<std::string> warnings;
};

/// Quartic global polynomial m(x) = a0 + a1 x + ... + a4 x^4.
struct PolyFit4 {
  std::array<double, 5> coef{};

  double value(double x) const noexcept;
  /// m''(x) / 2 = a2 + 3 a3 x + 6 a4 x^2
  double half_second_derivative(double x) const noexcept;
};

/// h0 = (d R_k^d sigma2 / (4 B))^{1/(d+4)} n^{-1/(d+4)}
double aimse_h0(double bias_bar, double sigma2_bar, double r_k, std::size_t d, std::size_t n);

/// OLS of Y on (1, x, ..., x^4) over all clusters except `exclude` (if set).
/// Requires a single regressor.
PolyFit4 global_poly4(const ClusteredDataset& ds, std::optional<std::size_t> exclude = std::nullopt);
PolyFit4 global_poly4_loco(const ClusteredDataset& ds, std::size_t g);

/// Y - m_check_{-g}(X) for every observation.
ResidualSet poly4_loco_residuals(const ClusteredDataset& ds);

/// Rule-of-thumb bandwidth from quartic pilot fits; the cluster-robust
/// variant uses leave-one-cluster-out pilots, the plain one the full-sample fit.
BandwidthReport rot(const ClusteredDataset& ds, const Kernel& kernel, const WeightWindow& window,
                    bool cluster_robust);

/// CV(h) = (1/n) sum (Y_gj - prediction excluding gj's cluster or gj)^2 w(X_gj).
/// Only observations inside the window are predicted.
double cv_criterion(const ClusteredDataset& ds, const Kernel& kernel, double h, Estimator est,
                    const WeightWindow& window, CvMode mode);

/// n log-spaced points on [lo, hi], endpoints inclusive.
std::vector<double> log_grid(double lo, double hi, std::size_t n);

inline constexpr std::size_t kDefaultGridSize = 50;
inline constexpr double kDefaultSpanLo = 1.0 / 3.0;
inline constexpr double kDefaultSpanHi = 3.0;

/// Default CV search grid around a pilot bandwidth: [pilot*span_lo, pilot*span_hi].
std::vector<double> default_cv_grid(double pilot, std::size_t n = kDefaultGridSize,
                                    double span_lo = kDefaultSpanLo, double span_hi = kDefaultSpanHi);

/// Grid search. The grid is sorted ascending and de-duplicated first; ties
/// go to the smaller bandwidth. Failed grid points stay in the trace.
BandwidthReport cv_select(const ClusteredDataset& ds, const Kernel& kernel, Estimator est,
                          const WeightWindow& window, CvMode mode, std::span<const double> grid,
                          unsigned threads = 1);

/// h * n^{1/5} * n^{-2/7}
double undersmooth(double h, std::size_t n);

/// 1.049 * S_X * n^{-1/5} for a single pooled regressor.
double reference_h(const ClusteredDataset& ds);

struct SelectionOptions {
  BandwidthMethod method = BandwidthMethod::cr_cv;
  Estimator estimator = Estimator::ll;
  std::size_t grid_n = kDefaultGridSize;
  double span_lo = kDefaultSpanLo;
  double span_hi = kDefaultSpanHi;
  unsigned threads = 1;
};

/// One-stop selection: ROT methods directly; CV methods search the default
/// grid around the CR-ROT pilot.
BandwidthReport select_bandwidth(const ClusteredDataset& ds, const Kernel& kernel, const WeightWindow& window,
                                 const SelectionOptions& opts);

}  // namespace ckr
