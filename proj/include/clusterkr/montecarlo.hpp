#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clusterkr/bandwidth.hpp"
#include "clusterkr/dataset.hpp"
#include "clusterkr/inference.hpp"
#include "clusterkr/kernels.hpp"
#include "clusterkr/regress.hpp"

namespace ckr {

/// Simulation design. Setup 1: Y = sin 2X + 2 exp(-16 X^2) + 0.5 e.
/// Setup 2: Y = X sin(2 pi X) + (2 + cos 2 pi X)/5 e.
/// X = sqrt(rho_x) X1_g + sqrt(1 - rho_x) X2_gj, e = sqrt(rho_e) c_g + sqrt(1 - rho_e) u_gj.
struct DgpConfig {
  int setup = 1;
  std::size_t G = 100;
  std::size_t n_g_base = 20;
  std::size_t n_g_last = 20;
  double rho_x = 0.2;
  double rho_e = 0.2;
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t n() const noexcept { return (G - 1) * n_g_base + n_g_last; }
};

/// Dataset for one replication; depends only on (config, replication).
ClusteredDataset generate(const DgpConfig& config, std::uint64_t replication);

double true_m(int setup, double x);
double true_m_prime(int setup, double x);
double true_m_second(int setup, double x);
/// Conditional standard deviation of the error term.
double true_error_sd(int setup, double x);

/// NW: kappa2 (m''/2 + f'/f m'), LL: kappa2 m''/2, with f the N(0,1) density.
double true_bias(int setup, Estimator est, double x, const Kernel& kernel);

/// [-1.5, 1.5] for Setup 1, [0, 1] for Setup 2.
WeightWindow default_window(int setup);

/// n evenly spaced points, endpoints inclusive.
std::vector<double> linspace(double lo, double hi, std::size_t n);

/// (1/n_grid) sum_k (m_hat(u_k, h) - m(u_k))^2 over an evenly spaced grid on the window.
double average_squared_error(const ClusteredDataset& ds, const Kernel& kernel, Estimator est, double h, int setup,
                             const WeightWindow& window, std::size_t grid_n = 50);

struct McOptions {
  unsigned threads = 0;  ///< 0 = default_threads()
  bool strict = false;   ///< rethrow the first replication failure
  Kernel kernel{};
};

struct FailureLog {
  std::size_t count = 0;
  /// "replication k: message" for the first few failures, in replication order.
  std::vector<std::string> examples;
};

struct AseRecord {
  BandwidthMethod method = BandwidthMethod::cr_cv;
  double mean_ase = 0.0;
  double se_ase = 0.0;
  double mean_h = 0.0;
  double se_h = 0.0;
  std::size_t reps = 0;
};

struct AseTable {
  DgpConfig config;
  Estimator estimator = Estimator::ll;
  std::vector<AseRecord> records;
  std::size_t requested = 0;
  FailureLog failures;
};

/// Per replication: select h by each method (CV methods search the default
/// grid around that replication's CR-ROT bandwidth), then evaluate the ASE.
AseTable run_ase_table(const DgpConfig& config, std::span<const BandwidthMethod> methods, Estimator est,
                       const WeightWindow& window, std::size_t reps, std::size_t grid_n = 50,
                       const McOptions& opts = {});

enum class BiasMode { undersmooth, infeasible_correct, ignore };
enum class CiVariant { iid, cr, lambda };

std::string_view to_string(BiasMode m) noexcept;
BiasMode parse_bias_mode(std::string_view name);
std::string_view to_string(CiVariant v) noexcept;

struct CoverageRecord {
  CiVariant variant = CiVariant::lambda;
  double x_eval = 0.0;
  double coverage = 0.0;
  double se_coverage = 0.0;  ///< binomial
  double mean_length = 0.0;
  double se_length = 0.0;
  std::size_t reps = 0;
};

struct CoverageTable {
  DgpConfig config;
  Estimator estimator = Estimator::ll;
  BiasMode bias_mode = BiasMode::undersmooth;
  double alpha = 0.05;
  std::vector<CoverageRecord> records;  ///< x_eval-major, then iid, cr, lambda
  double mean_h_m = 0.0;
  std::size_t requested = 0;
  FailureLog failures;
};

/// Per replication: h_cv by CR-CV, h_m from the bias mode, h_f = reference,
/// h_sigma2 = h_f; bands at every x_eval; coverage of m(x_eval).
CoverageTable run_coverage_table(const DgpConfig& config, std::span<const double> x_eval, Estimator est,
                                 std::size_t reps, BiasMode bias_mode, const McOptions& opts = {},
                                 double alpha = 0.05, CovMethod cov_method = CovMethod::parametric_compromise);

struct CvDecomposition {
  DgpConfig config;
  double h = 0.0;
  double mean_cv = 0.0;
  double se_cv = 0.0;
  /// E[sigma^2(X) w(X)]
  double sigma2_w = 0.0;
  /// sum_g (n_g/n) int (m - m_{-g})^2 f w, averaged over replications
  double mean_imse = 0.0;
  double se_imse = 0.0;
  /// mean over replications of CV(h) - sigma2_w - imse_rep
  double mean_gap = 0.0;
  double se_gap = 0.0;
  std::size_t reps = 0;
  std::size_t requested = 0;
  FailureLog failures;
};

/// Mean CR-CV criterion at a fixed h against sigma2_w + IMSE_{G-1}(h); the
/// IMSE integral uses composite Simpson with `simpson_n` nodes on the window.
CvDecomposition run_cv_decomposition(const DgpConfig& config, double h, Estimator est, const WeightWindow& window,
                                     std::size_t reps, const McOptions& opts = {}, std::size_t simpson_n = 301);

/// Rows are design cells; method columns carry mean/se of ASE and h.
void write_ase_csv(std::ostream& out, std::span<const AseTable> tables);
/// Rows are design cells x evaluation points; variant columns carry coverage and length.
void write_coverage_csv(std::ostream& out, std::span<const CoverageTable> tables);
void write_cv_decomposition_csv(std::ostream& out, std::span<const CvDecomposition> rows);

std::string ase_to_json(std::span<const AseTable> tables);
std::string coverage_to_json(std::span<const CoverageTable> tables);
std::string cv_decomposition_to_json(std::span<const CvDecomposition> rows);

}  // namespace ckr
