#pragma once

#include <span>
#include <string_view>

namespace ckr {

enum class KernelType { epanechnikov, quartic, gaussian_truncated };

std::string_view to_string(KernelType type) noexcept;

/// Parse the lowercase name ("epanechnikov", "quartic", "gaussian-truncated").
KernelType parse_kernel_type(std::string_view name);

/// Symmetric, nonnegative, unit-mass univariate kernel with compact support,
/// lifted to d dimensions as a product kernel.
///
/// The analytic constants are fixed in closed form at construction:
///   kappa2     = int u^2 k(u) du
///   roughness  = int k(u)^2 du        (R_k)
///   support    = L such that k(u) = 0 for |u| > L
///   upper      = sup k = k(0)
class Kernel {
 public:
  explicit Kernel(KernelType type = KernelType::epanechnikov);

  KernelType type() const noexcept { return type_; }
  std::string_view name() const noexcept { return to_string(type_); }

  double kappa2() const noexcept { return kappa2_; }
  double roughness() const noexcept { return roughness_; }
  double support_radius() const noexcept { return support_; }
  double upper_bound() const noexcept { return upper_; }

  double operator()(double u) const noexcept;

  /// prod_q k(u_q). Throws on an empty vector.
  double product(std::span<const double> u) const;

  /// prod_q k((a_q - b_q) / h) without materializing the scaled vector.
  /// Returns 0 as soon as one factor vanishes.
  double product_scaled(std::span<const double> a, std::span<const double> b, double h) const noexcept;

 private:
  KernelType type_;
  double kappa2_;
  double roughness_;
  double support_;
  double upper_;
  double gauss_norm_ = 1.0;  // 1 / (sqrt(2 pi) * (2 Phi(L) - 1)) for the truncated Gaussian
};

struct KernelConstants {
  double kappa2;
  double r_k;
};

KernelConstants kernel_constants(const Kernel& kernel) noexcept;

}  // namespace ckr
