#include "clusterkr/kernels.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "clusterkr/error.hpp"

namespace ckr {

namespace {
constexpr double kGaussTruncation = 6.0;
}

std::string_view to_string(KernelType type) noexcept {
  switch (type) {
    case KernelType::epanechnikov: return "epanechnikov";
    case KernelType::quartic: return "quartic";
    case KernelType::gaussian_truncated: return "gaussian-truncated";
  }
  return "unknown";
}

KernelType parse_kernel_type(std::string_view name) {
  if (name == "epanechnikov") return KernelType::epanechnikov;
  if (name == "quartic") return KernelType::quartic;
  if (name == "gaussian-truncated") return KernelType::gaussian_truncated;
  throw_invalid("unknown kernel '" + std::string(name) +
                "' (expected epanechnikov, quartic or gaussian-truncated)");
}

Kernel::Kernel(KernelType type) : type_(type) {
  switch (type) {
    case KernelType::epanechnikov:
      // k(u) = 3/4 (1 - u^2) on [-1, 1]
      kappa2_ = 0.2;
      roughness_ = 0.6;
      support_ = 1.0;
      upper_ = 0.75;
      break;
    case KernelType::quartic:
      // k(u) = 15/16 (1 - u^2)^2 on [-1, 1]
      kappa2_ = 1.0 / 7.0;
      roughness_ = 5.0 / 7.0;
      support_ = 1.0;
      upper_ = 15.0 / 16.0;
      break;
    case KernelType::gaussian_truncated: {
      // phi(u) / Z on [-L, L], Z = erf(L / sqrt 2)
      const double a = kGaussTruncation;
      const double z = std::erf(a / std::numbers::sqrt2);
      const double phi_a = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
      gauss_norm_ = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * z);
      kappa2_ = 1.0 - 2.0 * a * phi_a / z;
      roughness_ = std::erf(a) / (2.0 * std::sqrt(std::numbers::pi) * z * z);
      support_ = a;
      upper_ = gauss_norm_;
      break;
    }
  }
}

double Kernel::operator()(double u) const noexcept {
  const double au = std::fabs(u);
  if (!(au <= support_)) return 0.0;
  switch (type_) {
    case KernelType::epanechnikov: return 0.75 * (1.0 - u * u);
    case KernelType::quartic: {
      const double t = 1.0 - u * u;
      return 0.9375 * t * t;
    }
    case KernelType::gaussian_truncated: return gauss_norm_ * std::exp(-0.5 * u * u);
  }
  return 0.0;
}

double Kernel::product(std::span<const double> u) const {
  if (u.empty()) throw_invalid("product kernel needs dimension >= 1");
  double out = 1.0;
  for (double v : u) {
    out *= (*this)(v);
    if (out == 0.0) return 0.0;
  }
  return out;
}

double Kernel::product_scaled(std::span<const double> a, std::span<const double> b,
                              double h) const noexcept {
  double out = 1.0;
  for (std::size_t q = 0; q < a.size(); ++q) {
    out *= (*this)((a[q] - b[q]) / h);
    if (out == 0.0) return 0.0;
  }
  return out;
}

KernelConstants kernel_constants(const Kernel& kernel) noexcept {
  return {kernel.kappa2(), kernel.roughness()};
}

}  // namespace ckr
