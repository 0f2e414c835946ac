#include <array>
#include <cmath>
#include <vector>

#include "clusterkr/error.hpp"
#include "clusterkr/kernels.hpp"
#include "doctest.h"
#include "../oracles.hpp"

using ckr::Kernel;
using ckr::KernelType;

TEST_CASE("epanechnikov point values") {
  const Kernel k(KernelType::epanechnikov);
  CHECK(k(0.0) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(k(1.5) == 0.0);
  CHECK(k(0.25) == doctest::Approx(0.703125).epsilon(1e-15));
  CHECK(k(-1.0) == 0.0);
}

TEST_CASE("product kernel values") {
  const Kernel k(KernelType::epanechnikov);
  const std::array<double, 2> zero{0.0, 0.0}, quarter{0.25, 0.0}, outside{0.1, 1.2};
  CHECK(k.product(zero) == doctest::Approx(0.5625).epsilon(1e-15));
  CHECK(k.product(quarter) == doctest::Approx(0.52734375).epsilon(1e-15));
  for (auto type : {KernelType::epanechnikov, KernelType::quartic, KernelType::gaussian_truncated}) {
    const Kernel kk(type);
    const std::array<double, 2> far{0.1, kk.support_radius() + 0.5};
    CHECK(kk.product(far) == 0.0);
  }
  CHECK(k.product(outside) == 0.0);
  CHECK_THROWS_AS(k.product(std::vector<double>{}), ckr::Error);
}

TEST_CASE("product kernel symmetry and permutation invariance") {
  const Kernel k(KernelType::quartic);
  const std::array<double, 3> u{0.1, -0.4, 0.7}, perm{0.7, 0.1, -0.4}, flipped{-0.1, 0.4, -0.7};
  CHECK(k.product(u) == doctest::Approx(k.product(perm)).epsilon(1e-15));
  CHECK(k.product(u) == doctest::Approx(k.product(flipped)).epsilon(1e-15));
}

TEST_CASE("stored constants match quadrature") {
  for (auto type : {KernelType::epanechnikov, KernelType::quartic, KernelType::gaussian_truncated}) {
    const Kernel k(type);
    const double L = k.support_radius();
    auto f = [&](double u) { return k(u); };
    CAPTURE(k.name());
    CHECK(std::abs(oracle::integrate(f, -L, L) - 1.0) < 1e-10);
    CHECK(std::abs(oracle::integrate([&](double u) { return u * k(u); }, -L, L)) < 1e-10);
    CHECK(std::abs(oracle::integrate([&](double u) { return u * u * k(u); }, -L, L) - k.kappa2()) < 1e-10);
    CHECK(std::abs(oracle::integrate([&](double u) { return k(u) * k(u); }, -L, L) - k.roughness()) < 1e-10);
    CHECK(k.upper_bound() == doctest::Approx(k(0.0)));
  }
  const auto e = ckr::kernel_constants(Kernel(KernelType::epanechnikov));
  CHECK(e.kappa2 == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(e.r_k == doctest::Approx(0.6).epsilon(1e-15));
  const auto q = ckr::kernel_constants(Kernel(KernelType::quartic));
  CHECK(q.kappa2 == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  CHECK(q.r_k == doctest::Approx(5.0 / 7.0).epsilon(1e-15));
}

TEST_CASE("kernel names round trip") {
  for (auto type : {KernelType::epanechnikov, KernelType::quartic, KernelType::gaussian_truncated})
    CHECK(ckr::parse_kernel_type(ckr::to_string(type)) == type);
  CHECK_THROWS_AS(ckr::parse_kernel_type("triangle"), ckr::Error);
}

TEST_CASE("scaled product agrees with explicit scaling") {
  const Kernel k(KernelType::epanechnikov);
  const std::array<double, 2> a{0.3, 0.9}, b{0.1, 0.7};
  const std::array<double, 2> u{(a[0] - b[0]) / 0.5, (a[1] - b[1]) / 0.5};
  CHECK(k.product_scaled(a, b, 0.5) == doctest::Approx(k.product(u)).epsilon(1e-14));
}
