#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "clusterkr/bandwidth.hpp"
#include "clusterkr/error.hpp"
#include "clusterkr/inference.hpp"
#include "doctest.h"
#include "../oracles.hpp"

using namespace ckr;

namespace {

// Three clusters of four on a spread of x values.
oracle::Sample toy() {
  oracle::Sample s;
  const double xs[12] = {0.05, 0.21, 0.33, 0.48, 0.12, 0.29, 0.55, 0.71, 0.38, 0.62, 0.84, 0.97};
  const double ys[12] = {1.0, 1.4, 0.7, 1.9, 0.2, 0.9, 1.6, 1.1, 2.2, 1.3, 0.4, 0.8};
  for (int i = 0; i < 12; ++i) s.obs.push_back({i / 4, ys[i], {xs[i]}});
  return s;
}

std::vector<double> poly4_coef(const oracle::Sample& s, int skip) {
  std::vector<std::vector<double>> a(5, std::vector<double>(5, 0.0));
  std::vector<double> b(5, 0.0);
  for (const auto& o : s.obs) {
    if (o.cluster == skip) continue;
    double z[5] = {1, o.x[0], std::pow(o.x[0], 2), std::pow(o.x[0], 3), std::pow(o.x[0], 4)};
    for (int r = 0; r < 5; ++r) {
      b[r] += z[r] * o.y;
      for (int c = 0; c < 5; ++c) a[r][c] += z[r] * z[c];
    }
  }
  return *oracle::solve(a, b);
}

}  // namespace

TEST_CASE("normal quantiles") {
  CHECK(z_two_sided(0.05) == 1.959963984540054);
  CHECK(z_two_sided(0.10) == 1.6448536269514722);
  CHECK(z_two_sided(0.01) == 2.5758293035489004);
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
  CHECK(normal_quantile(0.2) == doctest::Approx(-0.8416212335729143).epsilon(1e-14));
  CHECK(normal_quantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-12));
  CHECK_THROWS_AS(normal_quantile(0.0), Error);
}

TEST_CASE("standard error formulas") {
  CHECK(se_iid(0.6, 1, 0.0, 1.0, 1000, 0.1) == 0.0);
  CHECK(se_iid(0.6, 1, 1.0, 1.0, 1000, 0.1) == doctest::Approx(std::sqrt(0.006)).epsilon(1e-14));
  CHECK(se_iid(0.6, 1, 1.0, 1.0, 4000, 0.1) == doctest::Approx(0.5 * std::sqrt(0.006)).epsilon(1e-14));
  CHECK_THROWS_AS(se_iid(0.6, 1, 1.0, 0.0, 1000, 0.1), Error);
  const double cr_term = 0.6 * 0.8 / 1.3;
  const double base = se_cr(0.6, 1, 0.8, 1.3, 500, 0.2);
  CHECK(se_lambda(cr_term, CovTermEstimate{0.0, CovMethod::parametric_compromise}, 1.3, 500, 0.2, 1).value ==
        doctest::Approx(base).epsilon(1e-14));
  CHECK(se_lambda(cr_term, CovTermEstimate{0.1, CovMethod::parametric_compromise}, 1.3, 500, 0.2, 1).value > base);
  const auto clamped = se_lambda(cr_term, CovTermEstimate{-5.0, CovMethod::nonparametric}, 1.3, 500, 0.2, 1);
  CHECK(clamped.clamped);
  CHECK(clamped.value == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("band matches a hand-assembled pipeline") {
  const auto s = toy();
  const auto ds = oracle::to_dataset(s);
  const Kernel k;
  BandConfig cfg;
  cfg.estimator = Estimator::nw;
  cfg.h_m = 0.6;
  cfg.h_f = 0.5;
  cfg.h_sigma2 = 0.45;
  const std::vector<double> x{0.5};
  const auto band = make_band(ds, k, x, cfg);

  const double m = *oracle::nw(s, 0.6, x, oracle::keep_all);
  double fsum = 0;
  for (const auto& o : s.obs) fsum += oracle::epanechnikov((o.x[0] - 0.5) / 0.5);
  const double f = fsum / (12 * 0.5);
  std::vector<double> fitted, jack, pilot;
  for (const auto& o : s.obs) {
    fitted.push_back(o.y - *oracle::nw(s, 0.6, o.x, oracle::keep_all));
    jack.push_back(o.y - *oracle::nw(s, 0.6, o.x, [&](std::size_t i) { return s.obs[i].cluster != o.cluster; }));
    const auto c = poly4_coef(s, o.cluster);
    double v = 0;
    for (int q = 4; q >= 0; --q) v = v * o.x[0] + c[q];
    pilot.push_back(o.y - v);
  }
  const double s2 = *oracle::cond_var(s, 0.45, x, fitted);
  const double s2t = *oracle::cond_var(s, 0.45, x, jack);
  double cross = 0, sx = 0, sxx = 0, sxy = 0, cnt = 0;
  for (std::size_t j = 0; j < 12; ++j)
    for (std::size_t l = 0; l < 12; ++l) {
      if (j == l || s.obs[j].cluster != s.obs[l].cluster) continue;
      if (j < l) cross += pilot[j] * pilot[l];
      sx += s.obs[j].x[0];
      sxx += s.obs[j].x[0] * s.obs[j].x[0];
      sxy += s.obs[j].x[0] * s.obs[l].x[0];
      cnt += 1;
    }
  const double mu = sx / cnt, var = sxx / cnt - mu * mu, cov = sxy / cnt - mu * mu;
  const double rho = cov / var, cm = mu + rho * (0.5 - mu), cv = (1 - rho * rho) * var;
  const double p = std::exp(-0.5 * (0.5 - cm) * (0.5 - cm) / cv) / std::sqrt(2 * std::numbers::pi * cv);
  const double lambda = 4.0 * 0.6;
  const double term = lambda * (cross / 18.0) * p / f;
  const double nh = 12 * 0.6;
  const double se1 = std::sqrt(0.6 * s2 / (nh * f));
  const double se2 = std::sqrt(0.6 * s2t / (nh * f));
  const double bracket = 0.6 * s2t / f + term;
  const double se3 = bracket > 0 ? std::sqrt(bracket / nh) : se2;

  CHECK(band.estimate == doctest::Approx(m).epsilon(1e-12));
  CHECK(band.fhat == doctest::Approx(f).epsilon(1e-12));
  CHECK(band.sigma2_hat == doctest::Approx(s2).epsilon(1e-12));
  CHECK(band.sigma2_tilde == doctest::Approx(s2t).epsilon(1e-12));
  CHECK(band.lambda == doctest::Approx(lambda).epsilon(1e-14));
  CHECK(band.cov_term.value == doctest::Approx(term).epsilon(1e-10));
  CHECK(band.se_iid == doctest::Approx(se1).epsilon(1e-12));
  CHECK(band.se_cr == doctest::Approx(se2).epsilon(1e-12));
  CHECK(band.se_lambda == doctest::Approx(se3).epsilon(1e-10));
  const double z = 1.959963984540054;
  CHECK(band.ci_lambda.lo == doctest::Approx(m - z * se3).epsilon(1e-10));
  CHECK(band.ci_iid.hi == doctest::Approx(m + z * se1).epsilon(1e-12));
}

TEST_CASE("band invariants on simulated-like data") {
  std::mt19937_64 rng(17);
  const auto ds = oracle::to_dataset(oracle::random_sample(rng, 30, 6, 1, 0));
  BandConfig cfg;
  cfg.h_m = 0.25;
  cfg.h_f = 0.3;
  cfg.h_sigma2 = 0.3;
  const std::vector<std::vector<double>> pts{{0.3}, {0.5}, {0.7}};
  const auto bands = make_bands(ds, Kernel(), pts, cfg);
  REQUIRE(bands.size() == 3);
  for (const auto& b : bands) {
    CHECK(b.se_lambda >= 0.0);
    CHECK(b.ci_iid.contains(b.estimate));
    if (b.cov_term.value >= 0.0) CHECK(b.ci_lambda.length() >= b.ci_cr.length() - 1e-15);
  }
  cfg.threads = 3;
  const auto again = make_bands(ds, Kernel(), pts, cfg);
  for (std::size_t i = 0; i < 3; ++i) CHECK(again[i].se_lambda == bands[i].se_lambda);

  // All three standard errors scale with the response.
  std::vector<Cluster> scaled;
  for (std::size_t g = 0; g < ds.G(); ++g) {
    auto c = ds.cluster(g);
    for (auto& y : c.y) y *= 3.0;
    scaled.push_back(std::move(c));
  }
  cfg.threads = 1;
  const auto sb = make_bands(ClusteredDataset(scaled, 1, 0), Kernel(), pts, cfg);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(sb[i].se_iid == doctest::Approx(3.0 * bands[i].se_iid).epsilon(1e-10));
    CHECK(sb[i].se_cr == doctest::Approx(3.0 * bands[i].se_cr).epsilon(1e-10));
    CHECK(sb[i].se_lambda == doctest::Approx(3.0 * bands[i].se_lambda).epsilon(1e-10));
  }
}

TEST_CASE("singleton clusters with an exact fit") {
  std::vector<Cluster> cs;
  for (int i = 0; i < 12; ++i) cs.push_back({std::to_string(i), {4.0}, {{i / 11.0}}});
  const ClusteredDataset ds(cs, 1, 0);
  BandConfig cfg;
  cfg.h_m = 0.4;
  cfg.h_f = 0.4;
  cfg.h_sigma2 = 0.4;
  cfg.cov_method = CovMethod::nonparametric;
  const std::array<double, 1> x{0.5};
  CHECK_THROWS_AS(make_band(ds, Kernel(), x, cfg), Error);
  const auto sig = residuals(ds, Kernel(), 0.4, Estimator::ll, ResidualVariant::jackknife);
  CHECK(cond_var_nw(ds, Kernel(), 0.4, x, sig) == doctest::Approx(0.0));
}

TEST_CASE("band writers") {
  std::mt19937_64 rng(19);
  const auto ds = oracle::to_dataset(oracle::random_sample(rng, 20, 5, 1, 0));
  BandConfig cfg;
  cfg.h_m = 0.3;
  cfg.h_f = 0.3;
  cfg.h_sigma2 = 0.3;
  const std::vector<std::vector<double>> pts{{0.3}, {0.5}, {0.7}};
  const auto bands = make_bands(ds, Kernel(), pts, cfg);
  std::ostringstream a, b, c;
  write_plot_csv(a, bands);
  write_plot_csv(b, bands);
  CHECK(a.str() == b.str());
  std::istringstream lines(a.str());
  std::string line;
  int count = 0;
  std::getline(lines, line);
  CHECK(line == "x,mhat,iid_lo,iid_hi,cr_lo,cr_hi,lambda_lo,lambda_hi");
  while (std::getline(lines, line)) ++count;
  CHECK(count == 3);
  write_bands_csv(c, bands);
  CHECK(c.str().rfind("x,mhat,se_iid,se_cr,se_lambda,ci_iid_lo", 0) == 0);
  std::ostringstream svg;
  write_plot_svg(svg, bands);
  CHECK(svg.str().find("<svg") != std::string::npos);
  std::ostringstream empty;
  try {
    write_plot_csv(empty, std::span<const InferenceBand>{});
    FAIL("expected validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::validation);
  }
}
