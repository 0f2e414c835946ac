// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [criterion numbers...]
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "clusterkr/bandwidth.hpp"
#include "clusterkr/density.hpp"
#include "clusterkr/error.hpp"
#include "clusterkr/kernels.hpp"
#include "clusterkr/montecarlo.hpp"
#include "clusterkr/regress.hpp"
#include "clusterkr/variance.hpp"
#include "../oracles.hpp"

using namespace ckr;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// 1. Kernel constants against adaptive quadrature.
Outcome kernel_constants_check() {
  double worst = 0.0;
  struct Case {
    KernelType type;
    double kappa2, r_k;
    double (*f)(double);
  };
  const Case cases[] = {{KernelType::epanechnikov, 0.2, 0.6, oracle::epanechnikov},
                        {KernelType::quartic, 1.0 / 7.0, 5.0 / 7.0, oracle::quartic}};
  bool ok = true;
  for (const auto& c : cases) {
    const Kernel k(c.type);
    const double q2 = oracle::integrate([&](double u) { return u * u * c.f(u); }, -1.0, 1.0);
    const double qr = oracle::integrate([&](double u) { return c.f(u) * c.f(u); }, -1.0, 1.0);
    const double q0 = oracle::integrate(c.f, -1.0, 1.0);
    for (double diff : {std::abs(q2 - k.kappa2()), std::abs(qr - k.roughness()), std::abs(q0 - 1.0),
                        std::abs(k.kappa2() - c.kappa2), std::abs(k.roughness() - c.r_k)}) {
      worst = std::max(worst, diff);
      ok = ok && diff <= 1e-10;
    }
    for (double u = -1.2; u <= 1.2; u += 0.01) ok = ok && std::abs(k(u) - c.f(u)) <= 1e-15;
  }
  return {ok, "max deviation " + fmt(worst, 3)};
}

// 2. Exactness properties over random small datasets.
Outcome exactness_check() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> count(3, 20);
  const Kernel k;
  int cases = 0, failures = 0;
  double worst_affine = 0.0;
  while (cases < 1200) {
    const std::size_t d = cases % 3 == 2 ? 2 : 1;
    const int n = count(rng);
    const double h = 0.2 + 0.6 * unif(rng);
    std::vector<double> x(d);
    for (auto& v : x) v = unif(rng);
    const double a = 4.0 * unif(rng) - 2.0, c = 3.0 * unif(rng) + 0.5;
    std::vector<double> slope(d);
    for (auto& s : slope) s = 6.0 * unif(rng) - 3.0;
    std::vector<Cluster> affine, constant, noisy;
    std::size_t in_window = 0;
    double lo = INFINITY, hi = -INFINITY;
    for (int i = 0; i < n; ++i) {
      std::vector<double> xi(d);
      double lin = a;
      for (std::size_t q = 0; q < d; ++q) {
        xi[q] = unif(rng);
        lin += slope[q] * xi[q];
      }
      const double y = 5.0 * unif(rng) - 2.5;
      const std::string id = std::to_string(i % 4);
      auto push = [&](std::vector<Cluster>& cs, double value) {
        auto it = std::find_if(cs.begin(), cs.end(), [&](const Cluster& cl) { return cl.id == id; });
        if (it == cs.end()) {
          cs.push_back({id, {}, {}});
          it = cs.end() - 1;
        }
        it->y.push_back(value);
        it->x.push_back(xi);
      };
      push(affine, lin);
      push(constant, c);
      push(noisy, y);
      if (oracle::product_kernel(xi, x, h) > 0.0) {
        ++in_window;
        lo = std::min(lo, y);
        hi = std::max(hi, y);
      }
    }
    if (in_window < d + 2) continue;
    ++cases;
    double truth = a;
    for (std::size_t q = 0; q < d; ++q) truth += slope[q] * x[q];
    const auto r_aff = ll_fit(ClusteredDataset(affine, d, 0), k, h, x);
    const double err = std::abs(r_aff.estimate - truth);
    worst_affine = std::max(worst_affine, err);
    const bool aff_ok = err <= 1e-10 && !r_aff.nw_fallback;
    const bool const_ok = nw_fit(ClusteredDataset(constant, d, 0), k, h, x).estimate == c;
    const double m = nw_fit(ClusteredDataset(noisy, d, 0), k, h, x).estimate;
    const bool range_ok = m >= lo && m <= hi;
    if (!(aff_ok && const_ok && range_ok)) ++failures;
  }
  return {failures == 0, std::to_string(cases) + " datasets, " + std::to_string(failures) +
                             " failures, max affine error " + fmt(worst_affine, 3)};
}

// 3. Library routines against brute-force oracles.
Outcome oracle_check() {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  const Kernel k;
  const int target = 200;
  int n_nw = 0, n_ll = 0, n_cv_loco = 0, n_cv_loo = 0, n_var = 0, n_cov = 0, n_joint = 0;
  int failures = 0;
  double worst = 0.0;
  auto record = [&](double got, double want) {
    const double rel = std::abs(got - want) / std::max(1.0, std::abs(want));
    worst = std::max(worst, rel);
    if (!(rel <= 1e-10)) ++failures;
  };
  for (int rep = 0; std::min({n_nw, n_ll, n_cv_loco, n_cv_loo, n_var, n_cov, n_joint}) < target; ++rep) {
    const std::size_t d_ind = 1 + rep % 2, d_cls = rep % 3 == 1 ? 1 : 0;
    const std::size_t G = 4 + static_cast<std::size_t>(rep % 9);
    auto s = oracle::cluster_major(oracle::random_sample(rng, G, 6, d_ind, d_cls));
    if (s.obs.size() > 60) s.obs.resize(60);
    const auto ds = oracle::to_dataset(s);
    const double h = 0.5 + 0.05 * static_cast<double>(rep % 7);
    std::vector<double> x_ind(d_ind), x_cls(d_cls);
    for (auto& v : x_ind) v = 0.3 + 0.4 * std::abs(std::sin(rep * 1.7));
    for (auto& v : x_cls) v = 0.5;
    std::vector<double> x(x_ind);
    x.insert(x.end(), x_cls.begin(), x_cls.end());

    if (const auto ref = oracle::nw(s, h, x, oracle::keep_all)) {
      record(nw_fit(ds, k, h, x).estimate, *ref);
      ++n_nw;
    }
    const auto ll_lib = ll_fit(ds, k, h, x);
    if (const auto ref = oracle::ll(s, h, x, oracle::keep_all); ref && !ll_lib.nw_fallback) {
      record(ll_lib.estimate, *ref);
      ++n_ll;
    }
    std::vector<double> wlo{0.15}, whi{0.85};
    for (std::size_t q = 1; q < s.d(); ++q) {
      wlo.push_back(-1.0);
      whi.push_back(2.0);
    }
    const WeightWindow w(wlo, whi);
    const double hcv = 1.0;
    for (bool cluster : {true, false}) {
      const bool local = rep % 2 == 0;
      const auto ref = oracle::cv(s, hcv, local, 0.15, 0.85, cluster);
      if (!ref) continue;
      try {
        record(cv_criterion(ds, k, hcv, local ? Estimator::ll : Estimator::nw, w,
                            cluster ? CvMode::leave_one_cluster_out : CvMode::leave_one_out),
               *ref);
        ++(cluster ? n_cv_loco : n_cv_loo);
      } catch (const Error&) {
        ++failures;
      }
    }
    std::vector<double> e(s.obs.size());
    for (auto& v : e) v = nd(rng);
    const ResidualSet res{ResidualVariant::fitted, e};
    if (const auto ref = oracle::cond_var(s, h, x, e)) {
      record(cond_var_nw(ds, k, h, x, res), *ref);
      ++n_var;
    }
    if (within_cluster_pairs(ds) == 0) continue;
    const double b = h + 0.2;
    if (const auto ref = oracle::cond_cov(s, b, x_ind, x_cls, e)) {
      record(cond_cov_nw(ds, k, b, x_ind, x_cls, res), *ref);
      ++n_cov;
    }
    record(joint_density_pairs(ds, k, b, x_ind, x_cls).value, oracle::joint_density(s, b, x_ind, x_cls));
    ++n_joint;
  }
  std::ostringstream os;
  os << "cases nw=" << n_nw << " ll=" << n_ll << " cv_cluster=" << n_cv_loco << " cv_obs=" << n_cv_loo
     << " var=" << n_var << " cov=" << n_cov << " joint=" << n_joint << ", failures " << failures
     << ", max relative deviation " << fmt(worst, 3);
  return {failures == 0, os.str()};
}

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Local linear fit at u on plain arrays, skipping [skip_lo, skip_hi).
double ll_plain(const std::vector<double>& xs, const std::vector<double>& ys, std::size_t skip_lo, std::size_t skip_hi,
                double h, double u) {
  double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i >= skip_lo && i < skip_hi) continue;
    const double z = (xs[i] - u) / h;
    if (std::abs(z) >= 1.0) continue;
    const double w = 0.75 * (1.0 - z * z);
    const double dx = xs[i] - u;
    s0 += w;
    s1 += w * dx;
    s2 += w * dx * dx;
    t0 += w * ys[i];
    t1 += w * dx * ys[i];
  }
  return (s2 * t0 - s1 * t1) / (s0 * s2 - s1 * s1);
}

// 4. Mean CV(h) against sigma2_w plus the leave-one-cluster-out IMSE.
Outcome cv_decomposition_check() {
  const DgpConfig cfg{1, 30, 5, 5, 0.2, 0.2, 404};
  const double h = 0.4, lo = -1.5, hi = 1.5;
  const std::size_t M = 400, nodes = 601;
  const WeightWindow window = WeightWindow::interval(lo, hi);
  const double sigma2_w = 0.25 * (normal_cdf(hi) - normal_cdf(lo));
  std::vector<double> gaps(M), cvs(M), imses(M);
  const double step = (hi - lo) / static_cast<double>(nodes - 1);
  for (std::size_t r = 0; r < M; ++r) {
    const auto ds = generate(cfg, r);
    cvs[r] = cv_criterion(ds, Kernel(), h, Estimator::ll, window, CvMode::leave_one_cluster_out);
    std::vector<double> xs(ds.n()), ys(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) {
      xs[i] = ds.x(i)[0];
      ys[i] = ds.y(i);
    }
    double imse = 0.0;
    for (std::size_t g = 0; g < ds.G(); ++g) {
      double integral = 0.0;
      for (std::size_t k = 0; k < nodes; ++k) {
        const double u = lo + step * static_cast<double>(k);
        const double diff = std::sin(2.0 * u) + 2.0 * std::exp(-16.0 * u * u) -
                            ll_plain(xs, ys, ds.cluster_begin(g), ds.cluster_end(g), h, u);
        const double wgt = (k == 0 || k + 1 == nodes) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        integral += wgt * diff * diff * normal_pdf(u);
      }
      imse += static_cast<double>(ds.cluster_size(g)) / static_cast<double>(ds.n()) * integral * step / 3.0;
    }
    imses[r] = imse;
    gaps[r] = cvs[r] - sigma2_w - imse;
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto se = [&](const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  };
  const double gap = mean(gaps), gap_se = se(gaps);
  std::ostringstream os;
  os << "h=" << h << " M=" << M << ": mean CV " << fmt(mean(cvs)) << " (se " << fmt(se(cvs), 3) << "), sigma2_w "
     << fmt(sigma2_w) << ", IMSE " << fmt(mean(imses)) << ", gap " << fmt(gap, 3) << " = " << fmt(gap / gap_se, 3)
     << " SE";
  return {std::abs(gap) <= 3.0 * gap_se, os.str()};
}

// 5. Desk-scale ASE cell: Setup 1, local linear, rho = (0.2, 0.2).
Outcome ase_check() {
  const DgpConfig cfg{1, 100, 20, 20, 0.2, 0.2, 1};
  const std::vector<BandwidthMethod> methods{BandwidthMethod::cr_rot, BandwidthMethod::cr_cv};
  McOptions opts;
  opts.strict = true;
  const auto t = run_ase_table(cfg, methods, Estimator::ll, default_window(1), 300, 50, opts);
  const AseRecord& rot = t.records[0];
  const AseRecord& cv = t.records[1];
  // Reference bandwidth is quoted for the unit-variance Epanechnikov kernel.
  const double h_unit_variance = cv.mean_h / std::sqrt(5.0);
  const bool ase_ok = std::abs(cv.mean_ase - 0.0041) <= 0.25 * 0.0041;
  const bool h_ok = std::abs(h_unit_variance - 0.0483) <= 0.15 * 0.0483;
  const bool order_ok = cv.mean_ase < rot.mean_ase;
  std::ostringstream os;
  os << "M=" << cv.reps << " failures=" << t.failures.count << ": CR-CV ASE " << fmt(cv.mean_ase, 4) << " (se "
     << fmt(cv.se_ase, 2) << ", target 0.0041 +-25%), mean h " << fmt(cv.mean_h, 4) << " = " << fmt(h_unit_variance, 4)
     << " in unit-variance kernel units (target 0.0483 +-15%), CR-ROT ASE " << fmt(rot.mean_ase, 4);
  return {ase_ok && h_ok && order_ok && t.failures.count == 0, os.str()};
}

// 6. Desk-scale coverage at x = 0.75.
Outcome coverage_check() {
  const DgpConfig cfg{1, 100, 20, 100, 0.5, 0.5, 1};
  const std::vector<double> xs{0.75};
  McOptions opts;
  opts.strict = true;
  const auto t = run_coverage_table(cfg, xs, Estimator::ll, 500, BiasMode::undersmooth, opts);
  double iid = 0, cr = 0, lam = 0, se = 0;
  for (const auto& r : t.records) {
    if (r.variant == CiVariant::iid) iid = r.coverage;
    if (r.variant == CiVariant::cr) cr = r.coverage;
    if (r.variant == CiVariant::lambda) {
      lam = r.coverage;
      se = r.se_coverage;
    }
  }
  std::ostringstream os;
  os << "M=500 failures=" << t.failures.count << ": coverage CI " << fmt(iid, 4) << ", CI_CR " << fmt(cr, 4)
     << ", CI_lambda " << fmt(lam, 4) << " (se " << fmt(se, 2) << ", target [0.925, 0.975]), mean h_m "
     << fmt(t.mean_h_m, 4);
  return {lam >= 0.925 && lam <= 0.975 && iid < lam && t.failures.count == 0, os.str()};
}

// 7. Lambda multipliers.
Outcome lambda_check() {
  auto sizes = [](std::size_t G, std::size_t last) {
    ClusterSizeSummary s;
    s.G = G;
    s.n = (G - 1) * 20 + last;
    s.max_ng = std::max<std::size_t>(20, last);
    s.sum_ng_sq = (G - 1) * 400 + last * last;
    return s;
  };
  bool ok = true;
  double worst = 0.0;
  for (double h : {0.01, 0.0483, 0.1, 0.37}) {
    const double a = lambda_hat(sizes(100, 20), h, 1).value;
    const double b = lambda_hat(sizes(100, 100), h, 1).value;
    const double ea = 20.0 * h, eb = 49600.0 / 2080.0 * h;
    worst = std::max({worst, std::abs(a - ea) / ea, std::abs(b - eb) / eb});
    ok = ok && std::abs(a - ea) <= 2 * std::numeric_limits<double>::epsilon() * ea &&
         std::abs(b - eb) <= 2 * std::numeric_limits<double>::epsilon() * eb;
  }
  return {ok, "multipliers 20 and " + fmt(49600.0 / 2080.0, 8) + ", max relative error " + fmt(worst, 3)};
}

// 8. Undersmoothing example.
Outcome undersmooth_check() {
  const double v = undersmooth(0.1301, 3784);
  return {std::abs(v - 0.0642) <= 5e-5, "undersmooth(0.1301, 3784) = " + fmt(v, 6)};
}

// 9. Second derivatives and bias formulas against finite differences.
Outcome bias_check() {
  const Kernel k;
  double worst = 0.0;
  bool ok = true;
  for (int setup : {1, 2}) {
    const auto m = [setup](double x) { return true_m(setup, x); };
    for (double x = -2.0; x <= 2.0 + 1e-12; x += 0.05) {
      auto d2 = [&](double s) { return (m(x + s) - 2.0 * m(x) + m(x - s)) / (s * s); };
      auto d1 = [&](double s) { return (m(x + s) - m(x - s)) / (2.0 * s); };
      const double s = 1e-3;
      const double fd2 = (4.0 * d2(s / 2) - d2(s)) / 3.0;
      const double fd1 = (4.0 * d1(s / 2) - d1(s)) / 3.0;
      const double e2 = std::abs(true_m_second(setup, x) - fd2);
      const double e_ll = std::abs(true_bias(setup, Estimator::ll, x, k) - 0.1 * fd2);
      const double e_nw = std::abs(true_bias(setup, Estimator::nw, x, k) - 0.2 * (0.5 * fd2 - x * fd1));
      worst = std::max({worst, e2, e_ll, e_nw});
      ok = ok && e2 <= 1e-6 && e_ll <= 1e-6 && e_nw <= 1e-6;
    }
  }
  const bool zero_ok = true_bias(1, Estimator::ll, 0.0, k) == true_bias(1, Estimator::nw, 0.0, k);
  return {ok && zero_ok, "max deviation " + fmt(worst, 3) + ", B_LL(0) = B_nw(0) = " +
                             fmt(true_bias(1, Estimator::ll, 0.0, k), 8)};
}

// 10. Harness output is independent of the worker count.
Outcome determinism_check() {
  const DgpConfig cfg{1, 30, 5, 10, 0.5, 0.5, 99};
  const std::vector<BandwidthMethod> methods{BandwidthMethod::rot, BandwidthMethod::cr_rot, BandwidthMethod::cv,
                                             BandwidthMethod::cr_cv};
  const std::vector<double> xs{0.75, -0.5};
  std::string out[2];
  for (int i = 0; i < 2; ++i) {
    McOptions opts;
    opts.threads = i == 0 ? 1 : 8;
    std::ostringstream os;
    write_ase_csv(os, std::vector<AseTable>{run_ase_table(cfg, methods, Estimator::ll, default_window(1), 12, 50, opts)});
    write_coverage_csv(os, std::vector<CoverageTable>{
                               run_coverage_table(cfg, xs, Estimator::ll, 12, BiasMode::undersmooth, opts)});
    out[i] = os.str();
  }
  return {out[0] == out[1], std::to_string(out[0].size()) + " bytes compared at 1 and 8 threads"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"kernel constants", kernel_constants_check},
      {"exactness suite", exactness_check},
      {"oracle equivalence", oracle_check},
      {"CV decomposition", cv_decomposition_check},
      {"ASE desk-scale", ase_check},
      {"coverage desk-scale", coverage_check},
      {"lambda multipliers", lambda_check},
      {"undersmoothing", undersmooth_check},
      {"bias formulas", bias_check},
      {"determinism", determinism_check},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
