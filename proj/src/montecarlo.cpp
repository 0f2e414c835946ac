#include "clusterkr/montecarlo.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>

#include "clusterkr/error.hpp"
#include "clusterkr/format.hpp"
#include "clusterkr/parallel.hpp"
#include "clusterkr/rng.hpp"
#include "json.hpp"

namespace ckr {

void DgpConfig::validate() const {
  if (setup != 1 && setup != 2) throw_invalid("setup must be 1 or 2, got " + std::to_string(setup));
  if (G < 2) throw_invalid("G must be at least 2");
  if (n_g_base == 0 || n_g_last == 0) throw_invalid("cluster sizes must be positive");
  if (!(rho_x >= 0.0 && rho_x < 1.0)) throw_invalid("rho_x must lie in [0, 1)");
  if (!(rho_e >= 0.0 && rho_e < 1.0)) throw_invalid("rho_e must lie in [0, 1)");
}

ClusteredDataset generate(const DgpConfig& config, std::uint64_t replication) {
  config.validate();
  NormalStream rng(config.seed, replication);
  const double ax = std::sqrt(config.rho_x), bx = std::sqrt(1.0 - config.rho_x);
  const double ae = std::sqrt(config.rho_e), be = std::sqrt(1.0 - config.rho_e);
  std::vector<Cluster> clusters(config.G);
  for (std::size_t g = 0; g < config.G; ++g) {
    Cluster& c = clusters[g];
    c.id = std::to_string(g + 1);
    const std::size_t size = g + 1 == config.G ? config.n_g_last : config.n_g_base;
    const double x1 = rng.normal();
    const double cg = rng.normal();
    c.y.resize(size);
    c.x.resize(size);
    for (std::size_t j = 0; j < size; ++j) {
      const double x = ax * x1 + bx * rng.normal();
      const double e = ae * cg + be * rng.normal();
      c.x[j] = {x};
      c.y[j] = true_m(config.setup, x) + true_error_sd(config.setup, x) * e;
    }
  }
  return ClusteredDataset(std::move(clusters), 1, 0);
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_setup(int setup) {
  if (setup != 1 && setup != 2) throw_invalid("setup must be 1 or 2, got " + std::to_string(setup));
}

double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(kTwoPi); }
double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

double true_m(int setup, double x) {
  check_setup(setup);
  if (setup == 1) return std::sin(2.0 * x) + 2.0 * std::exp(-16.0 * x * x);
  return x * std::sin(kTwoPi * x);
}

double true_m_prime(int setup, double x) {
  check_setup(setup);
  if (setup == 1) return 2.0 * std::cos(2.0 * x) - 64.0 * x * std::exp(-16.0 * x * x);
  return std::sin(kTwoPi * x) + kTwoPi * x * std::cos(kTwoPi * x);
}

double true_m_second(int setup, double x) {
  check_setup(setup);
  if (setup == 1) return -4.0 * std::sin(2.0 * x) + (2048.0 * x * x - 64.0) * std::exp(-16.0 * x * x);
  return 2.0 * kTwoPi * std::cos(kTwoPi * x) - kTwoPi * kTwoPi * x * std::sin(kTwoPi * x);
}

double true_error_sd(int setup, double x) {
  check_setup(setup);
  if (setup == 1) return 0.5;
  return (2.0 + std::cos(kTwoPi * x)) / 5.0;
}

double true_bias(int setup, Estimator est, double x, const Kernel& kernel) {
  const double half_m2 = 0.5 * true_m_second(setup, x);
  if (est == Estimator::ll) return kernel.kappa2() * half_m2;
  // f'/f = -x for the N(0, 1) marginal
  return kernel.kappa2() * (half_m2 - x * true_m_prime(setup, x));
}

WeightWindow default_window(int setup) {
  check_setup(setup);
  return setup == 1 ? WeightWindow::interval(-1.5, 1.5) : WeightWindow::interval(0.0, 1.0);
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 0) throw_invalid("linspace needs n >= 1");
  if (n == 1) return {lo};
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k)
    out[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
  out.back() = hi;
  return out;
}

double average_squared_error(const ClusteredDataset& ds, const Kernel& kernel, Estimator est, double h, int setup,
                             const WeightWindow& window, std::size_t grid_n) {
  if (window.dim() != 1) throw_invalid("ASE needs a one-dimensional window");
  double sum = 0.0;
  for (double u : linspace(window.lo()[0], window.hi()[0], grid_n)) {
    const double r = fit(ds, kernel, est, h, std::span<const double>(&u, 1)).estimate - true_m(setup, u);
    sum += r * r;
  }
  return sum / static_cast<double>(grid_n);
}

namespace {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe out;
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  if (v.size() < 2) {
    out.se = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  double ss = 0.0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  out.se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  return out;
}

constexpr std::size_t kMaxFailureExamples = 5;

// Runs fn(k) for every replication; slot k holds the result or stays empty on
// failure. Strict mode rethrows the lowest failing replication.
template <class R, class Fn>
std::vector<std::optional<R>> replicate(std::size_t reps, const McOptions& opts, FailureLog& log, Fn&& fn) {
  if (reps == 0) throw_invalid("number of replications must be at least 1");
  std::vector<std::optional<R>> results(reps);
  std::vector<std::string> errors(reps);
  parallel_for(reps, opts.threads, [&](std::size_t k) {
    try {
      results[k] = fn(k);
    } catch (const Error& e) {
      if (opts.strict)
        throw Error(e.kind(), "replication " + std::to_string(k) + ": " + e.what());
      errors[k] = e.what();
    }
  });
  for (std::size_t k = 0; k < reps; ++k) {
    if (results[k]) continue;
    ++log.count;
    if (log.examples.size() < kMaxFailureExamples)
      log.examples.push_back("replication " + std::to_string(k) + ": " + errors[k]);
  }
  return results;
}

bool is_cv(BandwidthMethod m) { return m == BandwidthMethod::cv || m == BandwidthMethod::cr_cv; }

}  // namespace

AseTable run_ase_table(const DgpConfig& config, std::span<const BandwidthMethod> methods, Estimator est,
                       const WeightWindow& window, std::size_t reps, std::size_t grid_n, const McOptions& opts) {
  config.validate();
  if (methods.empty()) throw_invalid("no bandwidth methods requested");
  for (auto m : methods)
    if (m == BandwidthMethod::aimse)
      throw_invalid("the AIMSE bandwidth needs known constants and cannot be simulated");
  if (window.dim() != 1) throw_invalid("ASE needs a one-dimensional window");

  struct Rep {
    std::vector<double> h, ase;
  };
  AseTable table;
  table.config = config;
  table.estimator = est;
  table.requested = reps;
  const auto results = replicate<Rep>(reps, opts, table.failures, [&](std::size_t k) {
    const ClusteredDataset ds = generate(config, k);
    std::optional<BandwidthReport> pilot;
    Rep rep;
    for (auto m : methods) {
      double h = 0.0;
      if (m == BandwidthMethod::cr_rot || is_cv(m)) {
        if (!pilot) pilot = rot(ds, opts.kernel, window, true);
      }
      if (m == BandwidthMethod::cr_rot) {
        h = pilot->h;
      } else if (m == BandwidthMethod::rot) {
        h = rot(ds, opts.kernel, window, false).h;
      } else if (m == BandwidthMethod::reference) {
        h = reference_h(ds);
      } else {
        const auto grid = default_cv_grid(pilot->h);
        const CvMode mode = m == BandwidthMethod::cr_cv ? CvMode::leave_one_cluster_out : CvMode::leave_one_out;
        h = cv_select(ds, opts.kernel, est, window, mode, grid, 1).h;
      }
      rep.h.push_back(h);
      rep.ase.push_back(average_squared_error(ds, opts.kernel, est, h, config.setup, window, grid_n));
    }
    return rep;
  });

  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    std::vector<double> hs, ases;
    for (const auto& r : results)
      if (r) {
        hs.push_back(r->h[mi]);
        ases.push_back(r->ase[mi]);
      }
    AseRecord rec;
    rec.method = methods[mi];
    rec.reps = hs.size();
    const MeanSe a = mean_se(ases), h = mean_se(hs);
    rec.mean_ase = a.mean;
    rec.se_ase = a.se;
    rec.mean_h = h.mean;
    rec.se_h = h.se;
    table.records.push_back(rec);
  }
  return table;
}

std::string_view to_string(BiasMode m) noexcept {
  switch (m) {
    case BiasMode::undersmooth: return "undersmooth";
    case BiasMode::infeasible_correct: return "infeasible-correct";
    case BiasMode::ignore: return "ignore";
  }
  return "unknown";
}

BiasMode parse_bias_mode(std::string_view name) {
  for (auto m : {BiasMode::undersmooth, BiasMode::infeasible_correct, BiasMode::ignore})
    if (name == to_string(m)) return m;
  throw_invalid("unknown bias mode '" + std::string(name) + "' (expected undersmooth, infeasible-correct or ignore)");
}

std::string_view to_string(CiVariant v) noexcept {
  switch (v) {
    case CiVariant::iid: return "iid";
    case CiVariant::cr: return "cr";
    case CiVariant::lambda: return "lambda";
  }
  return "unknown";
}

CoverageTable run_coverage_table(const DgpConfig& config, std::span<const double> x_eval, Estimator est,
                                 std::size_t reps, BiasMode bias_mode, const McOptions& opts, double alpha,
                                 CovMethod cov_method) {
  config.validate();
  if (x_eval.empty()) throw_invalid("no evaluation points for coverage");
  const WeightWindow window = default_window(config.setup);
  constexpr std::array<CiVariant, 3> variants{CiVariant::iid, CiVariant::cr, CiVariant::lambda};

  struct Rep {
    double h_m = 0.0;
    std::vector<char> covered;  // x-major, then variant
    std::vector<double> length;
  };
  CoverageTable table;
  table.config = config;
  table.estimator = est;
  table.bias_mode = bias_mode;
  table.alpha = alpha;
  table.requested = reps;

  std::vector<std::vector<double>> points;
  for (double x : x_eval) points.push_back({x});

  const auto results = replicate<Rep>(reps, opts, table.failures, [&](std::size_t k) {
    const ClusteredDataset ds = generate(config, k);
    const BandwidthReport pilot = rot(ds, opts.kernel, window, true);
    const double h_cv = cv_select(ds, opts.kernel, est, window, CvMode::leave_one_cluster_out,
                                  default_cv_grid(pilot.h), 1)
                            .h;
    BandConfig bc;
    bc.estimator = est;
    bc.h_m = bias_mode == BiasMode::undersmooth ? undersmooth(h_cv, ds.n()) : h_cv;
    bc.h_f = reference_h(ds);
    bc.h_sigma2 = bc.h_f;
    bc.alpha = alpha;
    bc.cov_method = cov_method;
    bc.threads = 1;
    const auto bands = make_bands(ds, opts.kernel, points, bc);
    Rep rep;
    rep.h_m = bc.h_m;
    for (std::size_t p = 0; p < bands.size(); ++p) {
      const double x = x_eval[p];
      const double truth = true_m(config.setup, x);
      const double shift =
          bias_mode == BiasMode::infeasible_correct ? bc.h_m * bc.h_m * true_bias(config.setup, est, x, opts.kernel) : 0.0;
      for (auto v : variants) {
        const Interval& ci = v == CiVariant::iid ? bands[p].ci_iid : v == CiVariant::cr ? bands[p].ci_cr : bands[p].ci_lambda;
        const Interval adj{ci.lo - shift, ci.hi - shift};
        rep.covered.push_back(adj.contains(truth) ? 1 : 0);
        rep.length.push_back(ci.length());
      }
    }
    return rep;
  });

  std::vector<double> hm;
  for (const auto& r : results)
    if (r) hm.push_back(r->h_m);
  table.mean_h_m = mean_se(hm).mean;
  for (std::size_t p = 0; p < x_eval.size(); ++p) {
    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
      const std::size_t slot = p * variants.size() + vi;
      std::vector<double> cov, len;
      for (const auto& r : results)
        if (r) {
          cov.push_back(r->covered[slot]);
          len.push_back(r->length[slot]);
        }
      CoverageRecord rec;
      rec.variant = variants[vi];
      rec.x_eval = x_eval[p];
      rec.reps = cov.size();
      rec.coverage = mean_se(cov).mean;
      rec.se_coverage = rec.reps ? std::sqrt(rec.coverage * (1.0 - rec.coverage) / static_cast<double>(rec.reps))
                                 : std::numeric_limits<double>::quiet_NaN();
      const MeanSe l = mean_se(len);
      rec.mean_length = l.mean;
      rec.se_length = l.se;
      table.records.push_back(rec);
    }
  }
  return table;
}

namespace {

std::vector<double> simpson_weights(std::size_t n, double step) {
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) w[k] = (k == 0 || k + 1 == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
  for (double& v : w) v *= step / 3.0;
  return w;
}

double weighted_error_variance(int setup, const WeightWindow& window) {
  const double lo = window.lo()[0], hi = window.hi()[0];
  if (setup == 1) return 0.25 * (std_normal_cdf(hi) - std_normal_cdf(lo));
  constexpr std::size_t n = 4001;
  const auto xs = linspace(lo, hi, n);
  const auto w = simpson_weights(n, (hi - lo) / static_cast<double>(n - 1));
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double s = true_error_sd(setup, xs[k]);
    sum += w[k] * s * s * std_normal_pdf(xs[k]);
  }
  return sum;
}

}  // namespace

CvDecomposition run_cv_decomposition(const DgpConfig& config, double h, Estimator est, const WeightWindow& window,
                                     std::size_t reps, const McOptions& opts, std::size_t simpson_n) {
  config.validate();
  if (window.dim() != 1) throw_invalid("the CV decomposition needs a one-dimensional window");
  if (!(h > 0.0)) throw_invalid("bandwidth must be positive");
  if (simpson_n < 3 || simpson_n % 2 == 0) throw_invalid("Simpson rule needs an odd number of nodes >= 3");

  const double lo = window.lo()[0], hi = window.hi()[0];
  const auto nodes = linspace(lo, hi, simpson_n);
  const auto weights = simpson_weights(simpson_n, (hi - lo) / static_cast<double>(simpson_n - 1));

  CvDecomposition out;
  out.config = config;
  out.h = h;
  out.requested = reps;
  out.sigma2_w = weighted_error_variance(config.setup, window);

  struct Rep {
    double cv = 0.0, imse = 0.0;
  };
  const auto results = replicate<Rep>(reps, opts, out.failures, [&](std::size_t k) {
    const ClusteredDataset ds = generate(config, k);
    Rep rep;
    rep.cv = cv_criterion(ds, opts.kernel, h, est, window, CvMode::leave_one_cluster_out);
    for (std::size_t g = 0; g < ds.G(); ++g) {
      double integral = 0.0;
      for (std::size_t q = 0; q < nodes.size(); ++q) {
        const double x = nodes[q];
        const double r =
            true_m(config.setup, x) -
            fit_excluding(ds, opts.kernel, est, h, std::span<const double>(&x, 1), Exclusion::cluster(g)).estimate;
        integral += weights[q] * r * r * std_normal_pdf(x);
      }
      rep.imse += static_cast<double>(ds.cluster_size(g)) / static_cast<double>(ds.n()) * integral;
    }
    return rep;
  });

  std::vector<double> cv, imse, gap;
  for (const auto& r : results)
    if (r) {
      cv.push_back(r->cv);
      imse.push_back(r->imse);
      gap.push_back(r->cv - out.sigma2_w - r->imse);
    }
  out.reps = cv.size();
  const MeanSe c = mean_se(cv), i = mean_se(imse), g = mean_se(gap);
  out.mean_cv = c.mean;
  out.se_cv = c.se;
  out.mean_imse = i.mean;
  out.se_imse = i.se;
  out.mean_gap = g.mean;
  out.se_gap = g.se;
  return out;
}

namespace {

void design_header(std::ostream& out) { out << "setup,G,n_g_base,n_g_last,rho_x,rho_e"; }

void design_row(std::ostream& out, const DgpConfig& c) {
  out << c.setup << ',' << c.G << ',' << c.n_g_base << ',' << c.n_g_last << ',' << format_double(c.rho_x) << ','
      << format_double(c.rho_e);
}

nlohmann::ordered_json design_json(const DgpConfig& c) {
  return {{"setup", c.setup}, {"G", c.G},         {"n_g_base", c.n_g_base}, {"n_g_last", c.n_g_last},
          {"rho_x", c.rho_x}, {"rho_e", c.rho_e}, {"seed", c.seed}};
}

nlohmann::ordered_json failures_json(const FailureLog& f) { return {{"count", f.count}, {"examples", f.examples}}; }

}  // namespace

void write_ase_csv(std::ostream& out, std::span<const AseTable> tables) {
  if (tables.empty()) throw Error(ErrorKind::validation, "no tables to write");
  design_header(out);
  out << ",estimator,reps,failures";
  for (const auto& r : tables.front().records) {
    const std::string m(to_string(r.method));
    out << ',' << m << "_ase," << m << "_ase_se," << m << "_h," << m << "_h_se";
  }
  out << '\n';
  for (const auto& t : tables) {
    if (t.records.size() != tables.front().records.size()) throw_invalid("tables have different method sets");
    design_row(out, t.config);
    out << ',' << to_string(t.estimator) << ',' << t.requested << ',' << t.failures.count;
    for (const auto& r : t.records)
      out << ',' << format_double(r.mean_ase) << ',' << format_double(r.se_ase) << ',' << format_double(r.mean_h)
          << ',' << format_double(r.se_h);
    out << '\n';
  }
}

void write_coverage_csv(std::ostream& out, std::span<const CoverageTable> tables) {
  if (tables.empty()) throw Error(ErrorKind::validation, "no tables to write");
  design_header(out);
  out << ",estimator,bias_mode,x_eval,reps,failures,mean_h_m";
  for (auto v : {CiVariant::iid, CiVariant::cr, CiVariant::lambda}) {
    const std::string s(to_string(v));
    out << ',' << s << "_coverage," << s << "_coverage_se," << s << "_length," << s << "_length_se";
  }
  out << '\n';
  for (const auto& t : tables) {
    for (std::size_t p = 0; p + 2 < t.records.size(); p += 3) {
      design_row(out, t.config);
      out << ',' << to_string(t.estimator) << ',' << to_string(t.bias_mode) << ','
          << format_double(t.records[p].x_eval) << ',' << t.requested << ',' << t.failures.count << ','
          << format_double(t.mean_h_m);
      for (std::size_t v = 0; v < 3; ++v) {
        const auto& r = t.records[p + v];
        out << ',' << format_double(r.coverage) << ',' << format_double(r.se_coverage) << ','
            << format_double(r.mean_length) << ',' << format_double(r.se_length);
      }
      out << '\n';
    }
  }
}

void write_cv_decomposition_csv(std::ostream& out, std::span<const CvDecomposition> rows) {
  if (rows.empty()) throw Error(ErrorKind::validation, "no rows to write");
  design_header(out);
  out << ",h,reps,failures,mean_cv,se_cv,sigma2_w,mean_imse,se_imse,mean_gap,se_gap\n";
  for (const auto& r : rows) {
    design_row(out, r.config);
    out << ',' << format_double(r.h) << ',' << r.requested << ',' << r.failures.count;
    for (double v : {r.mean_cv, r.se_cv, r.sigma2_w, r.mean_imse, r.se_imse, r.mean_gap, r.se_gap})
      out << ',' << format_double(v);
    out << '\n';
  }
}

std::string ase_to_json(std::span<const AseTable> tables) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& t : tables) {
    nlohmann::ordered_json j;
    j["design"] = design_json(t.config);
    j["estimator"] = std::string(to_string(t.estimator));
    j["reps"] = t.requested;
    j["failures"] = failures_json(t.failures);
    auto recs = nlohmann::ordered_json::array();
    for (const auto& r : t.records)
      recs.push_back({{"method", std::string(to_string(r.method))},
                      {"mean_ase", r.mean_ase},
                      {"se_ase", r.se_ase},
                      {"mean_h", r.mean_h},
                      {"se_h", r.se_h},
                      {"reps", r.reps}});
    j["records"] = std::move(recs);
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::string coverage_to_json(std::span<const CoverageTable> tables) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& t : tables) {
    nlohmann::ordered_json j;
    j["design"] = design_json(t.config);
    j["estimator"] = std::string(to_string(t.estimator));
    j["bias_mode"] = std::string(to_string(t.bias_mode));
    j["alpha"] = t.alpha;
    j["reps"] = t.requested;
    j["mean_h_m"] = t.mean_h_m;
    j["failures"] = failures_json(t.failures);
    auto recs = nlohmann::ordered_json::array();
    for (const auto& r : t.records)
      recs.push_back({{"variant", std::string(to_string(r.variant))},
                      {"x_eval", r.x_eval},
                      {"coverage", r.coverage},
                      {"se_coverage", r.se_coverage},
                      {"mean_length", r.mean_length},
                      {"se_length", r.se_length},
                      {"reps", r.reps}});
    j["records"] = std::move(recs);
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::string cv_decomposition_to_json(std::span<const CvDecomposition> rows) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["design"] = design_json(r.config);
    j["h"] = r.h;
    j["reps"] = r.requested;
    j["failures"] = failures_json(r.failures);
    j["mean_cv"] = r.mean_cv;
    j["se_cv"] = r.se_cv;
    j["sigma2_w"] = r.sigma2_w;
    j["mean_imse"] = r.mean_imse;
    j["se_imse"] = r.se_imse;
    j["mean_gap"] = r.mean_gap;
    j["se_gap"] = r.se_gap;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

}  // namespace ckr
