#include "clusterkr/clusterkr.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <map>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "clusterkr/bandwidth.hpp"
#include "clusterkr/density.hpp"
#include "clusterkr/error.hpp"
#include "clusterkr/format.hpp"
#include "clusterkr/inference.hpp"
#include "clusterkr/montecarlo.hpp"
#include "clusterkr/parallel.hpp"
#include "clusterkr/regress.hpp"
#include "clusterkr/variance.hpp"
#include "json.hpp"

struct ckr_dataset {
  ckr::ClusteredDataset ds;
};

struct ckr_bandwidth_report {
  ckr::BandwidthReport report;
};

struct ckr_band_set {
  std::vector<ckr::InferenceBand> bands;
};

struct ckr_sim_table {
  ckr_experiment experiment = CKR_EXPERIMENT_ASE;
  std::vector<ckr::AseTable> ase;
  std::vector<ckr::CoverageTable> coverage;
  std::vector<ckr::CvDecomposition> cvd;
};

namespace {

thread_local std::string g_last_error;

ckr_status to_status(ckr::ErrorKind kind) {
  using ckr::ErrorKind;
  switch (kind) {
    case ErrorKind::invalid_argument: return CKR_ERR_INVALID_ARGUMENT;
    case ErrorKind::schema: return CKR_ERR_SCHEMA;
    case ErrorKind::parse: return CKR_ERR_PARSE;
    case ErrorKind::validation: return CKR_ERR_VALIDATION;
    case ErrorKind::io: return CKR_ERR_IO;
    case ErrorKind::empty_window: return CKR_ERR_EMPTY_WINDOW;
    case ErrorKind::singular: return CKR_ERR_SINGULAR;
    case ErrorKind::numeric: return CKR_ERR_NUMERIC;
  }
  return CKR_ERR_INTERNAL;
}

template <class Fn>
ckr_status guard(Fn&& fn) noexcept {
  try {
    fn();
    g_last_error.clear();
    return CKR_OK;
  } catch (const ckr::Error& e) {
    g_last_error = e.what();
    return to_status(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return CKR_ERR_INTERNAL;
}

void require(const void* p, const char* what) {
  if (!p) ckr::throw_invalid(std::string(what) + " must not be null");
}

ckr::Kernel kernel_of(ckr_kernel k) {
  switch (k) {
    case CKR_KERNEL_EPANECHNIKOV: return ckr::Kernel(ckr::KernelType::epanechnikov);
    case CKR_KERNEL_QUARTIC: return ckr::Kernel(ckr::KernelType::quartic);
    case CKR_KERNEL_GAUSSIAN_TRUNCATED: return ckr::Kernel(ckr::KernelType::gaussian_truncated);
  }
  ckr::throw_invalid("unknown kernel code " + std::to_string(static_cast<int>(k)));
}

ckr::Estimator estimator_of(ckr_estimator e) {
  if (e == CKR_ESTIMATOR_NW) return ckr::Estimator::nw;
  if (e == CKR_ESTIMATOR_LL) return ckr::Estimator::ll;
  ckr::throw_invalid("unknown estimator code " + std::to_string(static_cast<int>(e)));
}

ckr::BandwidthMethod method_of(ckr_bandwidth_method m) {
  switch (m) {
    case CKR_BW_ROT: return ckr::BandwidthMethod::rot;
    case CKR_BW_CR_ROT: return ckr::BandwidthMethod::cr_rot;
    case CKR_BW_CV: return ckr::BandwidthMethod::cv;
    case CKR_BW_CR_CV: return ckr::BandwidthMethod::cr_cv;
    case CKR_BW_AIMSE: return ckr::BandwidthMethod::aimse;
    case CKR_BW_REFERENCE: return ckr::BandwidthMethod::reference;
  }
  ckr::throw_invalid("unknown bandwidth method code " + std::to_string(static_cast<int>(m)));
}

ckr::CovMethod cov_of(ckr_cov_method m) {
  if (m == CKR_COV_PARAMETRIC) return ckr::CovMethod::parametric_compromise;
  if (m == CKR_COV_NONPARAMETRIC) return ckr::CovMethod::nonparametric;
  ckr::throw_invalid("unknown covariance method code " + std::to_string(static_cast<int>(m)));
}

ckr::BiasMode bias_of(ckr_bias_mode m) {
  switch (m) {
    case CKR_BIAS_UNDERSMOOTH: return ckr::BiasMode::undersmooth;
    case CKR_BIAS_INFEASIBLE_CORRECT: return ckr::BiasMode::infeasible_correct;
    case CKR_BIAS_IGNORE: return ckr::BiasMode::ignore;
  }
  ckr::throw_invalid("unknown bias mode code " + std::to_string(static_cast<int>(m)));
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

std::span<const double> point(const ckr_dataset* ds, const double* x) {
  require(x, "evaluation point");
  return {x, ds->ds.d()};
}

ckr::WeightWindow window_of(const double* lo, const double* hi, size_t dim) {
  require(lo, "window_lo");
  require(hi, "window_hi");
  return ckr::WeightWindow(std::vector<double>(lo, lo + dim), std::vector<double>(hi, hi + dim));
}

ckr::DgpConfig dgp_of(const ckr_dgp& d) {
  ckr::DgpConfig c;
  c.setup = d.setup;
  c.G = d.G;
  c.n_g_base = d.n_g_base;
  c.n_g_last = d.n_g_last;
  c.rho_x = d.rho_x;
  c.rho_e = d.rho_e;
  c.seed = d.seed;
  c.validate();
  return c;
}

void fill(const ckr::FitResult& r, ckr_fit_result* out) {
  out->estimate = r.estimate;
  out->denom = r.denom;
  out->n_effective = r.n_effective;
  out->nw_fallback = r.nw_fallback ? 1 : 0;
}

}  // namespace

extern "C" {

const char* ckr_last_error(void) { return g_last_error.c_str(); }

const char* ckr_status_name(ckr_status status) {
  switch (status) {
    case CKR_OK: return "ok";
    case CKR_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case CKR_ERR_SCHEMA: return "schema";
    case CKR_ERR_PARSE: return "parse";
    case CKR_ERR_VALIDATION: return "validation";
    case CKR_ERR_IO: return "io";
    case CKR_ERR_EMPTY_WINDOW: return "empty-window";
    case CKR_ERR_SINGULAR: return "singular";
    case CKR_ERR_NUMERIC: return "numeric";
    case CKR_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* ckr_version(void) { return "0.1.0"; }

void ckr_string_free(char* s) { std::free(s); }

void ckr_set_threads(unsigned threads) { ckr::set_default_threads(threads); }

ckr_status ckr_parse_kernel(const char* name, ckr_kernel* out) {
  return guard([&] {
    require(name, "name");
    require(out, "out");
    switch (ckr::parse_kernel_type(name)) {
      case ckr::KernelType::epanechnikov: *out = CKR_KERNEL_EPANECHNIKOV; break;
      case ckr::KernelType::quartic: *out = CKR_KERNEL_QUARTIC; break;
      case ckr::KernelType::gaussian_truncated: *out = CKR_KERNEL_GAUSSIAN_TRUNCATED; break;
    }
  });
}

ckr_status ckr_parse_estimator(const char* name, ckr_estimator* out) {
  return guard([&] {
    require(name, "name");
    require(out, "out");
    *out = ckr::parse_estimator(name) == ckr::Estimator::nw ? CKR_ESTIMATOR_NW : CKR_ESTIMATOR_LL;
  });
}

ckr_status ckr_parse_bandwidth_method(const char* name, ckr_bandwidth_method* out) {
  return guard([&] {
    require(name, "name");
    require(out, "out");
    *out = static_cast<ckr_bandwidth_method>(static_cast<int>(ckr::parse_bandwidth_method(name)));
  });
}

ckr_status ckr_parse_cov_method(const char* name, ckr_cov_method* out) {
  return guard([&] {
    require(name, "name");
    require(out, "out");
    *out = ckr::parse_cov_method(name) == ckr::CovMethod::nonparametric ? CKR_COV_NONPARAMETRIC : CKR_COV_PARAMETRIC;
  });
}

ckr_status ckr_parse_bias_mode(const char* name, ckr_bias_mode* out) {
  return guard([&] {
    require(name, "name");
    require(out, "out");
    *out = static_cast<ckr_bias_mode>(static_cast<int>(ckr::parse_bias_mode(name)));
  });
}

ckr_status ckr_kernel_constants(ckr_kernel kernel, double* kappa2, double* r_k, double* support_radius) {
  return guard([&] {
    const ckr::Kernel k = kernel_of(kernel);
    if (kappa2) *kappa2 = k.kappa2();
    if (r_k) *r_k = k.roughness();
    if (support_radius) *support_radius = k.support_radius();
  });
}

ckr_status ckr_kernel_eval(ckr_kernel kernel, const double* u, size_t d, double* out) {
  return guard([&] {
    require(out, "out");
    if (d > 0) require(u, "u");
    *out = kernel_of(kernel).product(std::span<const double>(u, d));
  });
}

ckr_status ckr_dataset_load_csv(const char* path, const char* cluster_col, const char* y_col,
                                const char* const* x_cols, size_t n_x, const char* const* cls_cols, size_t n_cls,
                                ckr_dataset** out) {
  return guard([&] {
    require(path, "path");
    require(cluster_col, "cluster_col");
    require(y_col, "y_col");
    require(out, "out");
    ckr::ColumnSchema schema;
    schema.cluster_col = cluster_col;
    schema.y_col = y_col;
    for (size_t i = 0; i < n_x; ++i) schema.x_cols.emplace_back(x_cols[i]);
    for (size_t i = 0; i < n_cls; ++i) schema.cluster_level_cols.emplace_back(cls_cols[i]);
    *out = new ckr_dataset{ckr::load_csv(path, schema)};
  });
}

ckr_status ckr_dataset_from_arrays(const char* const* cluster_ids, const double* y, const double* x, size_t n,
                                   size_t d_ind, size_t d_cls, ckr_dataset** out) {
  return guard([&] {
    require(out, "out");
    if (n > 0) {
      require(cluster_ids, "cluster_ids");
      require(y, "y");
      require(x, "x");
    }
    const size_t d = d_ind + d_cls;
    std::vector<ckr::Cluster> clusters;
    std::map<std::string, size_t> index;
    for (size_t i = 0; i < n; ++i) {
      require(cluster_ids[i], "cluster id");
      const std::string id = cluster_ids[i];
      auto [it, inserted] = index.try_emplace(id, clusters.size());
      if (inserted) clusters.push_back({id, {}, {}});
      auto& c = clusters[it->second];
      c.y.push_back(y[i]);
      c.x.emplace_back(x + i * d, x + (i + 1) * d);
    }
    *out = new ckr_dataset{ckr::ClusteredDataset(std::move(clusters), d_ind, d_cls)};
  });
}

void ckr_dataset_free(ckr_dataset* ds) { delete ds; }

ckr_status ckr_dataset_get_info(const ckr_dataset* ds, ckr_dataset_info* out) {
  return guard([&] {
    require(ds, "dataset");
    require(out, "out");
    const auto s = ckr::size_summary(ds->ds);
    out->n = s.n;
    out->G = s.G;
    out->d_ind = ds->ds.d_ind();
    out->d_cls = ds->ds.d_cls();
    out->max_ng = s.max_ng;
    out->mean_sq_size = s.mean_sq_size();
  });
}

ckr_status ckr_dataset_coord_range(const ckr_dataset* ds, size_t coord, double* lo, double* hi) {
  return guard([&] {
    require(ds, "dataset");
    require(lo, "lo");
    require(hi, "hi");
    if (coord >= ds->ds.d()) ckr::throw_invalid("coordinate index out of range");
    if (ds->ds.empty()) throw ckr::Error(ckr::ErrorKind::validation, "dataset has no observations");
    double a = ds->ds.x(0)[coord], b = a;
    for (size_t i = 1; i < ds->ds.n(); ++i) {
      a = std::min(a, ds->ds.x(i)[coord]);
      b = std::max(b, ds->ds.x(i)[coord]);
    }
    *lo = a;
    *hi = b;
  });
}

ckr_status ckr_dataset_point(const ckr_dataset* ds, size_t i, double* out) {
  return guard([&] {
    require(ds, "dataset");
    require(out, "out");
    if (i >= ds->ds.n()) ckr::throw_invalid("observation index out of range");
    const auto x = ds->ds.x(i);
    std::copy(x.begin(), x.end(), out);
  });
}

ckr_status ckr_density(const ckr_dataset* ds, ckr_kernel kernel, double h, const double* x, double* out) {
  return guard([&] {
    require(ds, "dataset");
    require(out, "out");
    *out = ckr::density(ds->ds, kernel_of(kernel), h, point(ds, x)).value;
  });
}

ckr_status ckr_joint_density_pairs(const ckr_dataset* ds, ckr_kernel kernel, double b, const double* x_ind,
                                   const double* x_cls, double* out) {
  return guard([&] {
    require(ds, "dataset");
    require(out, "out");
    require(x_ind, "x_ind");
    if (ds->ds.d_cls() > 0) require(x_cls, "x_cls");
    *out = ckr::joint_density_pairs(ds->ds, kernel_of(kernel), b, {x_ind, ds->ds.d_ind()}, {x_cls, ds->ds.d_cls()})
               .value;
  });
}

ckr_status ckr_fit(const ckr_dataset* ds, ckr_kernel kernel, ckr_estimator est, double h, const double* x,
                   ckr_fit_result* out) {
  return guard([&] {
    require(ds, "dataset");
    require(out, "out");
    fill(ckr::fit(ds->ds, kernel_of(kernel), estimator_of(est), h, point(ds, x)), out);
  });
}

ckr_status ckr_fit_loco(const ckr_dataset* ds, ckr_kernel kernel, ckr_estimator est, double h, const double* x,
                        size_t cluster, ckr_fit_result* out) {
  return guard([&] {
    require(ds, "dataset");
    require(out, "out");
    fill(ckr::fit_loco(ds->ds, kernel_of(kernel), h, point(ds, x), cluster, estimator_of(est)), out);
  });
}

void ckr_bandwidth_options_init(ckr_bandwidth_options* opts) {
  if (!opts) return;
  *opts = ckr_bandwidth_options{};
  opts->method = CKR_BW_CR_CV;
  opts->estimator = CKR_ESTIMATOR_LL;
}

ckr_status ckr_bandwidth_select(const ckr_dataset* ds, ckr_kernel kernel, const ckr_bandwidth_options* opts,
                                ckr_bandwidth_report** out) {
  return guard([&] {
    require(ds, "dataset");
    require(opts, "options");
    require(out, "out");
    const ckr::Kernel k = kernel_of(kernel);
    const auto method = method_of(opts->method);
    const auto est = estimator_of(opts->estimator);
    const bool needs_window = method != ckr::BandwidthMethod::reference && method != ckr::BandwidthMethod::aimse;
    auto report = std::make_unique<ckr_bandwidth_report>();
    if (!needs_window) {
      ckr::SelectionOptions so;
      so.method = method;
      report->report = ckr::select_bandwidth(ds->ds, k, ckr::WeightWindow::interval(0.0, 1.0), so);
    } else {
      const auto window = window_of(opts->window_lo, opts->window_hi, opts->window_dim);
      const bool is_cv = method == ckr::BandwidthMethod::cv || method == ckr::BandwidthMethod::cr_cv;
      if (is_cv && opts->grid_len > 0) {
        require(opts->grid, "grid");
        const auto mode =
            method == ckr::BandwidthMethod::cr_cv ? ckr::CvMode::leave_one_cluster_out : ckr::CvMode::leave_one_out;
        report->report = ckr::cv_select(ds->ds, k, est, window, mode, {opts->grid, opts->grid_len}, opts->threads);
      } else {
        ckr::SelectionOptions so;
        so.method = method;
        so.estimator = est;
        if (opts->grid_n > 0) so.grid_n = opts->grid_n;
        if (opts->span_lo > 0.0) so.span_lo = opts->span_lo;
        if (opts->span_hi > 0.0) so.span_hi = opts->span_hi;
        so.threads = opts->threads;
        report->report = ckr::select_bandwidth(ds->ds, k, window, so);
      }
    }
    *out = report.release();
  });
}

void ckr_bandwidth_report_free(ckr_bandwidth_report* report) { delete report; }

double ckr_bandwidth_report_h(const ckr_bandwidth_report* report) { return report ? report->report.h : NAN; }

size_t ckr_bandwidth_report_trace_size(const ckr_bandwidth_report* report) {
  return report ? report->report.trace.size() : 0;
}

ckr_status ckr_bandwidth_report_trace_point(const ckr_bandwidth_report* report, size_t i, double* h,
                                            double* criterion, int* ok) {
  return guard([&] {
    require(report, "report");
    if (i >= report->report.trace.size()) ckr::throw_invalid("trace index out of range");
    const auto& tp = report->report.trace[i];
    if (h) *h = tp.h;
    if (criterion) *criterion = tp.criterion;
    if (ok) *ok = tp.ok ? 1 : 0;
  });
}

size_t ckr_bandwidth_report_warning_count(const ckr_bandwidth_report* report) {
  return report ? report->report.warnings.size() : 0;
}

const char* ckr_bandwidth_report_warning(const ckr_bandwidth_report* report, size_t i) {
  if (!report || i >= report->report.warnings.size()) return nullptr;
  return report->report.warnings[i].c_str();
}

ckr_status ckr_bandwidth_report_format(const ckr_bandwidth_report* report, ckr_format format, char** out) {
  return guard([&] {
    require(report, "report");
    require(out, "out");
    const auto& r = report->report;
    std::ostringstream os;
    if (format == CKR_FORMAT_JSON) {
      nlohmann::ordered_json j;
      j["method"] = std::string(ckr::to_string(r.method));
      j["h"] = r.h;
      if (r.components) j["components"] = {{"bias", r.components->bias}, {"sigma2", r.components->sigma2}};
      auto trace = nlohmann::ordered_json::array();
      for (const auto& tp : r.trace) {
        nlohmann::ordered_json t{{"h", tp.h}, {"criterion", tp.criterion}, {"ok", tp.ok}};
        if (!tp.ok) t["error"] = tp.error;
        trace.push_back(std::move(t));
      }
      j["trace"] = std::move(trace);
      j["warnings"] = r.warnings;
      os << j.dump(2) << '\n';
    } else if (format == CKR_FORMAT_CSV) {
      if (!r.trace.empty()) {
        os << "h,criterion,ok,error\n";
        for (const auto& tp : r.trace)
          os << ckr::format_double(tp.h) << ',' << ckr::format_double(tp.criterion) << ',' << (tp.ok ? 1 : 0) << ','
             << ckr::csv_escape(tp.error) << '\n';
      } else {
        os << "method,h,bias,sigma2\n"
           << ckr::to_string(r.method) << ',' << ckr::format_double(r.h) << ','
           << (r.components ? ckr::format_double(r.components->bias) : "") << ','
           << (r.components ? ckr::format_double(r.components->sigma2) : "") << '\n';
      }
    } else {
      ckr::throw_invalid("bandwidth reports support csv and json output only");
    }
    *out = dup_string(os.str());
  });
}

ckr_status ckr_cv_criterion(const ckr_dataset* ds, ckr_kernel kernel, ckr_estimator est, double h,
                            const double* window_lo, const double* window_hi, size_t window_dim,
                            int leave_one_cluster_out, double* out) {
  return guard([&] {
    require(ds, "dataset");
    require(out, "out");
    *out = ckr::cv_criterion(ds->ds, kernel_of(kernel), h, estimator_of(est),
                             window_of(window_lo, window_hi, window_dim),
                             leave_one_cluster_out ? ckr::CvMode::leave_one_cluster_out : ckr::CvMode::leave_one_out);
  });
}

ckr_status ckr_aimse_h0(double bias_bar, double sigma2_bar, double r_k, size_t d, size_t n, double* out) {
  return guard([&] {
    require(out, "out");
    *out = ckr::aimse_h0(bias_bar, sigma2_bar, r_k, d, n);
  });
}

ckr_status ckr_undersmooth(double h, size_t n, double* out) {
  return guard([&] {
    require(out, "out");
    *out = ckr::undersmooth(h, n);
  });
}

ckr_status ckr_reference_h(const ckr_dataset* ds, double* out) {
  return guard([&] {
    require(ds, "dataset");
    require(out, "out");
    *out = ckr::reference_h(ds->ds);
  });
}

ckr_status ckr_lambda_hat(const ckr_dataset* ds, double h, double* out) {
  return guard([&] {
    require(ds, "dataset");
    require(out, "out");
    *out = ckr::lambda_hat(ckr::size_summary(ds->ds), h, ds->ds.d_ind()).value;
  });
}

void ckr_band_config_init(ckr_band_config* cfg) {
  if (!cfg) return;
  *cfg = ckr_band_config{};
  cfg->estimator = CKR_ESTIMATOR_LL;
  cfg->alpha = 0.05;
  cfg->cov_method = CKR_COV_PARAMETRIC;
}

ckr_status ckr_infer(const ckr_dataset* ds, ckr_kernel kernel, const ckr_band_config* cfg, const double* points,
                     size_t n_points, ckr_band_set** out) {
  return guard([&] {
    require(ds, "dataset");
    require(cfg, "config");
    require(out, "out");
    if (n_points == 0) throw ckr::Error(ckr::ErrorKind::validation, "no evaluation points");
    require(points, "points");
    ckr::BandConfig bc;
    bc.estimator = estimator_of(cfg->estimator);
    bc.h_m = cfg->h_m;
    bc.h_f = cfg->h_f;
    bc.h_sigma2 = cfg->h_sigma2;
    if (cfg->b > 0.0) bc.b = cfg->b;
    bc.alpha = cfg->alpha > 0.0 ? cfg->alpha : 0.05;
    bc.cov_method = cov_of(cfg->cov_method);
    bc.threads = cfg->threads;
    const size_t d = ds->ds.d();
    std::vector<std::vector<double>> pts;
    for (size_t i = 0; i < n_points; ++i) pts.emplace_back(points + i * d, points + (i + 1) * d);
    auto set = std::make_unique<ckr_band_set>();
    set->bands = ckr::make_bands(ds->ds, kernel_of(kernel), pts, bc);
    *out = set.release();
  });
}

void ckr_band_set_free(ckr_band_set* set) { delete set; }

size_t ckr_band_set_size(const ckr_band_set* set) { return set ? set->bands.size() : 0; }

ckr_status ckr_band_set_get(const ckr_band_set* set, size_t i, ckr_band* out) {
  return guard([&] {
    require(set, "band set");
    require(out, "out");
    if (i >= set->bands.size()) ckr::throw_invalid("band index out of range");
    const auto& b = set->bands[i];
    *out = ckr_band{b.estimate,       b.fhat,           b.sigma2_hat,     b.sigma2_tilde,  b.lambda,
                    b.cov_term.value, b.se_iid,         b.se_cr,          b.se_lambda,     b.ci_iid.lo,
                    b.ci_iid.hi,      b.ci_cr.lo,       b.ci_cr.hi,       b.ci_lambda.lo,  b.ci_lambda.hi,
                    b.warnings.size()};
  });
}

ckr_status ckr_band_set_format(const ckr_band_set* set, ckr_format format, char** out) {
  return guard([&] {
    require(set, "band set");
    require(out, "out");
    std::ostringstream os;
    switch (format) {
      case CKR_FORMAT_CSV: ckr::write_bands_csv(os, set->bands); break;
      case CKR_FORMAT_JSON: os << ckr::bands_to_json(set->bands); break;
      case CKR_FORMAT_PLOT_CSV: ckr::write_plot_csv(os, set->bands); break;
      case CKR_FORMAT_SVG: ckr::write_plot_svg(os, set->bands); break;
      default: ckr::throw_invalid("unknown output format");
    }
    *out = dup_string(os.str());
  });
}

void ckr_dgp_init(ckr_dgp* dgp) {
  if (!dgp) return;
  const ckr::DgpConfig c;
  *dgp = ckr_dgp{c.setup, c.G, c.n_g_base, c.n_g_last, c.rho_x, c.rho_e, c.seed};
}

void ckr_sim_options_init(ckr_sim_options* opts) {
  if (!opts) return;
  *opts = ckr_sim_options{};
  opts->experiment = CKR_EXPERIMENT_ASE;
  opts->estimator = CKR_ESTIMATOR_LL;
  opts->kernel = CKR_KERNEL_EPANECHNIKOV;
  opts->reps = 100;
  opts->bias_mode = CKR_BIAS_UNDERSMOOTH;
  opts->alpha = 0.05;
  opts->cov_method = CKR_COV_PARAMETRIC;
}

ckr_status ckr_simulate_dataset(const ckr_dgp* dgp, uint64_t replication, ckr_dataset** out) {
  return guard([&] {
    require(dgp, "dgp");
    require(out, "out");
    *out = new ckr_dataset{ckr::generate(dgp_of(*dgp), replication)};
  });
}

ckr_status ckr_simulate(const ckr_dgp* cells, size_t n_cells, const ckr_sim_options* opts, ckr_sim_table** out) {
  return guard([&] {
    require(opts, "options");
    require(out, "out");
    if (n_cells == 0) ckr::throw_invalid("no design cells");
    require(cells, "cells");
    ckr::McOptions mc;
    mc.threads = opts->threads;
    mc.strict = opts->strict != 0;
    mc.kernel = kernel_of(opts->kernel);
    const auto est = estimator_of(opts->estimator);
    auto table = std::make_unique<ckr_sim_table>();
    table->experiment = opts->experiment;
    for (size_t c = 0; c < n_cells; ++c) {
      const ckr::DgpConfig cfg = dgp_of(cells[c]);
      const ckr::WeightWindow window = opts->use_window ? ckr::WeightWindow::interval(opts->window_lo, opts->window_hi)
                                                        : ckr::default_window(cfg.setup);
      switch (opts->experiment) {
        case CKR_EXPERIMENT_ASE: {
          std::vector<ckr::BandwidthMethod> methods;
          if (opts->methods && opts->n_methods > 0) {
            for (size_t i = 0; i < opts->n_methods; ++i) methods.push_back(method_of(opts->methods[i]));
          } else {
            methods = {ckr::BandwidthMethod::rot, ckr::BandwidthMethod::cr_rot, ckr::BandwidthMethod::cv,
                       ckr::BandwidthMethod::cr_cv};
          }
          table->ase.push_back(ckr::run_ase_table(cfg, methods, est, window, opts->reps,
                                                  opts->grid_n ? opts->grid_n : 50, mc));
          break;
        }
        case CKR_EXPERIMENT_COVERAGE: {
          std::vector<double> xs;
          if (opts->x_eval && opts->n_x_eval > 0)
            xs.assign(opts->x_eval, opts->x_eval + opts->n_x_eval);
          else if (cfg.setup == 1)
            xs = {0.75};
          else
            xs = {0.8, 0.4};
          table->coverage.push_back(ckr::run_coverage_table(cfg, xs, est, opts->reps, bias_of(opts->bias_mode), mc,
                                                            opts->alpha > 0.0 ? opts->alpha : 0.05,
                                                            cov_of(opts->cov_method)));
          break;
        }
        case CKR_EXPERIMENT_CV_DECOMPOSITION:
          table->cvd.push_back(ckr::run_cv_decomposition(cfg, opts->h, est, window, opts->reps, mc));
          break;
        default: ckr::throw_invalid("unknown experiment");
      }
    }
    *out = table.release();
  });
}

void ckr_sim_table_free(ckr_sim_table* table) { delete table; }

size_t ckr_sim_table_failures(const ckr_sim_table* table) {
  if (!table) return 0;
  size_t total = 0;
  for (const auto& t : table->ase) total += t.failures.count;
  for (const auto& t : table->coverage) total += t.failures.count;
  for (const auto& t : table->cvd) total += t.failures.count;
  return total;
}

ckr_status ckr_sim_table_format(const ckr_sim_table* table, ckr_format format, char** out) {
  return guard([&] {
    require(table, "table");
    require(out, "out");
    std::ostringstream os;
    const bool json = format == CKR_FORMAT_JSON;
    if (!json && format != CKR_FORMAT_CSV) ckr::throw_invalid("simulation tables support csv and json output only");
    switch (table->experiment) {
      case CKR_EXPERIMENT_ASE:
        if (json) os << ckr::ase_to_json(table->ase); else ckr::write_ase_csv(os, table->ase);
        break;
      case CKR_EXPERIMENT_COVERAGE:
        if (json) os << ckr::coverage_to_json(table->coverage); else ckr::write_coverage_csv(os, table->coverage);
        break;
      case CKR_EXPERIMENT_CV_DECOMPOSITION:
        if (json) os << ckr::cv_decomposition_to_json(table->cvd); else ckr::write_cv_decomposition_csv(os, table->cvd);
        break;
    }
    *out = dup_string(os.str());
  });
}

ckr_status ckr_true_m(int setup, double x, double* m, double* m_prime, double* m_second) {
  return guard([&] {
    if (m) *m = ckr::true_m(setup, x);
    if (m_prime) *m_prime = ckr::true_m_prime(setup, x);
    if (m_second) *m_second = ckr::true_m_second(setup, x);
  });
}

ckr_status ckr_true_bias(int setup, ckr_estimator est, ckr_kernel kernel, double x, double* out) {
  return guard([&] {
    require(out, "out");
    *out = ckr::true_bias(setup, estimator_of(est), x, kernel_of(kernel));
  });
}

}  // extern "C"
