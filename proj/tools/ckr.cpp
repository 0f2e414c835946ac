// Command-line front end over the clusterkr C API.
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "clusterkr/clusterkr.h"
#include "json.hpp"

namespace {

struct Failure {
  int code;
  std::string message;
};

int exit_code(ckr_status st) {
  switch (st) {
    case CKR_OK: return 0;
    case CKR_ERR_INVALID_ARGUMENT: return 1;
    case CKR_ERR_SCHEMA:
    case CKR_ERR_PARSE:
    case CKR_ERR_VALIDATION:
    case CKR_ERR_IO: return 2;
    default: return 3;
  }
}

void check(ckr_status st) {
  if (st != CKR_OK) throw Failure{exit_code(st), ckr_last_error()};
}

[[noreturn]] void usage(const std::string& msg) { throw Failure{1, msg}; }

struct DatasetDeleter {
  void operator()(ckr_dataset* p) const { ckr_dataset_free(p); }
};
struct ReportDeleter {
  void operator()(ckr_bandwidth_report* p) const { ckr_bandwidth_report_free(p); }
};
struct BandSetDeleter {
  void operator()(ckr_band_set* p) const { ckr_band_set_free(p); }
};
struct SimTableDeleter {
  void operator()(ckr_sim_table* p) const { ckr_sim_table_free(p); }
};
using Dataset = std::unique_ptr<ckr_dataset, DatasetDeleter>;
using Report = std::unique_ptr<ckr_bandwidth_report, ReportDeleter>;
using BandSet = std::unique_ptr<ckr_band_set, BandSetDeleter>;
using SimTable = std::unique_ptr<ckr_sim_table, SimTableDeleter>;

std::string take_string(char* s) {
  std::string out(s ? s : "");
  ckr_string_free(s);
  return out;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& text, const std::string& what) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto res = std::from_chars(text.data(), end, v);
  if (text.empty() || res.ec != std::errc() || res.ptr != end || !std::isfinite(v))
    usage("invalid number '" + text + "' for " + what);
  return v;
}

std::vector<double> to_doubles(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) out.push_back(to_double(part, what));
  return out;
}

std::vector<std::string> names(const std::string& text) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  for (auto& part : split(text, ','))
    if (!part.empty()) out.push_back(part);
  return out;
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    std::cout.flush();
    if (!std::cout) throw Failure{2, "cannot write to standard output"};
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure{2, "cannot open '" + path + "' for writing"};
  out << content;
  out.close();
  if (!out) throw Failure{2, "write to '" + path + "' failed"};
}

ckr_kernel parse_kernel(const std::string& s) {
  ckr_kernel k;
  check(ckr_parse_kernel(s.c_str(), &k));
  return k;
}

ckr_estimator parse_estimator(const std::string& s) {
  ckr_estimator e;
  check(ckr_parse_estimator(s.c_str(), &e));
  return e;
}

struct DataOptions {
  std::string data;
  std::string cluster_col;
  std::string y_col;
  std::string x_cols;
  std::string cluster_level_cols;
  std::string kernel = "epanechnikov";
};

struct OutputOptions {
  std::string out;
  std::string format = "csv";
  unsigned threads = 0;
};

struct PointOptions {
  std::string grid;
  std::string at;
  bool at_data = false;
};

void add_data_options(CLI::App* app, DataOptions& o) {
  app->add_option("--data", o.data, "input CSV file")->required();
  app->add_option("--cluster-col", o.cluster_col, "cluster id column")->required();
  app->add_option("--y-col", o.y_col, "response column")->required();
  app->add_option("--x-cols", o.x_cols, "individual-level regressor columns, comma separated")->required();
  app->add_option("--cluster-level-cols", o.cluster_level_cols, "cluster-level regressor columns, comma separated");
  app->add_option("--kernel", o.kernel, "epanechnikov|quartic|gaussian-truncated");
}

void add_output_options(CLI::App* app, OutputOptions& o) {
  app->add_option("--out", o.out, "output path (default: standard output)");
  app->add_option("--format", o.format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
  app->add_option("--threads", o.threads, "worker cap (default: machine parallelism)");
}

void add_point_options(CLI::App* app, PointOptions& o) {
  app->add_option("--grid", o.grid, "evaluation grid lo:hi:n (one regressor only)");
  app->add_option("--at", o.at, "evaluation points; ';' separates points, ',' separates coordinates");
  app->add_flag("--at-data", o.at_data, "evaluate at every observation");
}

Dataset load(const DataOptions& o) {
  const auto xs = names(o.x_cols);
  const auto cs = names(o.cluster_level_cols);
  std::vector<const char*> xp, cp;
  for (const auto& s : xs) xp.push_back(s.c_str());
  for (const auto& s : cs) cp.push_back(s.c_str());
  ckr_dataset* ds = nullptr;
  check(ckr_dataset_load_csv(o.data.c_str(), o.cluster_col.c_str(), o.y_col.c_str(), xp.data(), xp.size(),
                             cp.data(), cp.size(), &ds));
  return Dataset(ds);
}

ckr_dataset_info info_of(const ckr_dataset* ds) {
  ckr_dataset_info info;
  check(ckr_dataset_get_info(ds, &info));
  return info;
}

// Row-major evaluation points of dimension d.
std::vector<double> eval_points(const PointOptions& o, const ckr_dataset* ds, size_t d) {
  const int chosen = (!o.grid.empty()) + (!o.at.empty()) + (o.at_data ? 1 : 0);
  if (chosen > 1) usage("use only one of --grid, --at and --at-data");
  std::vector<double> pts;
  if (!o.grid.empty()) {
    if (d != 1) usage("--grid requires a single regressor; use --at for several");
    const auto parts = split(o.grid, ':');
    if (parts.size() != 3) usage("--grid expects lo:hi:n");
    const double lo = to_double(parts[0], "--grid"), hi = to_double(parts[1], "--grid");
    const double nd = to_double(parts[2], "--grid");
    if (nd < 1 || nd != std::floor(nd)) usage("--grid count must be a positive integer");
    const auto n = static_cast<size_t>(nd);
    if (n > 1 && !(hi > lo)) usage("--grid requires lo < hi");
    for (size_t i = 0; i < n; ++i)
      pts.push_back(n == 1 ? lo : (i + 1 == n ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1)));
    return pts;
  }
  if (!o.at.empty()) {
    if (d == 1) {
      std::string flat = o.at;
      std::replace(flat.begin(), flat.end(), ';', ',');
      return to_doubles(flat, "--at");
    }
    for (const auto& p : split(o.at, ';')) {
      const auto v = to_doubles(p, "--at");
      if (v.size() != d) usage("--at point '" + p + "' has " + std::to_string(v.size()) + " coordinates, expected " +
                               std::to_string(d));
      pts.insert(pts.end(), v.begin(), v.end());
    }
    return pts;
  }
  const size_t n = info_of(ds).n;
  pts.resize(n * d);
  for (size_t i = 0; i < n; ++i) check(ckr_dataset_point(ds, i, pts.data() + i * d));
  return pts;
}

std::vector<std::string> x_header(size_t d) {
  if (d == 1) return {"x"};
  std::vector<std::string> h;
  for (size_t j = 0; j < d; ++j) h.push_back("x" + std::to_string(j + 1));
  return h;
}

struct Window {
  std::vector<double> lo, hi;
};

Window window_of(const std::string& lo, const std::string& hi, const ckr_dataset* ds, size_t d, bool required) {
  Window w;
  if (lo.empty() != hi.empty()) usage("--weight-lo and --weight-hi must be given together");
  if (lo.empty()) {
    if (required) usage("--weight-lo and --weight-hi are required");
    for (size_t j = 0; j < d; ++j) {
      double a, b;
      check(ckr_dataset_coord_range(ds, j, &a, &b));
      w.lo.push_back(a);
      w.hi.push_back(b);
    }
    return w;
  }
  w.lo = to_doubles(lo, "--weight-lo");
  w.hi = to_doubles(hi, "--weight-hi");
  if (w.lo.size() != d || w.hi.size() != d)
    usage("weight window needs " + std::to_string(d) + " coordinates per bound");
  return w;
}

// Cluster-robust CV bandwidth over a weight window.
double auto_bandwidth(const ckr_dataset* ds, ckr_kernel k, ckr_estimator est, const Window& w, unsigned threads) {
  ckr_bandwidth_options bo;
  ckr_bandwidth_options_init(&bo);
  bo.method = CKR_BW_CR_CV;
  bo.estimator = est;
  bo.window_lo = w.lo.data();
  bo.window_hi = w.hi.data();
  bo.window_dim = w.lo.size();
  bo.threads = threads;
  ckr_bandwidth_report* r = nullptr;
  check(ckr_bandwidth_select(ds, k, &bo, &r));
  Report rep(r);
  for (size_t i = 0; i < ckr_bandwidth_report_warning_count(r); ++i)
    std::cerr << "warning: " << ckr_bandwidth_report_warning(r, i) << '\n';
  return ckr_bandwidth_report_h(r);
}

double bandwidth_value(const std::string& text, const std::string& what) {
  const double h = to_double(text, what);
  if (!(h > 0.0)) usage(what + " must be positive");
  return h;
}

// Pointwise evaluation table with gaps for empty windows.
std::string point_table(const std::vector<double>& pts, size_t d, const std::vector<std::string>& cols,
                        const std::vector<std::vector<double>>& values, const std::vector<bool>& ok,
                        const std::string& format) {
  const size_t n = ok.size();
  const auto xh = x_header(d);
  std::ostringstream os;
  if (format == "json") {
    auto rows = nlohmann::ordered_json::array();
    for (size_t i = 0; i < n; ++i) {
      nlohmann::ordered_json row;
      for (size_t j = 0; j < d; ++j) row[xh[j]] = pts[i * d + j];
      for (size_t c = 0; c < cols.size(); ++c) row[cols[c]] = ok[i] ? nlohmann::ordered_json(values[i][c]) : nullptr;
      rows.push_back(std::move(row));
    }
    os << rows.dump(2) << '\n';
    return os.str();
  }
  for (size_t j = 0; j < d; ++j) os << (j ? "," : "") << xh[j];
  for (const auto& c : cols) os << ',' << c;
  os << '\n';
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < d; ++j) os << (j ? "," : "") << fmt(pts[i * d + j]);
    for (size_t c = 0; c < cols.size(); ++c) os << ',' << (ok[i] ? fmt(values[i][c]) : "");
    os << '\n';
  }
  return os.str();
}

std::string describe_point(const double* x, size_t d) {
  std::string s;
  for (size_t j = 0; j < d; ++j) s += (j ? "," : "") + fmt(x[j]);
  return s;
}

// Empty windows become gaps; every other failure aborts.
bool tolerate(ckr_status st, const double* x, size_t d) {
  if (st == CKR_OK) return true;
  if (st == CKR_ERR_EMPTY_WINDOW) {
    std::cerr << "warning: no data near x=" << describe_point(x, d) << ": " << ckr_last_error() << '\n';
    return false;
  }
  check(st);
  return false;
}

int run_density(const DataOptions& data, const OutputOptions& out, const PointOptions& po, const std::string& h_text) {
  Dataset ds = load(data);
  const auto k = parse_kernel(data.kernel);
  const auto info = info_of(ds.get());
  const size_t d = info.d_ind + info.d_cls;
  double h;
  if (h_text == "auto") {
    check(ckr_reference_h(ds.get(), &h));
    std::cerr << "bandwidth h=" << fmt(h) << '\n';
  } else {
    h = bandwidth_value(h_text, "--h");
  }
  const auto pts = eval_points(po, ds.get(), d);
  const size_t n = pts.size() / d;
  std::vector<std::vector<double>> values(n, std::vector<double>(1));
  std::vector<bool> ok(n);
  for (size_t i = 0; i < n; ++i) ok[i] = tolerate(ckr_density(ds.get(), k, h, pts.data() + i * d, &values[i][0]), pts.data() + i * d, d);
  emit(out.out, point_table(pts, d, {"fhat"}, values, ok, out.format));
  return 0;
}

int run_fit(const DataOptions& data, const OutputOptions& out, const PointOptions& po, const std::string& h_text,
            const std::string& estimator, const std::string& wlo, const std::string& whi) {
  Dataset ds = load(data);
  const auto k = parse_kernel(data.kernel);
  const auto est = parse_estimator(estimator);
  const auto info = info_of(ds.get());
  const size_t d = info.d_ind + info.d_cls;
  double h;
  if (h_text == "auto") {
    h = auto_bandwidth(ds.get(), k, est, window_of(wlo, whi, ds.get(), d, false), out.threads);
    std::cerr << "bandwidth h=" << fmt(h) << '\n';
  } else {
    h = bandwidth_value(h_text, "--h");
  }
  const auto pts = eval_points(po, ds.get(), d);
  const size_t n = pts.size() / d;
  std::vector<std::vector<double>> values(n, std::vector<double>(2));
  std::vector<bool> ok(n);
  for (size_t i = 0; i < n; ++i) {
    ckr_fit_result r;
    ok[i] = tolerate(ckr_fit(ds.get(), k, est, h, pts.data() + i * d, &r), pts.data() + i * d, d);
    if (ok[i]) values[i] = {r.estimate, static_cast<double>(r.n_effective)};
  }
  emit(out.out, point_table(pts, d, {"mhat", "n_effective"}, values, ok, out.format));
  return 0;
}

int run_bandwidth(const DataOptions& data, const OutputOptions& out, const std::string& method,
                  const std::string& estimator, size_t grid_n, const std::string& span, const std::string& wlo,
                  const std::string& whi) {
  Dataset ds = load(data);
  const auto k = parse_kernel(data.kernel);
  ckr_bandwidth_options bo;
  ckr_bandwidth_options_init(&bo);
  check(ckr_parse_bandwidth_method(method.c_str(), &bo.method));
  if (bo.method == CKR_BW_AIMSE) usage("aimse needs explicit constants and is not a data-driven method");
  bo.estimator = parse_estimator(estimator);
  const auto info = info_of(ds.get());
  const size_t d = info.d_ind + info.d_cls;
  Window w;
  if (bo.method != CKR_BW_REFERENCE) {
    w = window_of(wlo, whi, ds.get(), d, true);
    bo.window_lo = w.lo.data();
    bo.window_hi = w.hi.data();
    bo.window_dim = d;
  }
  bo.grid_n = grid_n;
  const auto sp = to_doubles(span, "--grid-span");
  if (sp.size() != 2 || !(sp[0] > 0.0) || !(sp[1] > sp[0])) usage("--grid-span expects lo,hi with 0 < lo < hi");
  bo.span_lo = sp[0];
  bo.span_hi = sp[1];
  bo.threads = out.threads;
  ckr_bandwidth_report* r = nullptr;
  check(ckr_bandwidth_select(ds.get(), k, &bo, &r));
  Report rep(r);
  for (size_t i = 0; i < ckr_bandwidth_report_warning_count(r); ++i)
    std::cerr << "warning: " << ckr_bandwidth_report_warning(r, i) << '\n';
  char* text = nullptr;
  check(ckr_bandwidth_report_format(r, out.format == "json" ? CKR_FORMAT_JSON : CKR_FORMAT_CSV, &text));
  emit(out.out, take_string(text));
  std::cerr << "selected method=" << method << " h=" << fmt(ckr_bandwidth_report_h(r)) << '\n';
  return 0;
}

struct InferOptions {
  std::string estimator = "ll";
  std::string h_m = "auto";
  std::string h_f = "auto";
  std::string h_sigma2;
  std::string b;
  bool undersmooth = false;
  double alpha = 0.05;
  std::string cov_method = "parametric";
  std::string weight_lo, weight_hi;
  std::string plot_out, svg;
};

int run_infer(const DataOptions& data, const OutputOptions& out, const PointOptions& po, const InferOptions& io) {
  Dataset ds = load(data);
  const auto k = parse_kernel(data.kernel);
  const auto info = info_of(ds.get());
  const size_t d = info.d_ind + info.d_cls;
  ckr_band_config cfg;
  ckr_band_config_init(&cfg);
  cfg.estimator = parse_estimator(io.estimator);
  check(ckr_parse_cov_method(io.cov_method.c_str(), &cfg.cov_method));
  if (!(io.alpha > 0.0 && io.alpha < 1.0)) usage("--alpha must lie in (0, 1)");
  cfg.alpha = io.alpha;
  cfg.threads = out.threads;
  if (io.h_f == "auto") {
    check(ckr_reference_h(ds.get(), &cfg.h_f));
  } else {
    cfg.h_f = bandwidth_value(io.h_f, "--h-f");
  }
  cfg.h_sigma2 = io.h_sigma2.empty() ? cfg.h_f : bandwidth_value(io.h_sigma2, "--h-sigma2");
  if (!io.b.empty()) cfg.b = bandwidth_value(io.b, "--b");
  if (io.h_m == "auto") {
    cfg.h_m = auto_bandwidth(ds.get(), k, cfg.estimator, window_of(io.weight_lo, io.weight_hi, ds.get(), d, false),
                             out.threads);
  } else {
    cfg.h_m = bandwidth_value(io.h_m, "--h-m");
  }
  if (io.undersmooth) check(ckr_undersmooth(cfg.h_m, info.n, &cfg.h_m));
  std::cerr << "bandwidths h_m=" << fmt(cfg.h_m) << " h_f=" << fmt(cfg.h_f) << " h_sigma2=" << fmt(cfg.h_sigma2)
            << '\n';

  auto pts = eval_points(po, ds.get(), d);
  ckr_band_set* raw = nullptr;
  ckr_status st = ckr_infer(ds.get(), k, &cfg, pts.data(), pts.size() / d, &raw);
  if (st == CKR_ERR_EMPTY_WINDOW) {
    // Drop points without data and rerun on the rest.
    std::vector<double> kept;
    for (size_t i = 0; i < pts.size() / d; ++i) {
      ckr_band_set* one = nullptr;
      const ckr_status s1 = ckr_infer(ds.get(), k, &cfg, pts.data() + i * d, 1, &one);
      BandSet guard(one);
      if (tolerate(s1, pts.data() + i * d, d)) kept.insert(kept.end(), pts.data() + i * d, pts.data() + (i + 1) * d);
    }
    pts = std::move(kept);
    if (pts.empty()) throw Failure{2, "no evaluation point has data in its window"};
    st = ckr_infer(ds.get(), k, &cfg, pts.data(), pts.size() / d, &raw);
  }
  check(st);
  BandSet bands(raw);
  char* text = nullptr;
  check(ckr_band_set_format(raw, out.format == "json" ? CKR_FORMAT_JSON : CKR_FORMAT_CSV, &text));
  const std::string main_text = take_string(text);
  std::string plot_text, svg_text;
  if (!io.plot_out.empty()) {
    check(ckr_band_set_format(raw, CKR_FORMAT_PLOT_CSV, &text));
    plot_text = take_string(text);
  }
  if (!io.svg.empty()) {
    check(ckr_band_set_format(raw, CKR_FORMAT_SVG, &text));
    svg_text = take_string(text);
  }
  emit(out.out, main_text);
  if (!io.plot_out.empty()) emit(io.plot_out, plot_text);
  if (!io.svg.empty()) emit(io.svg, svg_text);
  return 0;
}

struct SimulateOptions {
  std::string experiment = "ase";
  int setup = 1;
  size_t reps = 100;
  size_t G = 100;
  size_t ng = 20;
  size_t ng_last = 0;
  std::string rho_x = "0.2";
  std::string rho_e = "0.2";
  std::string x_eval;
  std::string bias_mode = "undersmooth";
  uint64_t seed = 1;
  std::string methods = "rot,cr-rot,cv,cr-cv";
  std::string estimator = "ll";
  std::string kernel = "epanechnikov";
  std::string h;
  std::string weight_lo, weight_hi;
  size_t grid_n = 50;
  double alpha = 0.05;
  std::string cov_method = "parametric";
  bool strict = false;
};

int run_simulate(const OutputOptions& out, const SimulateOptions& so) {
  ckr_sim_options opts;
  ckr_sim_options_init(&opts);
  if (so.experiment == "ase") {
    opts.experiment = CKR_EXPERIMENT_ASE;
  } else if (so.experiment == "coverage") {
    opts.experiment = CKR_EXPERIMENT_COVERAGE;
  } else if (so.experiment == "cv-decomposition") {
    opts.experiment = CKR_EXPERIMENT_CV_DECOMPOSITION;
  } else {
    usage("unknown experiment '" + so.experiment + "'");
  }
  opts.estimator = parse_estimator(so.estimator);
  opts.kernel = parse_kernel(so.kernel);
  if (so.reps == 0) usage("--reps must be positive");
  opts.reps = so.reps;
  std::vector<ckr_bandwidth_method> methods;
  for (const auto& m : names(so.methods)) {
    ckr_bandwidth_method bm;
    check(ckr_parse_bandwidth_method(m.c_str(), &bm));
    methods.push_back(bm);
  }
  if (methods.empty()) usage("--methods must name at least one method");
  opts.methods = methods.data();
  opts.n_methods = methods.size();
  opts.grid_n = so.grid_n;
  std::vector<double> xs;
  if (!so.x_eval.empty()) xs = to_doubles(so.x_eval, "--x-eval");
  opts.x_eval = xs.empty() ? nullptr : xs.data();
  opts.n_x_eval = xs.size();
  check(ckr_parse_bias_mode(so.bias_mode.c_str(), &opts.bias_mode));
  opts.alpha = so.alpha;
  check(ckr_parse_cov_method(so.cov_method.c_str(), &opts.cov_method));
  if (opts.experiment == CKR_EXPERIMENT_CV_DECOMPOSITION) {
    if (so.h.empty()) usage("cv-decomposition requires --h");
    opts.h = bandwidth_value(so.h, "--h");
  } else if (!so.h.empty()) {
    usage("--h applies to the cv-decomposition experiment only");
  }
  if (so.weight_lo.empty() != so.weight_hi.empty()) usage("--weight-lo and --weight-hi must be given together");
  if (!so.weight_lo.empty()) {
    opts.use_window = 1;
    opts.window_lo = to_double(so.weight_lo, "--weight-lo");
    opts.window_hi = to_double(so.weight_hi, "--weight-hi");
  }
  opts.threads = out.threads;
  opts.strict = so.strict ? 1 : 0;

  std::vector<ckr_dgp> cells;
  for (double rx : to_doubles(so.rho_x, "--rho-x")) {
    for (double re : to_doubles(so.rho_e, "--rho-e")) {
      ckr_dgp c;
      ckr_dgp_init(&c);
      c.setup = so.setup;
      c.G = so.G;
      c.n_g_base = so.ng;
      c.n_g_last = so.ng_last ? so.ng_last : so.ng;
      c.rho_x = rx;
      c.rho_e = re;
      c.seed = so.seed;
      cells.push_back(c);
    }
  }
  ckr_sim_table* raw = nullptr;
  check(ckr_simulate(cells.data(), cells.size(), &opts, &raw));
  SimTable table(raw);
  if (const size_t f = ckr_sim_table_failures(raw))
    std::cerr << "warning: " << f << " replication(s) failed and were excluded\n";
  char* text = nullptr;
  check(ckr_sim_table_format(raw, out.format == "json" ? CKR_FORMAT_JSON : CKR_FORMAT_CSV, &text));
  emit(out.out, take_string(text));
  return 0;
}

// Option names taken from a --config file are injected after the subcommand
// unless already present on the command line.
std::vector<std::string> with_config(const std::vector<std::string>& args) {
  std::string path;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw Failure{2, "cannot open config file '" + path + "'"};
  auto present = [&](const std::string& key) {
    for (const auto& a : args)
      if (a == "--" + key || a.rfind("--" + key + "=", 0) == 0) return true;
    return false;
  };
  std::vector<std::string> injected;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Failure{2, "config line " + std::to_string(line_no) + ": expected key=value"};
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    if (key.empty() || key == "config")
      throw Failure{2, "config line " + std::to_string(line_no) + ": invalid key"};
    if (present(key)) continue;
    if (value == "true")
      injected.push_back("--" + key);
    else if (value != "false")
      injected.push_back("--" + key + "=" + value);
  }
  std::vector<std::string> out;
  size_t insert_at = args.empty() ? 0 : 1;
  for (size_t i = 1; i < args.size(); ++i) {
    if (args[i].rfind("-", 0) != 0) {
      insert_at = i + 1;
      break;
    }
  }
  out.insert(out.end(), args.begin(), args.begin() + static_cast<std::ptrdiff_t>(insert_at));
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(insert_at), args.end());
  return out;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  args = with_config(args);

  CLI::App app{"Kernel regression and inference under cluster sampling", "ckr"};
  app.set_help_flag("--help", "print this help message and exit");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ckr_version()));
  std::string config_path;

  DataOptions data;
  OutputOptions out;
  PointOptions points;
  std::string h_text, estimator = "ll", weight_lo, weight_hi;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value file supplying any option");
    add_output_options(sub, out);
  };

  auto* density = app.add_subcommand("density", "kernel density estimate");
  add_data_options(density, data);
  common(density);
  add_point_options(density, points);
  density->add_option("--h", h_text, "bandwidth, or auto for the normal reference")->required();

  auto* fit = app.add_subcommand("fit", "Nadaraya-Watson or local linear regression");
  add_data_options(fit, data);
  common(fit);
  add_point_options(fit, points);
  fit->add_option("--h", h_text, "bandwidth, or auto for cluster-robust cross-validation")->required();
  fit->add_option("--estimator", estimator, "nw|ll");
  fit->add_option("--weight-lo", weight_lo, "CV weight window lower bounds (default: data range)");
  fit->add_option("--weight-hi", weight_hi, "CV weight window upper bounds (default: data range)");

  std::string method = "cr-cv", span = "0.333,3.0";
  size_t grid_n = 50;
  auto* bandwidth = app.add_subcommand("bandwidth", "bandwidth selection");
  add_data_options(bandwidth, data);
  common(bandwidth);
  bandwidth->add_option("--method", method, "rot|cr-rot|cv|cr-cv|reference");
  bandwidth->add_option("--estimator", estimator, "nw|ll");
  bandwidth->add_option("--grid-n", grid_n, "number of CV grid points");
  bandwidth->add_option("--grid-span", span, "CV grid span around the pilot, lo,hi");
  bandwidth->add_option("--weight-lo", weight_lo, "weight window lower bounds");
  bandwidth->add_option("--weight-hi", weight_hi, "weight window upper bounds");

  InferOptions io;
  auto* infer = app.add_subcommand("infer", "pointwise confidence intervals");
  add_data_options(infer, data);
  common(infer);
  add_point_options(infer, points);
  infer->add_option("--estimator", io.estimator, "nw|ll");
  infer->add_option("--h-m", io.h_m, "regression bandwidth, or auto for cluster-robust CV");
  infer->add_option("--h-f", io.h_f, "density bandwidth, or auto for the normal reference");
  infer->add_option("--h-sigma2", io.h_sigma2, "conditional variance bandwidth (default: h-f)");
  infer->add_option("--b", io.b, "pair density bandwidth (default: h-f)");
  infer->add_flag("--undersmooth", io.undersmooth, "shrink h-m by n^(1/5 - 2/7)");
  infer->add_option("--alpha", io.alpha, "one minus the confidence level");
  infer->add_option("--cov-method", io.cov_method, "parametric|nonparametric");
  infer->add_option("--weight-lo", io.weight_lo, "CV weight window lower bounds (default: data range)");
  infer->add_option("--weight-hi", io.weight_hi, "CV weight window upper bounds (default: data range)");
  infer->add_option("--plot-out", io.plot_out, "plot-ready CSV path");
  infer->add_option("--svg", io.svg, "SVG chart path");

  SimulateOptions so;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo experiments");
  common(simulate);
  simulate->add_option("--experiment", so.experiment, "ase|coverage|cv-decomposition");
  simulate->add_option("--setup", so.setup, "design 1 or 2")->check(CLI::IsMember({1, 2}));
  simulate->add_option("--reps", so.reps, "replications per cell");
  simulate->add_option("--G", so.G, "number of clusters");
  simulate->add_option("--ng", so.ng, "cluster size");
  simulate->add_option("--ng-last", so.ng_last, "size of the last cluster (default: --ng)");
  simulate->add_option("--rho-x", so.rho_x, "regressor intra-cluster correlations, comma separated");
  simulate->add_option("--rho-e", so.rho_e, "error intra-cluster correlations, comma separated");
  simulate->add_option("--x-eval", so.x_eval, "coverage evaluation points, comma separated");
  simulate->add_option("--bias-mode", so.bias_mode, "undersmooth|infeasible-correct|ignore");
  simulate->add_option("--seed", so.seed, "random seed");
  simulate->add_option("--methods", so.methods, "bandwidth methods for the ase experiment");
  simulate->add_option("--estimator", so.estimator, "nw|ll");
  simulate->add_option("--kernel", so.kernel, "epanechnikov|quartic|gaussian-truncated");
  simulate->add_option("--h", so.h, "fixed bandwidth for cv-decomposition");
  simulate->add_option("--weight-lo", so.weight_lo, "weight window lower bound (default: setup window)");
  simulate->add_option("--weight-hi", so.weight_hi, "weight window upper bound (default: setup window)");
  simulate->add_option("--grid-n", so.grid_n, "ASE evaluation grid size");
  simulate->add_option("--alpha", so.alpha, "one minus the confidence level");
  simulate->add_option("--cov-method", so.cov_method, "parametric|nonparametric");
  simulate->add_flag("--strict", so.strict, "abort on the first failed replication");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(std::move(rev));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    std::cerr << (subs.empty() ? app.help() : subs.front()->help());
    return 1;
  }

  ckr_set_threads(out.threads);
  if (*density) return run_density(data, out, points, h_text);
  if (*fit) return run_fit(data, out, points, h_text, estimator, weight_lo, weight_hi);
  if (*bandwidth) return run_bandwidth(data, out, method, estimator, grid_n, span, weight_lo, weight_hi);
  if (*infer) return run_infer(data, out, points, io);
  return run_simulate(out, so);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
