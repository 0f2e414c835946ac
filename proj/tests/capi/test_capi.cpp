#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "clusterkr/clusterkr.h"
#include "doctest.h"

namespace {

std::string take(char* s) {
  std::string out(s);
  ckr_string_free(s);
  return out;
}

// Four clusters of three on a line y = 1 + 2x.
ckr_dataset* line_dataset() {
  std::vector<std::string> ids;
  std::vector<double> y, x;
  for (int i = 0; i < 12; ++i) {
    ids.push_back("g" + std::to_string(i / 3));
    x.push_back(i / 11.0);
    y.push_back(1.0 + 2.0 * x.back());
  }
  std::vector<const char*> ptrs;
  for (const auto& s : ids) ptrs.push_back(s.c_str());
  ckr_dataset* ds = nullptr;
  REQUIRE(ckr_dataset_from_arrays(ptrs.data(), y.data(), x.data(), 12, 1, 0, &ds) == CKR_OK);
  return ds;
}

}  // namespace

TEST_CASE("names and versions") {
  CHECK(std::string(ckr_status_name(CKR_ERR_EMPTY_WINDOW)) == "empty-window");
  CHECK(std::string(ckr_version()).size() > 0);
  ckr_kernel k;
  CHECK(ckr_parse_kernel("quartic", &k) == CKR_OK);
  CHECK(k == CKR_KERNEL_QUARTIC);
  CHECK(ckr_parse_kernel("box", &k) == CKR_ERR_INVALID_ARGUMENT);
  CHECK(std::string(ckr_last_error()).find("box") != std::string::npos);
  ckr_bandwidth_method m;
  CHECK(ckr_parse_bandwidth_method("cr-cv", &m) == CKR_OK);
  CHECK(m == CKR_BW_CR_CV);
  ckr_bias_mode b;
  CHECK(ckr_parse_bias_mode("infeasible-correct", &b) == CKR_OK);
  CHECK(b == CKR_BIAS_INFEASIBLE_CORRECT);
}

TEST_CASE("kernel constants and evaluation") {
  double k2, rk, L;
  REQUIRE(ckr_kernel_constants(CKR_KERNEL_EPANECHNIKOV, &k2, &rk, &L) == CKR_OK);
  CHECK(k2 == doctest::Approx(0.2));
  CHECK(rk == doctest::Approx(0.6));
  CHECK(L == 1.0);
  const double u[2] = {0.25, 0.0};
  double v;
  REQUIRE(ckr_kernel_eval(CKR_KERNEL_EPANECHNIKOV, u, 2, &v) == CKR_OK);
  CHECK(v == doctest::Approx(0.52734375));
  CHECK(ckr_kernel_eval(CKR_KERNEL_EPANECHNIKOV, u, 0, &v) == CKR_ERR_INVALID_ARGUMENT);
}

TEST_CASE("dataset handles and fits") {
  ckr_dataset* ds = line_dataset();
  ckr_dataset_info info;
  REQUIRE(ckr_dataset_get_info(ds, &info) == CKR_OK);
  CHECK(info.n == 12);
  CHECK(info.G == 4);
  CHECK(info.mean_sq_size == 3.0);
  double pt;
  REQUIRE(ckr_dataset_point(ds, 11, &pt) == CKR_OK);
  CHECK(pt == 1.0);
  const double x = 0.4;
  ckr_fit_result r;
  REQUIRE(ckr_fit(ds, CKR_KERNEL_EPANECHNIKOV, CKR_ESTIMATOR_LL, 0.3, &x, &r) == CKR_OK);
  CHECK(r.estimate == doctest::Approx(1.8).epsilon(1e-12));
  REQUIRE(ckr_fit_loco(ds, CKR_KERNEL_EPANECHNIKOV, CKR_ESTIMATOR_LL, 0.5, &x, 1, &r) == CKR_OK);
  CHECK(r.estimate == doctest::Approx(1.8).epsilon(1e-12));
  const double far = 9.0;
  CHECK(ckr_fit(ds, CKR_KERNEL_EPANECHNIKOV, CKR_ESTIMATOR_NW, 0.3, &far, &r) == CKR_ERR_EMPTY_WINDOW);
  CHECK(ckr_fit(ds, CKR_KERNEL_EPANECHNIKOV, CKR_ESTIMATOR_NW, -1.0, &x, &r) == CKR_ERR_INVALID_ARGUMENT);
  CHECK(ckr_fit(nullptr, CKR_KERNEL_EPANECHNIKOV, CKR_ESTIMATOR_NW, 0.3, &x, &r) == CKR_ERR_INVALID_ARGUMENT);
  double f;
  REQUIRE(ckr_density(ds, CKR_KERNEL_EPANECHNIKOV, 0.5, &x, &f) == CKR_OK);
  CHECK(f > 0.0);
  double lam;
  REQUIRE(ckr_lambda_hat(ds, 0.1, &lam) == CKR_OK);
  CHECK(lam == doctest::Approx(0.3));
  ckr_dataset_free(ds);
}

TEST_CASE("csv loading reports categories") {
  const char* path = "capi_test_input.csv";
  {
    std::ofstream out(path);
    out << "cid,y,x,z\na,1,0.1,5\na,2,0.2,6\n";
  }
  const char* xs[] = {"x"};
  const char* zs[] = {"z"};
  ckr_dataset* ds = nullptr;
  CHECK(ckr_dataset_load_csv(path, "cid", "y", xs, 1, zs, 1, &ds) == CKR_ERR_VALIDATION);
  CHECK(ckr_dataset_load_csv(path, "cid", "w", xs, 1, nullptr, 0, &ds) == CKR_ERR_SCHEMA);
  CHECK(ckr_dataset_load_csv("missing-file.csv", "cid", "y", xs, 1, nullptr, 0, &ds) == CKR_ERR_IO);
  REQUIRE(ckr_dataset_load_csv(path, "cid", "y", xs, 1, nullptr, 0, &ds) == CKR_OK);
  ckr_dataset_free(ds);
  std::remove(path);
}

TEST_CASE("bandwidth selection through handles") {
  ckr_dgp dgp;
  ckr_dgp_init(&dgp);
  dgp.G = 30;
  dgp.n_g_base = 5;
  dgp.n_g_last = 5;
  ckr_dataset* ds = nullptr;
  REQUIRE(ckr_simulate_dataset(&dgp, 0, &ds) == CKR_OK);
  ckr_bandwidth_options bo;
  ckr_bandwidth_options_init(&bo);
  const double lo = -1.5, hi = 1.5;
  bo.window_lo = &lo;
  bo.window_hi = &hi;
  bo.window_dim = 1;
  bo.grid_n = 7;
  ckr_bandwidth_report* rep = nullptr;
  REQUIRE(ckr_bandwidth_select(ds, CKR_KERNEL_EPANECHNIKOV, &bo, &rep) == CKR_OK);
  CHECK(ckr_bandwidth_report_trace_size(rep) == 7);
  const double h = ckr_bandwidth_report_h(rep);
  double th, crit;
  int ok;
  REQUIRE(ckr_bandwidth_report_trace_point(rep, 0, &th, &crit, &ok) == CKR_OK);
  CHECK(th <= h);
  const std::string csv = take([&] {
    char* s = nullptr;
    REQUIRE(ckr_bandwidth_report_format(rep, CKR_FORMAT_CSV, &s) == CKR_OK);
    return s;
  }());
  CHECK(csv.rfind("h,criterion,ok,error\n", 0) == 0);
  double cv;
  REQUIRE(ckr_cv_criterion(ds, CKR_KERNEL_EPANECHNIKOV, CKR_ESTIMATOR_LL, h, &lo, &hi, 1, 1, &cv) == CKR_OK);
  CHECK(cv > 0.0);
  ckr_bandwidth_report_free(rep);

  bo.method = CKR_BW_CR_ROT;
  REQUIRE(ckr_bandwidth_select(ds, CKR_KERNEL_EPANECHNIKOV, &bo, &rep) == CKR_OK);
  char* s = nullptr;
  REQUIRE(ckr_bandwidth_report_format(rep, CKR_FORMAT_CSV, &s) == CKR_OK);
  CHECK(take(s).rfind("method,h,bias,sigma2\ncr-rot,", 0) == 0);
  ckr_bandwidth_report_free(rep);
  ckr_dataset_free(ds);
}

TEST_CASE("inference through handles") {
  ckr_dgp dgp;
  ckr_dgp_init(&dgp);
  dgp.G = 40;
  dgp.n_g_base = 5;
  dgp.n_g_last = 5;
  ckr_dataset* ds = nullptr;
  REQUIRE(ckr_simulate_dataset(&dgp, 1, &ds) == CKR_OK);
  ckr_band_config cfg;
  ckr_band_config_init(&cfg);
  cfg.h_m = 0.4;
  cfg.h_f = 0.4;
  cfg.h_sigma2 = 0.4;
  const double pts[3] = {-0.5, 0.0, 0.5};
  ckr_band_set* set = nullptr;
  REQUIRE(ckr_infer(ds, CKR_KERNEL_EPANECHNIKOV, &cfg, pts, 3, &set) == CKR_OK);
  CHECK(ckr_band_set_size(set) == 3);
  ckr_band b;
  REQUIRE(ckr_band_set_get(set, 1, &b) == CKR_OK);
  CHECK(b.ci_lambda_lo < b.estimate);
  CHECK(b.ci_lambda_hi > b.estimate);
  CHECK(ckr_band_set_get(set, 3, &b) == CKR_ERR_INVALID_ARGUMENT);
  char* s = nullptr;
  REQUIRE(ckr_band_set_format(set, CKR_FORMAT_PLOT_CSV, &s) == CKR_OK);
  CHECK(take(s).rfind("x,mhat,iid_lo", 0) == 0);
  REQUIRE(ckr_band_set_format(set, CKR_FORMAT_JSON, &s) == CKR_OK);
  CHECK(take(s).find("\"se_lambda\"") != std::string::npos);
  ckr_band_set_free(set);
  CHECK(ckr_infer(ds, CKR_KERNEL_EPANECHNIKOV, &cfg, pts, 0, &set) == CKR_ERR_VALIDATION);
  ckr_dataset_free(ds);
}

TEST_CASE("simulation tables through handles") {
  ckr_dgp cells[2];
  ckr_dgp_init(&cells[0]);
  cells[0].G = 20;
  cells[0].n_g_base = 5;
  cells[0].n_g_last = 5;
  cells[1] = cells[0];
  cells[1].rho_x = 0.5;
  ckr_sim_options opts;
  ckr_sim_options_init(&opts);
  opts.reps = 3;
  const ckr_bandwidth_method methods[] = {CKR_BW_CR_ROT};
  opts.methods = methods;
  opts.n_methods = 1;
  ckr_sim_table* t1 = nullptr;
  ckr_sim_table* t2 = nullptr;
  opts.threads = 1;
  REQUIRE(ckr_simulate(cells, 2, &opts, &t1) == CKR_OK);
  opts.threads = 3;
  REQUIRE(ckr_simulate(cells, 2, &opts, &t2) == CKR_OK);
  char *a = nullptr, *b = nullptr;
  REQUIRE(ckr_sim_table_format(t1, CKR_FORMAT_CSV, &a) == CKR_OK);
  REQUIRE(ckr_sim_table_format(t2, CKR_FORMAT_CSV, &b) == CKR_OK);
  const std::string sa = take(a), sb = take(b);
  CHECK(sa == sb);
  CHECK(std::count(sa.begin(), sa.end(), '\n') == 3);
  CHECK(ckr_sim_table_failures(t1) == 0);
  CHECK(ckr_sim_table_format(t1, CKR_FORMAT_SVG, &a) == CKR_ERR_INVALID_ARGUMENT);
  ckr_sim_table_free(t1);
  ckr_sim_table_free(t2);
  cells[0].rho_e = 2.0;
  CHECK(ckr_simulate(cells, 1, &opts, &t1) == CKR_ERR_INVALID_ARGUMENT);
}

TEST_CASE("closed-form helpers") {
  double v;
  REQUIRE(ckr_undersmooth(0.1301, 3784, &v) == CKR_OK);
  CHECK(std::abs(v - 0.0642) < 5e-5);
  REQUIRE(ckr_aimse_h0(1.0, 1.0, 0.6, 1, 100, &v) == CKR_OK);
  CHECK(v == doctest::Approx(0.2724069).epsilon(1e-6));
  double m, m1, m2;
  REQUIRE(ckr_true_m(1, 0.0, &m, &m1, &m2) == CKR_OK);
  CHECK(m == 2.0);
  double b1, b2;
  REQUIRE(ckr_true_bias(1, CKR_ESTIMATOR_LL, CKR_KERNEL_EPANECHNIKOV, 0.0, &b1) == CKR_OK);
  REQUIRE(ckr_true_bias(1, CKR_ESTIMATOR_NW, CKR_KERNEL_EPANECHNIKOV, 0.0, &b2) == CKR_OK);
  CHECK(b1 == b2);
}
