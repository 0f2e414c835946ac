/* C interface to the clusterkr library. All functions return a ckr_status;
 * on failure ckr_last_error() describes the problem for the calling thread.
 * Strings handed out through char** parameters are owned by the caller and
 * released with ckr_string_free. */
#ifndef CLUSTERKR_H
#define CLUSTERKR_H

#include <stddef.h>
#include <stdint.h>

#if defined(CKR_BUILDING_LIBRARY)
#define CKR_API __attribute__((visibility("default")))
#else
#define CKR_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  CKR_OK = 0,
  CKR_ERR_INVALID_ARGUMENT = 1,
  CKR_ERR_SCHEMA = 2,
  CKR_ERR_PARSE = 3,
  CKR_ERR_VALIDATION = 4,
  CKR_ERR_IO = 5,
  CKR_ERR_EMPTY_WINDOW = 6,
  CKR_ERR_SINGULAR = 7,
  CKR_ERR_NUMERIC = 8,
  CKR_ERR_INTERNAL = 9
} ckr_status;

typedef enum { CKR_KERNEL_EPANECHNIKOV = 0, CKR_KERNEL_QUARTIC = 1, CKR_KERNEL_GAUSSIAN_TRUNCATED = 2 } ckr_kernel;
typedef enum { CKR_ESTIMATOR_NW = 0, CKR_ESTIMATOR_LL = 1 } ckr_estimator;
typedef enum {
  CKR_BW_ROT = 0,
  CKR_BW_CR_ROT = 1,
  CKR_BW_CV = 2,
  CKR_BW_CR_CV = 3,
  CKR_BW_AIMSE = 4,
  CKR_BW_REFERENCE = 5
} ckr_bandwidth_method;
typedef enum { CKR_COV_PARAMETRIC = 0, CKR_COV_NONPARAMETRIC = 1 } ckr_cov_method;
typedef enum { CKR_BIAS_UNDERSMOOTH = 0, CKR_BIAS_INFEASIBLE_CORRECT = 1, CKR_BIAS_IGNORE = 2 } ckr_bias_mode;
typedef enum { CKR_EXPERIMENT_ASE = 0, CKR_EXPERIMENT_COVERAGE = 1, CKR_EXPERIMENT_CV_DECOMPOSITION = 2 } ckr_experiment;
typedef enum { CKR_FORMAT_CSV = 0, CKR_FORMAT_JSON = 1, CKR_FORMAT_PLOT_CSV = 2, CKR_FORMAT_SVG = 3 } ckr_format;

CKR_API const char* ckr_last_error(void);
CKR_API const char* ckr_status_name(ckr_status status);
CKR_API const char* ckr_version(void);
CKR_API void ckr_string_free(char* s);

/* Worker cap for parallel sections; 0 restores machine parallelism. */
CKR_API void ckr_set_threads(unsigned threads);

/* Name parsing for the lowercase names used on the command line. */
CKR_API ckr_status ckr_parse_kernel(const char* name, ckr_kernel* out);
CKR_API ckr_status ckr_parse_estimator(const char* name, ckr_estimator* out);
CKR_API ckr_status ckr_parse_bandwidth_method(const char* name, ckr_bandwidth_method* out);
CKR_API ckr_status ckr_parse_cov_method(const char* name, ckr_cov_method* out);
CKR_API ckr_status ckr_parse_bias_mode(const char* name, ckr_bias_mode* out);

CKR_API ckr_status ckr_kernel_constants(ckr_kernel kernel, double* kappa2, double* r_k, double* support_radius);
CKR_API ckr_status ckr_kernel_eval(ckr_kernel kernel, const double* u, size_t d, double* out);

/* ---- datasets ---- */

typedef struct ckr_dataset ckr_dataset;

/* Individual-level columns x_cols[0..n_x) and cluster-level columns cls_cols[0..n_cls). */
CKR_API ckr_status ckr_dataset_load_csv(const char* path, const char* cluster_col, const char* y_col,
                                        const char* const* x_cols, size_t n_x, const char* const* cls_cols,
                                        size_t n_cls, ckr_dataset** out);
/* Row-major x of shape n x (d_ind + d_cls). Rows are grouped by cluster id in
 * order of first appearance. */
CKR_API ckr_status ckr_dataset_from_arrays(const char* const* cluster_ids, const double* y, const double* x, size_t n,
                                           size_t d_ind, size_t d_cls, ckr_dataset** out);
CKR_API void ckr_dataset_free(ckr_dataset* ds);

typedef struct {
  size_t n;
  size_t G;
  size_t d_ind;
  size_t d_cls;
  size_t max_ng;
  double mean_sq_size; /* (1/n) sum n_g^2 */
} ckr_dataset_info;

CKR_API ckr_status ckr_dataset_get_info(const ckr_dataset* ds, ckr_dataset_info* out);
CKR_API ckr_status ckr_dataset_coord_range(const ckr_dataset* ds, size_t coord, double* lo, double* hi);
/* Copies the d_ind + d_cls coordinates of observation i (cluster-major order) into out. */
CKR_API ckr_status ckr_dataset_point(const ckr_dataset* ds, size_t i, double* out);

/* ---- estimation ---- */

typedef struct {
  double estimate;
  double denom;
  size_t n_effective;
  int nw_fallback;
} ckr_fit_result;

CKR_API ckr_status ckr_density(const ckr_dataset* ds, ckr_kernel kernel, double h, const double* x, double* out);
CKR_API ckr_status ckr_joint_density_pairs(const ckr_dataset* ds, ckr_kernel kernel, double b, const double* x_ind,
                                           const double* x_cls, double* out);
CKR_API ckr_status ckr_fit(const ckr_dataset* ds, ckr_kernel kernel, ckr_estimator est, double h, const double* x,
                           ckr_fit_result* out);
CKR_API ckr_status ckr_fit_loco(const ckr_dataset* ds, ckr_kernel kernel, ckr_estimator est, double h,
                                const double* x, size_t cluster, ckr_fit_result* out);

/* ---- bandwidths ---- */

typedef struct {
  ckr_bandwidth_method method;
  ckr_estimator estimator;
  const double* window_lo; /* window_dim entries */
  const double* window_hi;
  size_t window_dim;
  size_t grid_n;   /* 0 = 50 */
  double span_lo;  /* 0 = 1/3 */
  double span_hi;  /* 0 = 3 */
  const double* grid; /* explicit CV grid; overrides grid_n/span when grid_len > 0 */
  size_t grid_len;
  unsigned threads; /* 0 = library default */
} ckr_bandwidth_options;

typedef struct ckr_bandwidth_report ckr_bandwidth_report;

CKR_API void ckr_bandwidth_options_init(ckr_bandwidth_options* opts);
CKR_API ckr_status ckr_bandwidth_select(const ckr_dataset* ds, ckr_kernel kernel, const ckr_bandwidth_options* opts,
                                        ckr_bandwidth_report** out);
CKR_API void ckr_bandwidth_report_free(ckr_bandwidth_report* report);
CKR_API double ckr_bandwidth_report_h(const ckr_bandwidth_report* report);
CKR_API size_t ckr_bandwidth_report_trace_size(const ckr_bandwidth_report* report);
CKR_API ckr_status ckr_bandwidth_report_trace_point(const ckr_bandwidth_report* report, size_t i, double* h,
                                                    double* criterion, int* ok);
CKR_API size_t ckr_bandwidth_report_warning_count(const ckr_bandwidth_report* report);
CKR_API const char* ckr_bandwidth_report_warning(const ckr_bandwidth_report* report, size_t i);
/* CSV: trace (h, criterion, ok, error) for grid methods, else (method, h, bias, sigma2). */
CKR_API ckr_status ckr_bandwidth_report_format(const ckr_bandwidth_report* report, ckr_format format, char** out);

CKR_API ckr_status ckr_cv_criterion(const ckr_dataset* ds, ckr_kernel kernel, ckr_estimator est, double h,
                                    const double* window_lo, const double* window_hi, size_t window_dim,
                                    int leave_one_cluster_out, double* out);
CKR_API ckr_status ckr_aimse_h0(double bias_bar, double sigma2_bar, double r_k, size_t d, size_t n, double* out);
CKR_API ckr_status ckr_undersmooth(double h, size_t n, double* out);
CKR_API ckr_status ckr_reference_h(const ckr_dataset* ds, double* out);
CKR_API ckr_status ckr_lambda_hat(const ckr_dataset* ds, double h, double* out);

/* ---- inference ---- */

typedef struct {
  ckr_estimator estimator;
  double h_m;
  double h_f;
  double h_sigma2;
  double b;     /* pair bandwidth; 0 = h_f */
  double alpha; /* 0 = 0.05 */
  ckr_cov_method cov_method;
  unsigned threads;
} ckr_band_config;

typedef struct {
  double estimate;
  double fhat;
  double sigma2_hat;
  double sigma2_tilde;
  double lambda;
  double cov_term;
  double se_iid;
  double se_cr;
  double se_lambda;
  double ci_iid_lo, ci_iid_hi;
  double ci_cr_lo, ci_cr_hi;
  double ci_lambda_lo, ci_lambda_hi;
  size_t warning_count;
} ckr_band;

typedef struct ckr_band_set ckr_band_set;

CKR_API void ckr_band_config_init(ckr_band_config* cfg);
/* points: row-major n_points x d. */
CKR_API ckr_status ckr_infer(const ckr_dataset* ds, ckr_kernel kernel, const ckr_band_config* cfg,
                             const double* points, size_t n_points, ckr_band_set** out);
CKR_API void ckr_band_set_free(ckr_band_set* set);
CKR_API size_t ckr_band_set_size(const ckr_band_set* set);
CKR_API ckr_status ckr_band_set_get(const ckr_band_set* set, size_t i, ckr_band* out);
CKR_API ckr_status ckr_band_set_format(const ckr_band_set* set, ckr_format format, char** out);

/* ---- simulation ---- */

typedef struct {
  int setup;
  size_t G;
  size_t n_g_base;
  size_t n_g_last;
  double rho_x;
  double rho_e;
  uint64_t seed;
} ckr_dgp;

typedef struct {
  ckr_experiment experiment;
  ckr_estimator estimator;
  ckr_kernel kernel;
  size_t reps;
  const ckr_bandwidth_method* methods; /* ASE; NULL = rot, cr-rot, cv, cr-cv */
  size_t n_methods;
  size_t grid_n;            /* ASE evaluation grid; 0 = 50 */
  const double* x_eval;     /* coverage; NULL = setup default */
  size_t n_x_eval;
  ckr_bias_mode bias_mode;
  double alpha;             /* 0 = 0.05 */
  ckr_cov_method cov_method;
  double h;                 /* CV decomposition bandwidth */
  int use_window;           /* nonzero: window_lo/hi override the setup default */
  double window_lo;
  double window_hi;
  unsigned threads;
  int strict;
} ckr_sim_options;

typedef struct ckr_sim_table ckr_sim_table;

CKR_API void ckr_dgp_init(ckr_dgp* dgp);
CKR_API void ckr_sim_options_init(ckr_sim_options* opts);
CKR_API ckr_status ckr_simulate_dataset(const ckr_dgp* dgp, uint64_t replication, ckr_dataset** out);
/* One table row group per design cell. */
CKR_API ckr_status ckr_simulate(const ckr_dgp* cells, size_t n_cells, const ckr_sim_options* opts,
                                ckr_sim_table** out);
CKR_API void ckr_sim_table_free(ckr_sim_table* table);
CKR_API size_t ckr_sim_table_failures(const ckr_sim_table* table);
CKR_API ckr_status ckr_sim_table_format(const ckr_sim_table* table, ckr_format format, char** out);

CKR_API ckr_status ckr_true_m(int setup, double x, double* m, double* m_prime, double* m_second);
CKR_API ckr_status ckr_true_bias(int setup, ckr_estimator est, ckr_kernel kernel, double x, double* out);

#ifdef __cplusplus
}
#endif

#endif
