#include "clusterkr/inference.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include "json.hpp"
#include <ostream>
#include <string>

#include "clusterkr/bandwidth.hpp"
#include "clusterkr/density.hpp"
#include "clusterkr/error.hpp"
#include "clusterkr/format.hpp"
#include "clusterkr/parallel.hpp"
#include "window.hpp"

namespace ckr {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw_invalid("normal quantile needs 0 < p < 1, got " + format_double(p));
  // Acklam's rational approximation followed by one Halley step.
  static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                           1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                           6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                           -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                           3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * 3.14159265358979323846) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double z_two_sided(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw_invalid("alpha must lie in (0, 1), got " + format_double(alpha));
  if (alpha == 0.10) return 1.6448536269514722;
  if (alpha == 0.05) return 1.959963984540054;
  if (alpha == 0.01) return 2.5758293035489004;
  return normal_quantile(1.0 - alpha / 2.0);
}

namespace {

void check_se_inputs(double fhat, std::size_t n, double h) {
  if (!(fhat > 0.0)) throw Error(ErrorKind::numeric, "density estimate is not positive (" + format_double(fhat) + ")");
  if (n == 0) throw_invalid("sample size must be positive");
  if (!(h > 0.0)) throw_invalid("bandwidth must be positive");
}

double nh_d(std::size_t n, double h, std::size_t d) {
  return static_cast<double>(n) * std::pow(h, static_cast<double>(d));
}

}  // namespace

double se_iid(double r_k, std::size_t d, double sigma2_at_x, double fhat_at_x, std::size_t n, double h) {
  check_se_inputs(fhat_at_x, n, h);
  if (sigma2_at_x < 0.0) throw_invalid("conditional variance must be nonnegative");
  return std::sqrt(std::pow(r_k, static_cast<double>(d)) * sigma2_at_x / (nh_d(n, h, d) * fhat_at_x));
}

double se_cr(double r_k, std::size_t d, double sigma2_tilde_at_x, double fhat_at_x, std::size_t n, double h) {
  return se_iid(r_k, d, sigma2_tilde_at_x, fhat_at_x, n, h);
}

SeLambda se_lambda(double cr_term, const CovTermEstimate& cov, double fhat_at_x, std::size_t n, double h,
                   std::size_t d) {
  check_se_inputs(fhat_at_x, n, h);
  double bracket = cr_term + cov.value;
  SeLambda out;
  if (bracket < 0.0) {
    bracket = cr_term;
    out.clamped = true;
  }
  out.value = std::sqrt(bracket / nh_d(n, h, d));
  return out;
}

namespace {

Interval around(double center, double z, double se) { return {center - z * se, center + z * se}; }

void check_band_config(const ClusteredDataset& ds, const BandConfig& cfg) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw_invalid(std::string(name) + " must be positive and finite, got " + format_double(v));
  };
  positive(cfg.h_m, "h_m");
  positive(cfg.h_f, "h_f");
  positive(cfg.h_sigma2, "h_sigma2");
  if (cfg.b) positive(*cfg.b, "pair bandwidth b");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw_invalid("alpha must lie in (0, 1)");
  if (ds.empty()) throw Error(ErrorKind::validation, "dataset has no observations");
  if (cfg.cov_method == CovMethod::parametric_compromise && (ds.d_ind() != 1 || ds.d_cls() != 0))
    throw_invalid("the parametric covariance term needs a single individual-level regressor; use nonparametric");
}

void mark_window(const ClusteredDataset& ds, const Kernel& kernel, double h, std::span<const double> x,
                 std::vector<char>& mask) {
  detail::for_each_weighted(ds, kernel, h, x, Exclusion::nothing(), [&](std::size_t i, double) { mask[i] = 1; });
}

}  // namespace

std::vector<InferenceBand> make_bands(const ClusteredDataset& ds, const Kernel& kernel,
                                      std::span<const std::vector<double>> points, const BandConfig& cfg) {
  check_band_config(ds, cfg);
  if (points.empty()) throw Error(ErrorKind::validation, "no evaluation points");
  for (const auto& x : points) detail::check_point(ds, cfg.h_m, x);
  const double z = z_two_sided(cfg.alpha);
  const double b = cfg.b.value_or(cfg.h_f);

  std::vector<char> var_mask(ds.n(), 0), fit_mask;
  for (const auto& x : points) mark_window(ds, kernel, cfg.h_sigma2, x, var_mask);
  fit_mask = var_mask;
  if (cfg.cov_method == CovMethod::nonparametric)
    for (const auto& x : points) mark_window(ds, kernel, b, x, fit_mask);

  const ResidualSet fitted = residuals(ds, kernel, cfg.h_m, cfg.estimator, ResidualVariant::fitted, fit_mask);
  const ResidualSet jack = residuals(ds, kernel, cfg.h_m, cfg.estimator, ResidualVariant::jackknife, var_mask);
  std::optional<ResidualSet> pilot;
  if (cfg.cov_method == CovMethod::parametric_compromise) pilot = poly4_loco_residuals(ds);
  const LambdaHat lambda = lambda_hat(size_summary(ds), cfg.h_m, ds.d_ind());
  const double r_k = kernel.roughness();
  const std::size_t d = ds.d();

  std::vector<InferenceBand> bands(points.size());
  parallel_for(points.size(), cfg.threads, [&](std::size_t k) {
    const auto& x = points[k];
    InferenceBand& band = bands[k];
    try {
      band.x = x;
      band.h_m = cfg.h_m;
      band.h_f = cfg.h_f;
      band.h_sigma2 = cfg.h_sigma2;
      const FitResult fr = fit(ds, kernel, cfg.estimator, cfg.h_m, x);
      band.estimate = fr.estimate;
      if (fr.nw_fallback) band.warnings.push_back("local linear design degenerate; Nadaraya-Watson value used");
      band.fhat = density(ds, kernel, cfg.h_f, x).value;
      if (!(band.fhat > 0.0)) throw EmptyWindowError(x, cfg.h_f, "density estimate");
      band.sigma2_hat = cond_var_nw(ds, kernel, cfg.h_sigma2, x, fitted);
      band.sigma2_tilde = cond_var_nw(ds, kernel, cfg.h_sigma2, x, jack);
      band.lambda = lambda.value;
      const std::span<const double> xs(x);
      const auto x_ind = xs.first(ds.d_ind());
      const auto x_cls = xs.subspan(ds.d_ind());
      band.cov_term = cfg.cov_method == CovMethod::parametric_compromise
                          ? parametric_cov_term(ds, *pilot, lambda, r_k, x_ind, band.fhat)
                          : nonparametric_cov_term(ds, kernel, b, x_ind, x_cls, fitted, lambda, band.fhat);
      band.se_iid = se_iid(r_k, d, band.sigma2_hat, band.fhat, ds.n(), cfg.h_m);
      band.se_cr = se_cr(r_k, d, band.sigma2_tilde, band.fhat, ds.n(), cfg.h_m);
      const double cr_term = std::pow(r_k, static_cast<double>(d)) * band.sigma2_tilde / band.fhat;
      const SeLambda sl = se_lambda(cr_term, band.cov_term, band.fhat, ds.n(), cfg.h_m, d);
      band.se_lambda = sl.value;
      if (sl.clamped)
        band.warnings.push_back("negative total variance with the covariance term; se_lambda falls back to se_cr");
      band.ci_iid = around(band.estimate, z, band.se_iid);
      band.ci_cr = around(band.estimate, z, band.se_cr);
      band.ci_lambda = around(band.estimate, z, band.se_lambda);
    } catch (const Error& e) {
      throw Error(e.kind(), "inference at x=" + format_point(x) + ": " + e.what());
    }
  });
  return bands;
}

InferenceBand make_band(const ClusteredDataset& ds, const Kernel& kernel, std::span<const double> x,
                        const BandConfig& cfg) {
  const std::vector<std::vector<double>> pts{{x.begin(), x.end()}};
  return make_bands(ds, kernel, pts, cfg).front();
}

namespace {

void write_x_header(std::ostream& out, std::size_t d) {
  if (d == 1) {
    out << "x";
    return;
  }
  for (std::size_t q = 0; q < d; ++q) out << (q ? "," : "") << "x" << (q + 1);
}

void write_x(std::ostream& out, const std::vector<double>& x) {
  for (std::size_t q = 0; q < x.size(); ++q) out << (q ? "," : "") << format_double(x[q]);
}

std::size_t band_dim(std::span<const InferenceBand> bands) {
  if (bands.empty()) throw Error(ErrorKind::validation, "no bands to write");
  const std::size_t d = bands.front().x.size();
  for (const auto& b : bands)
    if (b.x.size() != d) throw_invalid("bands have inconsistent dimensions");
  return d;
}

std::string join(const std::vector<std::string>& parts) {
  std::string s;
  for (const auto& p : parts) {
    if (!s.empty()) s += "; ";
    s += p;
  }
  return s;
}

}  // namespace

void write_bands_csv(std::ostream& out, std::span<const InferenceBand> bands) {
  const std::size_t d = band_dim(bands);
  write_x_header(out, d);
  out << ",mhat,se_iid,se_cr,se_lambda,ci_iid_lo,ci_iid_hi,ci_cr_lo,ci_cr_hi,ci_lambda_lo,ci_lambda_hi,warnings\n";
  for (const auto& b : bands) {
    write_x(out, b.x);
    for (double v : {b.estimate, b.se_iid, b.se_cr, b.se_lambda, b.ci_iid.lo, b.ci_iid.hi, b.ci_cr.lo, b.ci_cr.hi,
                     b.ci_lambda.lo, b.ci_lambda.hi})
      out << ',' << format_double(v);
    out << ',' << csv_escape(join(b.warnings)) << '\n';
  }
}

void write_plot_csv(std::ostream& out, std::span<const InferenceBand> bands) {
  const std::size_t d = band_dim(bands);
  write_x_header(out, d);
  out << ",mhat,iid_lo,iid_hi,cr_lo,cr_hi,lambda_lo,lambda_hi\n";
  for (const auto& b : bands) {
    write_x(out, b.x);
    for (double v : {b.estimate, b.ci_iid.lo, b.ci_iid.hi, b.ci_cr.lo, b.ci_cr.hi, b.ci_lambda.lo, b.ci_lambda.hi})
      out << ',' << format_double(v);
    out << '\n';
  }
}

std::string bands_to_json(std::span<const InferenceBand> bands) {
  band_dim(bands);
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& b : bands) {
    nlohmann::ordered_json j;
    j["x"] = b.x;
    j["mhat"] = b.estimate;
    j["fhat"] = b.fhat;
    j["sigma2_hat"] = b.sigma2_hat;
    j["sigma2_tilde"] = b.sigma2_tilde;
    j["lambda"] = b.lambda;
    j["cov_term"] = b.cov_term.value;
    j["cov_method"] = std::string(to_string(b.cov_term.method));
    j["se_iid"] = b.se_iid;
    j["se_cr"] = b.se_cr;
    j["se_lambda"] = b.se_lambda;
    j["ci_iid"] = {b.ci_iid.lo, b.ci_iid.hi};
    j["ci_cr"] = {b.ci_cr.lo, b.ci_cr.hi};
    j["ci_lambda"] = {b.ci_lambda.lo, b.ci_lambda.hi};
    j["bandwidths"] = {{"h_m", b.h_m}, {"h_f", b.h_f}, {"h_sigma2", b.h_sigma2}};
    j["warnings"] = b.warnings;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

namespace {

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

void write_plot_svg(std::ostream& out, std::span<const InferenceBand> bands) {
  if (band_dim(bands) != 1) throw_invalid("SVG plots need a single regressor");
  constexpr double width = 640, height = 400, margin = 48;
  double x0 = bands.front().x[0], x1 = x0, y0 = bands.front().estimate, y1 = y0;
  for (const auto& b : bands) {
    x0 = std::min(x0, b.x[0]);
    x1 = std::max(x1, b.x[0]);
    for (double v : {b.estimate, b.ci_iid.lo, b.ci_iid.hi, b.ci_cr.lo, b.ci_cr.hi, b.ci_lambda.lo, b.ci_lambda.hi}) {
      y0 = std::min(y0, v);
      y1 = std::max(y1, v);
    }
  }
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) y1 = y0 + 1.0;
  auto px = [&](double v) { return margin + (v - x0) / (x1 - x0) * (width - 2 * margin); };
  auto py = [&](double v) { return height - margin - (v - y0) / (y1 - y0) * (height - 2 * margin); };
  auto line = [&](auto value, const char* style) {
    out << "  <polyline fill=\"none\" " << style << " points=\"";
    for (std::size_t k = 0; k < bands.size(); ++k)
      out << (k ? " " : "") << fixed(px(bands[k].x[0])) << ',' << fixed(py(value(bands[k])));
    out << "\"/>\n";
  };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "  <polygon fill=\"#c6dbef\" stroke=\"none\" points=\"";
  for (std::size_t k = 0; k < bands.size(); ++k)
    out << (k ? " " : "") << fixed(px(bands[k].x[0])) << ',' << fixed(py(bands[k].ci_lambda.hi));
  for (std::size_t k = bands.size(); k-- > 0;)
    out << ' ' << fixed(px(bands[k].x[0])) << ',' << fixed(py(bands[k].ci_lambda.lo));
  out << "\"/>\n";
  line([](const InferenceBand& b) { return b.ci_cr.lo; }, "stroke=\"#e6550d\" stroke-dasharray=\"6 3\"");
  line([](const InferenceBand& b) { return b.ci_cr.hi; }, "stroke=\"#e6550d\" stroke-dasharray=\"6 3\"");
  line([](const InferenceBand& b) { return b.ci_iid.lo; }, "stroke=\"#636363\" stroke-dasharray=\"2 3\"");
  line([](const InferenceBand& b) { return b.ci_iid.hi; }, "stroke=\"#636363\" stroke-dasharray=\"2 3\"");
  line([](const InferenceBand& b) { return b.estimate; }, "stroke=\"#08519c\" stroke-width=\"2\"");
  out << "  <line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n";
  out << "  <line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\"" << height - margin
      << "\" stroke=\"black\"/>\n";
  out << "  <text x=\"" << margin << "\" y=\"" << height - margin + 16 << "\" font-size=\"11\">" << fixed(x0)
      << "</text>\n";
  out << "  <text x=\"" << width - margin << "\" y=\"" << height - margin + 16
      << "\" font-size=\"11\" text-anchor=\"end\">" << fixed(x1) << "</text>\n";
  out << "  <text x=\"" << margin - 4 << "\" y=\"" << height - margin << "\" font-size=\"11\" text-anchor=\"end\">"
      << fixed(y0) << "</text>\n";
  out << "  <text x=\"" << margin - 4 << "\" y=\"" << margin + 4 << "\" font-size=\"11\" text-anchor=\"end\">"
      << fixed(y1) << "</text>\n";
  out << "</svg>\n";
}

}  // namespace ckr
