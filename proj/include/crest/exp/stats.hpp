#pragma once

// Small-sample statistics for experiment tables: summaries and ordinary
// least squares with Student-t confidence intervals on the slope.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace crest::exp {

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single value
  int n = 0;
};

inline Summary summarize(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("summarize: empty sample");
  Summary s;
  s.n = static_cast<int>(xs.size());
  for (double v : xs) s.mean += v;
  s.mean /= s.n;
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : xs) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / (s.n - 1));
  }
  return s;
}

namespace detail {

// Continued fraction for the regularized incomplete beta (Lentz's method).
inline double beta_cf(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 3e-15) break;
  }
  return h;
}

inline double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front =
      std::exp(a * std::log(x) + b * std::log1p(-x) -
               (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b)));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

}  // namespace detail

inline double student_t_cdf(double t, double dof) {
  if (dof <= 0.0) throw std::invalid_argument("student_t_cdf: dof must be positive");
  if (std::isnan(t)) return t;
  const double tail = 0.5 * detail::reg_inc_beta(0.5 * dof, 0.5, dof / (dof + t * t));
  return t >= 0.0 ? 1.0 - tail : tail;
}

inline double student_t_quantile(double p, double dof) {
  if (dof <= 0.0) throw std::invalid_argument("student_t_quantile: dof must be positive");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("student_t_quantile: p outside (0,1)");
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -student_t_quantile(1.0 - p, dof);
  double lo = 0.0, hi = 1.0;
  while (student_t_cdf(hi, dof) < p) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-13 * (1.0 + hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    (student_t_cdf(mid, dof) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double slope_lo = 0.0;  // two-sided confidence interval on the slope
  double slope_hi = 0.0;
  int n = 0;
};

// Ordinary least squares y = intercept + slope*x with a Student-t interval
// on the slope (needs n >= 3 and at least two distinct x values).
inline LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys,
                        double confidence = 0.95) {
  if (xs.size() != ys.size()) throw std::invalid_argument("fit_line: length mismatch");
  const int n = static_cast<int>(xs.size());
  if (n < 3) throw std::invalid_argument("fit_line: need at least three points");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw std::invalid_argument("fit_line: confidence outside (0,1)");

  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx <= 0.0) throw std::invalid_argument("fit_line: x values are all identical");

  LineFit f;
  f.n = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = ys[i] - (f.intercept + f.slope * xs[i]);
    sse += r * r;
  }
  const int dof = n - 2;
  f.slope_stderr = std::sqrt(sse / dof / sxx);
  const double t = student_t_quantile(0.5 + 0.5 * confidence, dof);
  f.slope_lo = f.slope - t * f.slope_stderr;
  f.slope_hi = f.slope + t * f.slope_stderr;
  return f;
}

}  // namespace crest::exp
