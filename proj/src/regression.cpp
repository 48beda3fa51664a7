#include "spactor/regression.hpp"

#include <cmath>
#include <limits>

#include "spactor/common.hpp"

namespace spactor {

GapSeries gap_series(std::span<const double> steps_a, std::span<const double> values_a,
                     std::span<const double> steps_b, std::span<const double> values_b,
                     double start_step, std::string label_a, std::string label_b) {
  require(steps_a.size() == values_a.size() && steps_b.size() == values_b.size(),
          "gap_series: step/value size mismatch");
  GapSeries out;
  out.label_a = std::move(label_a);
  out.label_b = std::move(label_b);
  size_t ia = 0, ib = 0;
  while (ia < steps_a.size() && steps_a[ia] < start_step) ++ia;
  while (ib < steps_b.size() && steps_b[ib] < start_step) ++ib;
  require(steps_a.size() - ia == steps_b.size() - ib, "gap_series: step misalignment");
  double prev = -std::numeric_limits<double>::infinity();
  for (; ia < steps_a.size(); ++ia, ++ib) {
    require(steps_a[ia] == steps_b[ib], "gap_series: step misalignment");
    require(steps_a[ia] > prev, "gap_series: steps must be strictly increasing");
    require(std::isfinite(values_a[ia]) && std::isfinite(values_b[ib]),
            "gap_series: non-finite value");
    prev = steps_a[ia];
    out.steps.push_back(steps_a[ia]);
    out.gap.push_back(values_a[ia] - values_b[ib]);
  }
  return out;
}

namespace {

// Lentz continued fraction for the incomplete beta (Numerical Recipes betacf).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  require(a > 0.0 && b > 0.0, "incomplete beta: a, b must be positive");
  require(x >= 0.0 && x <= 1.0, "incomplete beta: x must be in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double dof) {
  require(dof > 0.0, "t-test: dof must be positive");
  if (!std::isfinite(t)) return 0.0;
  const double x = dof / (dof + t * t);
  return regularized_incomplete_beta(dof / 2.0, 0.5, x);
}

RegressionResult ols_trend_test(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "ols: x/y size mismatch");
  const int n = static_cast<int>(x.size());
  require(n >= 3, "ols: need at least 3 points");

  double mean_x = 0.0, mean_y = 0.0;
  for (int i = 0; i < n; ++i) {
    mean_x += x[i];
    mean_y += y[i];
  }
  mean_x /= n;
  mean_y /= n;

  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < n; ++i) {
    const double dx = x[i] - mean_x;
    sxx += dx * dx;
    sxy += dx * (y[i] - mean_y);
  }
  require(sxx > 0.0, "ols: degenerate x variance");

  RegressionResult r;
  r.n_points = n;
  r.beta0 = sxy / sxx;
  r.beta1 = mean_y - r.beta0 * mean_x;

  double sse = 0.0;
  for (int i = 0; i < n; ++i) {
    const double resid = y[i] - (r.beta0 * x[i] + r.beta1);
    sse += resid * resid;
  }
  const double sigma2 = sse / (n - 2);
  r.stderr_beta0 = std::sqrt(sigma2 / sxx);
  if (r.stderr_beta0 == 0.0) {
    r.t_stat = r.beta0 == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    r.p_value = r.beta0 == 0.0 ? 1.0 : 0.0;
  } else {
    r.t_stat = r.beta0 / r.stderr_beta0;
    r.p_value = student_t_two_sided_p(r.t_stat, static_cast<double>(n - 2));
  }
  return r;
}

RegressionResult ols_trend_test(const GapSeries& series) {
  return ols_trend_test(series.steps, series.gap);
}

}  // namespace spactor
