#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace spactor {

/// Per-step difference of two aligned metric series.
struct GapSeries {
  std::vector<double> steps;
  std::vector<double> gap;
  std::string label_a;
  std::string label_b;
};

/// Elementwise A - B; the two series must be sampled at identical steps, all
/// of them >= start_step.
GapSeries gap_series(std::span<const double> steps_a, std::span<const double> values_a,
                     std::span<const double> steps_b, std::span<const double> values_b,
                     double start_step, std::string label_a = "a", std::string label_b = "b");

/// OLS fit y = beta0 * x + beta1 with a two-sided t-test of H0: beta0 = 0
/// on n-2 degrees of freedom.
struct RegressionResult {
  double beta0 = 0.0;   // slope
  double beta1 = 0.0;   // intercept
  double stderr_beta0 = 0.0;
  double t_stat = 0.0;
  double p_value = 1.0;
  int n_points = 0;
};

RegressionResult ols_trend_test(std::span<const double> x, std::span<const double> y);
RegressionResult ols_trend_test(const GapSeries& series);

/// Two-sided p-value P(|T_dof| >= |t|) via the regularized incomplete beta
/// function.
double student_t_two_sided_p(double t, double dof);

/// Regularized incomplete beta I_x(a, b) (continued-fraction evaluation).
double regularized_incomplete_beta(double a, double b, double x);

}  // namespace spactor
