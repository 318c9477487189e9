#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace dikw::stats {

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

// Two-sided standard-normal critical value for a confidence level.
double z_critical(double level);
// Two-sided Student-t critical value.
double t_critical(double level, double df);

// P(|Z| >= |z|).
double normal_two_sided_p(double z);
// P(|T| >= |t|) with df degrees of freedom.
double t_two_sided_p(double t, double df);
// P(X >= x) for chi-squared with df degrees of freedom.
double chi_square_upper_p(double x, double df);

// Wilson score interval; bounds pinned to 0 / 1 at k = 0 / k = n.
Interval wilson(std::int64_t k, std::int64_t n, double level);

struct TwoProportion {
  double p1 = 0.0, p2 = 0.0;
  double difference = 0.0;         // p1 - p2
  Interval difference_ci;          // unpooled (Wald) interval
  std::optional<double> z;         // absent when the pooled proportion is 0 or 1
  std::optional<double> p_value;
  bool degenerate = false;
};

// Pooled two-sided z-test, no continuity correction.
TwoProportion two_proportion(std::int64_t k1, std::int64_t n1, std::int64_t k2, std::int64_t n2, double level);

struct ChiSquare {
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  double cramers_v = 0.0;
  std::int64_t n = 0;
  int rows = 0, cols = 0;  // after dropping empty margins
};

// Pearson chi-squared test of independence on an r x c count table
// (row-major). Empty rows and columns are dropped first; fewer than two of
// either raises DegenerateGroup.
ChiSquare chi_square_independence(const std::vector<std::int64_t>& counts, int rows, int cols);

struct Correlation {
  double r = 0.0;
  std::int64_t n = 0;
  std::optional<double> t;  // absent for |r| = 1
  double p_value = 0.0;
  std::optional<Interval> ci;  // Fisher z; needs n > 3
};

// From centered sums; DegenerateGroup on n < 3 or zero variance.
Correlation pearson(std::int64_t n, double sxx, double syy, double sxy, double level);

struct MeanEstimate {
  double mean = 0.0;
  std::int64_t n = 0;
  std::optional<Interval> ci;  // t interval; needs n >= 2
};

MeanEstimate mean_ci(std::int64_t n, double mean, double m2, double level);

// (treatment - baseline) / baseline; DomainError when baseline <= 0.
double relative_lift(double treatment_rate, double baseline_rate);
double absolute_lift(double treatment_rate, double baseline_rate);

}  // namespace dikw::stats
