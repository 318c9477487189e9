#include "dikw/info/stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "dikw/common/error.hpp"

namespace dikw::stats {

namespace {

void require_level(double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw Error(ErrorCode::DomainError, "confidence level must lie in (0,1), got " + std::to_string(level));
  }
}

}  // namespace

double z_critical(double level) {
  require_level(level);
  return boost::math::quantile(boost::math::normal(), 0.5 + level / 2.0);
}

double t_critical(double level, double df) {
  require_level(level);
  return boost::math::quantile(boost::math::students_t(df), 0.5 + level / 2.0);
}

double normal_two_sided_p(double z) { return std::min(1.0, std::erfc(std::fabs(z) / std::sqrt(2.0))); }

double t_two_sided_p(double t, double df) {
  if (t == 0.0) return 1.0;
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t(df), std::fabs(t))));
}

double chi_square_upper_p(double x, double df) {
  if (x <= 0.0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), x));
}

Interval wilson(std::int64_t k, std::int64_t n, double level) {
  if (n < 1 || k < 0 || k > n) {
    throw Error(ErrorCode::DomainError,
                "rate needs 0 <= k <= n and n >= 1 (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  }
  const double z = z_critical(level);
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  Interval out{centre - half, centre + half};
  if (k == 0) out.low = 0.0;
  if (k == n) out.high = 1.0;
  out.low = std::clamp(out.low, 0.0, p);
  out.high = std::clamp(out.high, p, 1.0);
  return out;
}

TwoProportion two_proportion(std::int64_t k1, std::int64_t n1, std::int64_t k2, std::int64_t n2, double level) {
  if (n1 < 1 || n2 < 1) throw Error(ErrorCode::DegenerateGroup, "two-proportion test needs two non-empty groups");
  if (k1 < 0 || k1 > n1 || k2 < 0 || k2 > n2) throw Error(ErrorCode::DomainError, "successes out of range");
  TwoProportion out;
  const double a = static_cast<double>(n1), b = static_cast<double>(n2);
  out.p1 = static_cast<double>(k1) / a;
  out.p2 = static_cast<double>(k2) / b;
  out.difference = out.p1 - out.p2;
  const double zc = z_critical(level);
  const double se_unpooled = std::sqrt(out.p1 * (1 - out.p1) / a + out.p2 * (1 - out.p2) / b);
  out.difference_ci = {out.difference - zc * se_unpooled, out.difference + zc * se_unpooled};
  const double pooled = static_cast<double>(k1 + k2) / (a + b);
  if (k1 + k2 == 0 || k1 + k2 == n1 + n2) {
    out.degenerate = true;
    return out;
  }
  const double se = std::sqrt(pooled * (1 - pooled) * (1.0 / a + 1.0 / b));
  out.z = out.difference / se;
  out.p_value = normal_two_sided_p(*out.z);
  return out;
}

ChiSquare chi_square_independence(const std::vector<std::int64_t>& counts, int rows, int cols) {
  std::vector<std::int64_t> rsum(rows, 0), csum(cols, 0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      rsum[r] += counts[static_cast<std::size_t>(r) * cols + c];
      csum[c] += counts[static_cast<std::size_t>(r) * cols + c];
    }
  }
  std::vector<int> keep_r, keep_c;
  for (int r = 0; r < rows; ++r)
    if (rsum[r] > 0) keep_r.push_back(r);
  for (int c = 0; c < cols; ++c)
    if (csum[c] > 0) keep_c.push_back(c);
  if (keep_r.size() < 2 || keep_c.size() < 2) {
    throw Error(ErrorCode::DegenerateGroup, "chi-squared test needs at least two non-empty rows and columns",
                {{"rows", keep_r.size()}, {"cols", keep_c.size()}});
  }
  ChiSquare out;
  for (int r : keep_r) out.n += rsum[r];
  const double n = static_cast<double>(out.n);
  double stat = 0.0;
  for (int r : keep_r) {
    for (int c : keep_c) {
      const double expected = static_cast<double>(rsum[r]) * static_cast<double>(csum[c]) / n;
      const double d = static_cast<double>(counts[static_cast<std::size_t>(r) * cols + c]) - expected;
      stat += d * d / expected;
    }
  }
  out.rows = static_cast<int>(keep_r.size());
  out.cols = static_cast<int>(keep_c.size());
  out.statistic = stat;
  out.df = static_cast<double>((out.rows - 1) * (out.cols - 1));
  out.p_value = chi_square_upper_p(stat, out.df);
  out.cramers_v = std::sqrt(stat / (n * static_cast<double>(std::min(out.rows, out.cols) - 1)));
  return out;
}

Correlation pearson(std::int64_t n, double sxx, double syy, double sxy, double level) {
  if (n < 3) throw Error(ErrorCode::DegenerateGroup, "correlation needs at least 3 complete pairs", {{"n", n}});
  if (!(sxx > 0.0) || !(syy > 0.0)) throw Error(ErrorCode::DegenerateGroup, "correlation needs nonzero variance");
  Correlation out;
  out.n = n;
  out.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(n - 2);
  const double one_minus = 1.0 - out.r * out.r;
  if (one_minus <= 0.0) {
    out.p_value = 0.0;
    out.ci = Interval{out.r, out.r};
    return out;
  }
  out.t = out.r * std::sqrt(df / one_minus);
  out.p_value = t_two_sided_p(*out.t, df);
  if (n > 3) {
    const double z = std::atanh(out.r);
    const double half = z_critical(level) / std::sqrt(static_cast<double>(n - 3));
    out.ci = Interval{std::tanh(z - half), std::tanh(z + half)};
  }
  return out;
}

MeanEstimate mean_ci(std::int64_t n, double mean, double m2, double level) {
  MeanEstimate out;
  out.n = n;
  out.mean = mean;
  if (n >= 2) {
    const double sd = std::sqrt(m2 / static_cast<double>(n - 1));
    const double half = t_critical(level, static_cast<double>(n - 1)) * sd / std::sqrt(static_cast<double>(n));
    out.ci = Interval{mean - half, mean + half};
  }
  return out;
}

double relative_lift(double treatment_rate, double baseline_rate) {
  if (!(baseline_rate > 0.0)) {
    throw Error(ErrorCode::DomainError, "relative lift needs a positive baseline rate");
  }
  return (treatment_rate - baseline_rate) / baseline_rate;
}

double absolute_lift(double treatment_rate, double baseline_rate) { return treatment_rate - baseline_rate; }

}  // namespace dikw::stats
