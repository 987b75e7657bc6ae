#include "flood/stats.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "flood/errors.hpp"

namespace flood {

namespace {

// continued fraction for the incomplete beta (modified Lentz)
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double mean(std::span<const double> xs) {
  if (xs.empty()) {
    throw InvalidSpecError("mean of an empty sample");
  }
  double total = 0.0;
  for (double x : xs) total += x;
  return total / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) {
    throw InvalidSpecError("sample variance needs at least two values");
  }
  const double mu = mean(xs);
  double total = 0.0;
  for (double x : xs) total += (x - mu) * (x - mu);
  return total / static_cast<double>(xs.size() - 1);
}

double sample_stddev(std::span<const double> xs) {
  return std::sqrt(sample_variance(xs));
}

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw InvalidSpecError("incomplete beta needs positive shape parameters");
  }
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;

  const double ln_pre = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                        a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(ln_pre) * beta_cf(a, b, x) / a;
  }
  return 1.0 - std::exp(ln_pre) * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_pvalue(double t, double dof) {
  if (std::isinf(t)) return 0.0;
  if (std::isnan(t)) {
    throw NumericError("t statistic is NaN");
  }
  const double x = dof / (dof + t * t);
  return incomplete_beta(dof / 2.0, 0.5, x);
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b,
                         double alpha) {
  if (a.size() < 2 || b.size() < 2) {
    throw InvalidSpecError("each sample needs at least two values");
  }
  if (!(alpha > 0.0) || !(alpha < 1.0)) {
    throw InvalidSpecError("alpha must lie in (0, 1)");
  }

  const double mean_a = mean(a);
  const double mean_b = mean(b);
  const double ua = sample_variance(a) / static_cast<double>(a.size());
  const double ub = sample_variance(b) / static_cast<double>(b.size());
  const double se2 = ua + ub;

  WelchResult result{};
  if (se2 <= 0.0) {
    // degenerate: no variance anywhere
    if (mean_a == mean_b) {
      result.t_statistic = 0.0;
      result.dof = static_cast<double>(a.size() + b.size() - 2);
      result.p_value = 1.0;
      result.significant = false;
    } else {
      result.t_statistic = mean_a > mean_b
                               ? std::numeric_limits<double>::infinity()
                               : -std::numeric_limits<double>::infinity();
      result.dof = static_cast<double>(a.size() + b.size() - 2);
      result.p_value = 0.0;
      result.significant = true;
    }
    return result;
  }

  result.t_statistic = (mean_a - mean_b) / std::sqrt(se2);
  result.dof = se2 * se2 /
               (ua * ua / static_cast<double>(a.size() - 1) +
                ub * ub / static_cast<double>(b.size() - 1));
  result.p_value = student_t_two_sided_pvalue(result.t_statistic, result.dof);
  result.significant = result.p_value < alpha;
  return result;
}

}  // namespace flood
