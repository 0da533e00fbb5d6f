#include "dmldeep/metrics.hpp"

#include "dmldeep/error.hpp"

#include <algorithm>
#include <cmath>

namespace dmldeep {

double mean(const Vector& v) {
  if (v.size() == 0) throw ValidationError("mean of empty vector");
  return v.mean();
}

double variance(const Vector& v) {
  const double mu = mean(v);
  return (v.array() - mu).square().mean();
}

double sample_sd(const Vector& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean(v);
  return std::sqrt((v.array() - mu).square().sum() / static_cast<double>(v.size() - 1));
}

double covariance(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ValidationError("covariance: length mismatch");
  return ((a.array() - mean(a)) * (b.array() - mean(b))).mean();
}

double empirical_norm(const Vector& v) {
  if (v.size() == 0) throw ValidationError("norm of empty vector");
  return std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
}

double rmse(const Vector& v, const Vector& v_hat) {
  if (v.size() != v_hat.size()) throw ValidationError("rmse: length mismatch");
  return empirical_norm(v - v_hat);
}

double quantile(Vector v, double q) {
  if (v.size() == 0) throw ValidationError("quantile of empty vector");
  std::sort(v.data(), v.data() + v.size());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<Index>(std::floor(pos));
  const Index hi = std::min<Index>(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

double r_squared(const Vector& v, const Vector& v_hat) {
  if (v.size() != v_hat.size()) throw ValidationError("r_squared: length mismatch");
  if (v.size() < 2) throw ValidationError("r_squared needs at least 2 observations");
  const double mu = v.mean();
  const double total = (v.array() - mu).square().sum();
  if (!(total > 0.0)) throw DegenerateError("r_squared: outcome has zero variance");
  return 1.0 - (v - v_hat).squaredNorm() / total;
}

double relative_r2(const Vector& v, const Vector& v_hat, double oracle_r2) {
  if (!(oracle_r2 > 0.0)) throw ValidationError("relative_r2: oracle R^2 must be positive");
  return r_squared(v, v_hat) / oracle_r2;
}

double ols_baseline(const Vector& y, const Vector& d) {
  if (y.size() != d.size()) throw ValidationError("ols_baseline: length mismatch");
  const double vd = variance(d);
  if (!(vd > 0.0)) throw DegenerateError("ols_baseline: treatment has zero variance");
  return covariance(y, d) / vd;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal_quantile: p must lie in (0,1)");
  // Acklam's rational approximation followed by one Halley step on erfc.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
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
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

}  // namespace dmldeep
