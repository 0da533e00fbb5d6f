#pragma once

#include "dmldeep/types.hpp"

namespace dmldeep {

double mean(const Vector& v);
// Population variance (ddof = 0).
double variance(const Vector& v);
// Sample standard deviation (ddof = 1).
double sample_sd(const Vector& v);
double covariance(const Vector& a, const Vector& b);
// Empirical L2 norm sqrt(mean(v^2)).
double empirical_norm(const Vector& v);
double rmse(const Vector& v, const Vector& v_hat);

// Linear-interpolated quantile of the data (same rule as numpy's default).
double quantile(Vector v, double q);

// 1 - sum (v - v_hat)^2 / sum (v - mean v)^2. Throws DegenerateError when v is constant.
double r_squared(const Vector& v, const Vector& v_hat);

// R^2 of a predictor relative to the oracle ceiling. Unclamped.
double relative_r2(const Vector& v, const Vector& v_hat, double oracle_r2);
inline bool exceeds_ceiling(double rel_r2) { return rel_r2 > 1.0; }

// Slope of the OLS regression of y on d with intercept.
double ols_baseline(const Vector& y, const Vector& d);

// Inverse of the standard normal CDF, for p in (0, 1).
double normal_quantile(double p);
double normal_cdf(double x);

}  // namespace dmldeep
