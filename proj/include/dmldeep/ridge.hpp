#pragma once

#include "dmldeep/types.hpp"

namespace dmldeep {

// Ridge regression with an unpenalized intercept.
struct RidgeModel {
  Vector coef;
  double intercept = 0.0;

  Vector predict(const Matrix& x) const;
};

// Solves (Xc'Xc + penalty I) b = Xc'yc on centered data. penalty = 0 gives least squares.
RidgeModel fit_ridge(const Matrix& x, const Vector& y, double penalty);

}  // namespace dmldeep
