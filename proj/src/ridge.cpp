#include "dmldeep/ridge.hpp"

#include "dmldeep/error.hpp"

namespace dmldeep {

Vector RidgeModel::predict(const Matrix& x) const {
  if (x.cols() != coef.size()) throw SchemaError("ridge expects " + std::to_string(coef.size()) + " features");
  return (x * coef).array() + intercept;
}

RidgeModel fit_ridge(const Matrix& x, const Vector& y, double penalty) {
  if (penalty < 0.0) throw ValidationError("ridge penalty must be >= 0");
  if (x.rows() != y.size() || x.rows() < 1) throw ValidationError("ridge: design and outcome lengths differ");
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Matrix xc = x.rowwise() - x_mean;
  Matrix gram = xc.transpose() * xc;
  gram.diagonal().array() += penalty;
  const Vector rhs = xc.transpose() * (y.array() - y_mean).matrix();

  RidgeModel m;
  Eigen::LDLT<Matrix> ldlt(gram);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0.0).all()) {
    m.coef = ldlt.solve(rhs);
  } else {
    // Rank-deficient least squares: minimum-norm solution.
    m.coef = gram.completeOrthogonalDecomposition().solve(rhs);
  }
  m.intercept = y_mean - x_mean.dot(m.coef);
  return m;
}

}  // namespace dmldeep
