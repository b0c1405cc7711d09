#include "regmech/target.hpp"

#include <cmath>
#include <numbers>

namespace regmech {

GaussianTarget::GaussianTarget(Vector mean, const Matrix& covariance) : mean_(std::move(mean)), cov_(covariance) {
  if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size())
    throw UsageError("Gaussian target covariance must be d x d");
  Eigen::LLT<Matrix> llt(cov_);
  if (llt.info() != Eigen::Success) throw NumericError("Gaussian target covariance is not positive definite");
  precision_ = llt.solve(Matrix::Identity(mean_.size(), mean_.size()));
  const Matrix& L = llt.matrixLLT();
  double logdet = 0.0;
  for (Index i = 0; i < L.rows(); ++i) logdet += 2.0 * std::log(L(i, i));
  log_norm_ = -0.5 * (static_cast<double>(mean_.size()) * std::log(2.0 * std::numbers::pi) + logdet);
}

double GaussianTarget::log_density(const Vector& x) const {
  const Vector r = x - mean_;
  return log_norm_ - 0.5 * r.dot(precision_ * r);
}

Evaluation GaussianTarget::evaluate(const Vector& x) const {
  const Vector r = x - mean_;
  const Vector pr = precision_ * r;
  return {log_norm_ - 0.5 * r.dot(pr), -pr};
}

}  // namespace regmech
