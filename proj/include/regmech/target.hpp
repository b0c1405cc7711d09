#pragma once

#include <atomic>
#include <memory>

#include "regmech/common.hpp"

namespace regmech {

struct Evaluation {
  double log_density = 0.0;
  Vector gradient;
};

/// An unnormalized log density over a flat coordinate vector. Coordinates
/// [simplex_begin(), dim()) hold mixture weights that samplers project back
/// onto the probability simplex after every move.
class LogTarget {
 public:
  virtual ~LogTarget() = default;
  virtual Index dim() const = 0;
  virtual Index simplex_begin() const { return dim(); }
  virtual double log_density(const Vector& x) const = 0;
  virtual Evaluation evaluate(const Vector& x) const = 0;

  Index simplex_size() const { return dim() - simplex_begin(); }
};

/// Multivariate normal target; exact Hessian is -precision.
class GaussianTarget final : public LogTarget {
 public:
  GaussianTarget(Vector mean, const Matrix& covariance);

  Index dim() const override { return mean_.size(); }
  double log_density(const Vector& x) const override;
  Evaluation evaluate(const Vector& x) const override;

  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return cov_; }
  const Matrix& precision() const { return precision_; }

 private:
  Vector mean_;
  Matrix cov_;
  Matrix precision_;
  double log_norm_ = 0.0;
};

/// Forwards to another target and counts calls; used for compute budgets.
class CountingTarget final : public LogTarget {
 public:
  explicit CountingTarget(const LogTarget& inner) : inner_(inner) {}

  Index dim() const override { return inner_.dim(); }
  Index simplex_begin() const override { return inner_.simplex_begin(); }
  double log_density(const Vector& x) const override {
    ++density_calls_;
    return inner_.log_density(x);
  }
  Evaluation evaluate(const Vector& x) const override {
    ++gradient_calls_;
    return inner_.evaluate(x);
  }

  long gradient_calls() const { return gradient_calls_.load(); }
  long density_calls() const { return density_calls_.load(); }

 private:
  const LogTarget& inner_;
  mutable std::atomic<long> gradient_calls_{0};
  mutable std::atomic<long> density_calls_{0};
};

}  // namespace regmech
