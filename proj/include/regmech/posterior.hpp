#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "regmech/common.hpp"
#include "regmech/network.hpp"
#include "regmech/sde.hpp"
#include "regmech/target.hpp"

namespace regmech {

/// Gaussian one-step transition N(mu, sigma).
struct TransitionMoments {
  Vector mu;
  Matrix sigma;
};

/// -1/2 [log det(2 pi Sigma) + r^T Sigma^{-1} r], r = s_next - mu, via a
/// Cholesky factorization of Sigma.
template <typename DerivedV, typename DerivedM, typename DerivedS>
typename DerivedS::Scalar transition_logpdf(const Eigen::MatrixBase<DerivedS>& s_next,
                                            const Eigen::MatrixBase<DerivedV>& mu,
                                            const Eigen::MatrixBase<DerivedM>& sigma) {
  using Scalar = typename DerivedS::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Index n = mu.size();
  if (s_next.size() != n || sigma.rows() != n || sigma.cols() != n)
    throw UsageError("transition_logpdf: dimension mismatch");
  const Mat S = sigma;
  Eigen::LLT<Mat> llt(S);
  if (llt.info() != Eigen::Success) {
    const Vec diag = S.diagonal().cwiseAbs();
    const double ratio = diag.minCoeff() > 0 ? static_cast<double>(diag.maxCoeff() / diag.minCoeff())
                                             : std::numeric_limits<double>::infinity();
    throw NumericError("transition covariance is singular (diagonal ratio " + std::to_string(ratio) + ")");
  }
  const Vec r = s_next - mu;
  const Vec z = llt.matrixL().solve(r);
  const Mat& L = llt.matrixLLT();
  Scalar logdet = 0;
  for (Index i = 0; i < n; ++i) logdet += Scalar(2) * std::log(L(i, i));
  return Scalar(-0.5) * (Scalar(n) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>) + logdet + z.squaredNorm());
}

inline double transition_logpdf(const Vector& s_next, const TransitionMoments& m) {
  return transition_logpdf(s_next, m.mu, m.sigma);
}

/// Independent log-normal priors on every theta entry (parameters of log theta)
/// and a Dirichlet prior on the weights.
struct PriorSpec {
  Vector log_location;
  Vector log_scale;
  Vector dirichlet;

  /// Locations and scales from each constant's prior guess; Dirichlet(alpha, ..., alpha).
  static PriorSpec from_network(const MixtureModel& model, double alpha = 1.0);
  void validate(Index theta_dim, Index num_candidates) const;
};

double log_prior_theta(const PriorSpec& prior, const Vector& theta);
Vector grad_log_prior_theta(const PriorSpec& prior, const Vector& theta);
double log_prior_weights(const PriorSpec& prior, const Vector& w);
Vector grad_log_prior_weights(const PriorSpec& prior, const Vector& w);

struct PriorDraw {
  Vector theta;  // natural scale
  Vector w;
};

/// theta = exp(u), u ~ N(location, scale^2); w ~ Dirichlet via normalized gammas.
PriorDraw draw_prior(const PriorSpec& prior, Rng& rng);

struct PosteriorOptions {
  /// Sigma <- Sigma + jitter * mean(diag Sigma) * I before factorization.
  double jitter = 1e-8;
  /// Trajectories evaluated concurrently; sums are reduced in trajectory order.
  int jobs = 1;
};

struct PosteriorGradient {
  double value = 0.0;
  Vector theta;
  Vector weights;
};

/// Log posterior of the Gaussian-transition model over a fixed dataset.
///
/// When the stoichiometry matrix is rank deficient (conservation relations,
/// or fewer reactions than species), the transition density lives on the
/// affine subspace s + range(N); the density is then evaluated in an
/// orthonormal basis of range(N). For full-row-rank N that basis is the
/// identity and the density is the plain p-dimensional Gaussian.
class PosteriorModel {
 public:
  PosteriorModel(MixtureModel structure, Dataset data, PriorSpec prior, PosteriorOptions options = {});

  const MixtureModel& structure() const { return structure_; }
  const Dataset& data() const { return data_; }
  const PriorSpec& prior() const { return prior_; }
  const PosteriorOptions& options() const { return options_; }
  Index theta_dim() const { return structure_.theta_dim(); }
  Index num_candidates() const { return structure_.num_candidates(); }
  /// Dimension of range(N).
  Index reduced_dim() const { return basis_.cols(); }
  double dt() const { return dt_; }

  TransitionMoments moments(const Vector& state, const MixtureModel& model) const;

  double log_likelihood(const Vector& theta, const Vector& w) const;
  double log_posterior(const Vector& theta, const Vector& w) const;
  PosteriorGradient grad_log_posterior(const Vector& theta, const Vector& w) const;

  /// Same model with a different dataset.
  PosteriorModel with_data(Dataset data) const;

 private:
  double data_term(const Vector& theta, const Vector& w, Vector* g_theta, Vector* g_w) const;
  double trajectory_term(const MixtureModel& model, const Trajectory& tr, Index traj, Vector* g_theta,
                         Vector* g_w) const;

  MixtureModel structure_;
  Dataset data_;
  PriorSpec prior_;
  PosteriorOptions options_;
  Matrix stoich_;    // p x L
  Matrix basis_;     // p x r orthonormal basis of range(N)
  Matrix reduced_;   // r x L, basis^T N
  Vector colnorm_;   // squared column norms of reduced_
  bool identity_basis_ = true;
  double dt_ = 1.0;
};

double log_posterior(const PosteriorModel& model, const Vector& theta, const Vector& w);
PosteriorGradient grad_log_posterior(const PosteriorModel& model, const Vector& theta, const Vector& w);

/// Central difference of the gradient of `target` along `direction`, step
/// 1e-5 (1 + |x|) on the normalized direction.
Vector hessian_vec(const LogTarget& target, const Vector& x, const Vector& direction);

/// Dense Hessian from d Hessian-vector products, symmetrized.
Matrix hessian(const LogTarget& target, const Vector& x);

enum class WeightParam { Projected, Softmax };

/// The posterior in sampler coordinates x = (log theta, weight block).
/// Projected: the weight block is w itself (projected by the sampler); its
/// gradient is the tangential gradient on {sum w = 1}.
/// Softmax: the weight block is eta in R^{K-1}, w = softmax(eta, 0); the
/// density carries the change-of-variables Jacobian so sampling is exact.
class PosteriorTarget final : public LogTarget {
 public:
  PosteriorTarget(const PosteriorModel& model, WeightParam param = WeightParam::Projected);

  Index dim() const override;
  Index simplex_begin() const override;
  double log_density(const Vector& x) const override;
  Evaluation evaluate(const Vector& x) const override;

  const PosteriorModel& model() const { return model_; }
  WeightParam weight_param() const { return param_; }
  Index theta_dim() const { return model_.theta_dim(); }

  Vector theta_of(const Vector& x) const;
  Vector weights_of(const Vector& x) const;
  Vector to_coordinates(const Vector& theta, const Vector& w) const;

 private:
  const PosteriorModel& model_;
  WeightParam param_;
};

}  // namespace regmech
