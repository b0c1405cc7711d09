#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "regmech/common.hpp"
#include "regmech/network.hpp"

namespace regmech {

struct SimConfig {
  double dt_obs = 1.0;  // observation spacing (h)
  int substeps = 20;    // Euler-Maruyama steps per observation interval
  int horizon = 72;     // number of transitions H
  std::uint64_t seed = 1;
  bool floor_state = true;
  bool diffusion = true;  // false integrates the drift only

  void validate() const;
};

struct Trajectory {
  Vector times;   // H + 1
  Matrix states;  // (H + 1) x p

  Index num_transitions() const { return states.rows() - 1; }
};

struct Dataset {
  std::vector<std::string> species;
  std::vector<Trajectory> trajectories;
  std::string model_id;
  std::uint64_t seed = 0;

  Index size() const { return static_cast<Index>(trajectories.size()); }
  /// Throws UsageError unless all trajectories share one time grid and width.
  void validate() const;
};

/// N * v(s).
Vector drift(const Vector& state, const MixtureModel& model);

/// N diag(|v|) N^T dt.
Matrix diffusion_cov(const Vector& state, const MixtureModel& model, double dt);

/// Symmetric square root B of a PSD matrix (B B^T = Sigma) from the
/// eigendecomposition, negative eigenvalues clamped to zero.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> psd_sqrt(
    const Eigen::MatrixBase<Derived>& sigma, typename Derived::Scalar sym_tol = 1e-10) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (sigma.rows() != sigma.cols()) throw UsageError("psd_sqrt needs a square matrix");
  const Mat s = sigma;
  const Scalar norm = s.norm();
  const Scalar asym = (s - s.transpose()).norm();
  if (asym > sym_tol * (norm > Scalar(0) ? norm : Scalar(1)))
    throw NumericError("psd_sqrt: matrix is not symmetric (relative asymmetry " +
                       std::to_string(static_cast<double>(asym / norm)) + ")");
  if (norm == Scalar(0)) return Mat::Zero(s.rows(), s.cols());
  Eigen::SelfAdjointEigenSolver<Mat> eig(s);
  if (eig.info() != Eigen::Success) throw NumericError("psd_sqrt: eigendecomposition failed");
  const auto roots = eig.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

/// One Euler-Maruyama step: s + drift h + sqrt(Sigma(s, h)) noise, clamped at
/// zero when `floor_state` is set.
Vector em_step(const Vector& state, const MixtureModel& model, double h, const Vector& noise,
               bool floor_state = true, bool diffusion = true);

Trajectory simulate(const Vector& s0, const MixtureModel& model, const SimConfig& cfg, Rng& rng);
Trajectory simulate(const Vector& s0, const MixtureModel& model, const SimConfig& cfg);

/// State at time t_end (a multiple of cfg.dt_obs is not required).
Vector simulate_endpoint(const Vector& s0, const MixtureModel& model, const SimConfig& cfg, double t_end,
                         Rng& rng);

/// m independent trajectories; trajectory i draws from stream (cfg.seed, i).
Dataset generate_dataset(const Vector& s0, const MixtureModel& truth, const SimConfig& cfg, Index m,
                         int jobs = 1);

}  // namespace regmech
