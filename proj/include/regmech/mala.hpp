#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "regmech/common.hpp"
#include "regmech/target.hpp"

namespace regmech {

/// Euclidean projection onto {w >= 0, sum w = 1} by sort and threshold.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> project_simplex(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Index K = v.size();
  if (K < 1) throw UsageError("project_simplex needs K >= 1");
  Vec sorted = v;
  std::sort(sorted.data(), sorted.data() + K, std::greater<Scalar>());
  Scalar cumsum = 0;
  Scalar tau = 0;
  for (Index j = 0; j < K; ++j) {
    cumsum += sorted[j];
    const Scalar t = (cumsum - Scalar(1)) / Scalar(j + 1);
    if (sorted[j] - t > Scalar(0)) tau = t;
  }
  Vec w = (v.array() - tau).max(Scalar(0)).matrix();
  // Put the rounding residue on the largest coordinate so the sum is 1.
  Index top = 0;
  w.maxCoeff(&top);
  w[top] += Scalar(1) - w.sum();
  if (w[top] < Scalar(0)) w[top] = Scalar(0);
  return w;
}

/// Jacobian of project_simplex at v: orthogonal projection onto
/// {sum = 0} restricted to the coordinates left positive.
Matrix project_simplex_jacobian(const Vector& v);

struct MalaConfig {
  double step = 0.1;
  int warmup = 1000;
  int thin = 1;
  int samples = 1000;
  bool adapt = true;
  double target_accept = 0.574;

  void validate() const;
};

struct ChainState {
  Vector x;
  double log_density = 0.0;
  Vector gradient;
  long iteration = 0;
};

ChainState make_state(const LogTarget& target, const Vector& x, long iteration = 0);

struct Proposal {
  Vector pre_projection;  // x + eps^2/2 grad + eps z
  Vector point;           // after projecting the simplex block
  Evaluation eval;        // target at `point`
  bool gradient_fallback = false;
};

/// Langevin proposal with the given standard-normal noise. A non-finite
/// gradient at the current point zeroes the drift (random-walk fallback).
Proposal propose_with_noise(const ChainState& state, double step, const LogTarget& target, const Vector& noise);
Proposal propose(const ChainState& state, double step, const LogTarget& target, Rng& rng);

/// log q(to | from): Gaussian centred at from + eps^2/2 grad(from), covariance eps^2 I.
double log_proposal_density(const Vector& to, const Vector& from, const Vector& grad_from, double step);

/// Metropolis-Hastings acceptance probability on the log scale, clipped at 0.
/// The forward density is evaluated at the pre-projection point, the
/// reverse density from the projected proposal back to the current point.
double log_acceptance(const ChainState& current, const Proposal& proposal, double step);
double acceptance_prob(const ChainState& current, const Proposal& proposal, double step);

/// Replace the simplex block of x by its projection.
Vector project_block(const LogTarget& target, const Vector& x);

struct PosteriorSample {
  int chain = 0;
  long iteration = 0;
  Vector x;
  double log_density = 0.0;
  bool accepted = false;
  double weight = 1.0;
};

struct ChainResult {
  std::vector<PosteriorSample> samples;
  double acceptance_rate = 0.0;         // over the recording phase
  double warmup_acceptance_rate = 0.0;
  std::vector<double> step_trace;       // step size after each warmup iteration
  double step = 0.0;                    // step used while recording
  long fallbacks = 0;
  long gradient_evaluations = 0;
  ChainState final_state;
};

/// One MALA transition in place; returns whether the proposal was accepted.
bool mala_transition(ChainState& state, double step, const LogTarget& target, Rng& rng, bool* fallback = nullptr,
                     double* accept_prob = nullptr);

/// `warmup` iterations (dual-averaging step adaptation when cfg.adapt),
/// then `samples` recorded states spaced `thin` iterations apart.
ChainResult run_chain(const Vector& init, const LogTarget& target, const MalaConfig& cfg, Rng& rng, int chain_id = 0);

/// Effective sample size from the initial positive sequence estimator.
double effective_sample_size(const std::vector<double>& draws);

}  // namespace regmech
