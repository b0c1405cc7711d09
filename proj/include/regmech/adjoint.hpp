#pragma once

#include <functional>
#include <string>
#include <vector>

#include "regmech/common.hpp"
#include "regmech/mala.hpp"
#include "regmech/target.hpp"

namespace regmech {

/// A realized run of the Metropolis-adjusted Langevin flow. Replaying the
/// stored noise and uniforms from states.front() reproduces it exactly.
struct FlowPath {
  double step = 0.0;
  std::vector<Vector> states;          // T + 1 points
  std::vector<Vector> noise;           // T standard-normal draws
  std::vector<double> uniforms;        // T acceptance uniforms
  std::vector<Vector> pre_projection;  // T proposals before the simplex projection
  std::vector<bool> accepted;          // T decisions

  int length() const { return static_cast<int>(noise.size()); }
  const Vector& endpoint() const { return states.back(); }
};

struct FlowOptions {
  bool noise = true;       // false: z = 0 (deterministic gradient flow)
  bool metropolis = true;  // false: every proposal is kept
};

FlowPath forward_flow(const Vector& x0, const LogTarget& target, double step, int T, Rng& rng,
                      const FlowOptions& opts = {});

/// Re-runs the flow from x0 with stored noise and uniforms (common random numbers).
FlowPath replay_flow(const Vector& x0, const LogTarget& target, double step, const std::vector<Vector>& noise,
                     const std::vector<double>& uniforms, const FlowOptions& opts = {});

struct InverseFlow {
  std::vector<Vector> states;  // reconstructed x_0 ... x_T
  double max_deviation = 0.0;  // against the stored path
};

/// Integrates the flow backwards from the endpoint with the stored noise,
/// inverting each accepted step x' = x + eps^2/2 grad(x) + eps z by fixed-point
/// iteration. Throws NumericError when a reconstructed state departs from the
/// stored path by more than tol (1 + |x_0|).
InverseFlow inverse_flow(const FlowPath& path, const LogTarget& target, double tol = 1e-6);

/// J_{0,T} = d x_T / d x_0 along the realized path, accumulated backwards from
/// A_{T,T} = I: A <- A (I + eps^2/2 H(x_tau)) for accepted steps (with the
/// simplex projection Jacobian when the weight block is present) and A
/// unchanged for rejected ones. The Hessian is refreshed every
/// `hessian_stride` accepted steps. The states x_tau are the recorded ones,
/// or the inverse-flow reconstruction when `reconstruct` is set (same points
/// to within the inverse-flow tolerance, at the cost of the implicit solves).
Matrix pathwise_jacobian(const FlowPath& path, const LogTarget& target, int hessian_stride = 1,
                         bool reconstruct = false);

struct SensitivityRecord {
  Vector x0;
  Vector xT;  // mean endpoint over the replicates
  Matrix J;   // mean pathwise Jacobian
  int n = 1;
  Matrix J_stddev;  // entrywise standard deviation over replicates (not persisted)
};

SensitivityRecord estimate_EJ(const Vector& x0, const LogTarget& target, double step, int T, int n, std::uint64_t seed,
                              int hessian_stride = 1, const FlowOptions& opts = {}, bool reconstruct = false);

/// Index of the record whose x0 is nearest to `query` (first on ties).
Index nearest_record(const std::vector<SensitivityRecord>& training, const Vector& query);

/// x_T of the nearest record plus its Jacobian applied to the offset,
/// simplex block re-projected for coordinates at or after simplex_begin.
Vector metamodel_predict(const std::vector<SensitivityRecord>& training, const Vector& query,
                         Index simplex_begin = -1);

using PriorSampler = std::function<Vector(Rng&)>;

struct Algorithm1Config {
  double step = 0.05;
  int warmup = 200;       // T
  int replicates = 8;     // n
  int g_meta = 32;
  int total_samples = 2000;  // G
  int thin = 1;              // Delta
  int samples_per_chain = 1; // B
  int hessian_stride = 1;
  bool reconstruct = false;  // run the inverse flow for every Stage-1 path
  int jobs = 1;

  void validate() const;
};

struct Algorithm1Report {
  long stage1_gradient_evaluations = 0;
  long stage2_gradient_evaluations = 0;
  /// Iterations plain MALA would spend on warmup for the same chains.
  long plain_warmup_iterations = 0;
  long prediction_fallbacks = 0;
  double stage1_seconds = 0.0;
  double stage2_seconds = 0.0;
  double acceptance_rate = 0.0;
};

struct Algorithm1Result {
  std::vector<SensitivityRecord> records;
  std::vector<Vector> warm_starts;
  std::vector<PosteriorSample> samples;
  Algorithm1Report report;
  std::string error;  // non-empty when a stage aborted; results are partial
};

/// Stage 1 only: G_meta prior draws, each with n replicate flows of length T.
std::vector<SensitivityRecord> build_sensitivity_records(const LogTarget& target, const PriorSampler& prior,
                                                         const Algorithm1Config& cfg, std::uint64_t seed,
                                                         long* gradient_evaluations = nullptr);

/// Stage 2 only: ceil(G/B) chains warm-started from the metamodel.
Algorithm1Result run_warm_started(const LogTarget& target, const PriorSampler& prior,
                                  std::vector<SensitivityRecord> records, const Algorithm1Config& cfg,
                                  std::uint64_t seed);

Algorithm1Result algorithm1(const LogTarget& target, const PriorSampler& prior, const Algorithm1Config& cfg,
                            std::uint64_t seed);

}  // namespace regmech
