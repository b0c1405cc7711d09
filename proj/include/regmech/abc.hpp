#pragma once

#include <string>
#include <vector>

#include "regmech/common.hpp"
#include "regmech/network.hpp"
#include "regmech/posterior.hpp"
#include "regmech/sde.hpp"

namespace regmech {

enum class AbcDistance { TrajectoryL2, SummaryStat };

std::string to_string(AbcDistance d);
AbcDistance parse_abc_distance(const std::string& s);

struct AbcConfig {
  long proposals = 1000;
  double accept_quantile = 0.05;
  int sims_per_proposal = 1;  // L_s
  AbcDistance distance = AbcDistance::TrajectoryL2;
  int jobs = 1;

  void validate() const;
  /// ceil(accept_quantile * proposals).
  long accepted_count() const;
};

/// Per-species standard deviation of the observed states over all
/// trajectories and times; zero spreads are replaced by 1.
Vector observed_scale(const Dataset& observed);

/// TrajectoryL2: root-mean-square difference over trajectories, times and
/// species after dividing each species by `scale`. Trajectories of both sets
/// are paired after sorting each set by its mean normalized state, so the
/// value does not depend on trajectory order.
/// SummaryStat: RMS difference of the per-time cross-trajectory mean and
/// standard deviation of each normalized species.
double abc_distance(const Dataset& observed, const Dataset& simulated, const Vector& scale,
                    AbcDistance kind = AbcDistance::TrajectoryL2);
double abc_distance(const Dataset& observed, const Dataset& simulated, AbcDistance kind = AbcDistance::TrajectoryL2);

struct AbcSample {
  long proposal = 0;
  Vector theta;
  Vector w;
  double distance = 0.0;
  double weight = 1.0;
};

struct AbcResult {
  std::vector<AbcSample> accepted;  // sorted by distance, ties by proposal index
  double threshold = 0.0;           // largest accepted distance
  long proposals = 0;
  long failed = 0;                  // proposals whose simulation failed
  std::vector<std::string> failures;
};

/// Rejection ABC. Proposal i draws (theta, w) from stream (seed, i, 0) and
/// simulates L_s datasets of the observed size on stream (seed, i, 1 + r).
AbcResult abc_rejection(const PriorSpec& prior, const MixtureModel& structure, const Dataset& observed,
                        const Vector& s0, const SimConfig& sim, const AbcConfig& cfg, std::uint64_t seed);

}  // namespace regmech
