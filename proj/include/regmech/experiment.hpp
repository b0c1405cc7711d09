#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "regmech/abc.hpp"
#include "regmech/adjoint.hpp"
#include "regmech/evalkit.hpp"
#include "regmech/mala.hpp"
#include "regmech/network.hpp"
#include "regmech/posterior.hpp"
#include "regmech/sde.hpp"
#include "regmech/table_io.hpp"

namespace regmech {

/// Everything fixed by the network file and the run configuration: the
/// candidate structure, the hidden ground truth and the priors.
struct Problem {
  std::shared_ptr<const NetworkSpec> network;
  MixtureModel structure;  // all 2^C candidates, uniform weights, truth parameters
  MixtureModel truth;      // same candidates, one-hot at the truth mask
  Index truth_index = 0;
  Vector s0;
  PriorSpec prior;
  SimConfig sim;
};

Problem make_problem(std::shared_ptr<const NetworkSpec> network, const SimConfig& sim, double dirichlet_alpha = 1.0);

enum class Method { Mala, AdjointMala, Abc };

std::string to_string(Method m);
Method parse_method(const std::string& s);

struct MethodConfig {
  MalaConfig mala;
  int mala_chains = 4;
  Algorithm1Config adjoint;
  AbcConfig abc;
  WeightParam weights = WeightParam::Projected;
  double jitter = 1e-8;
  int jobs = 1;
};

struct MethodResult {
  Method method = Method::Mala;
  std::vector<ParameterDraw> draws;
  SampleTable table;
  std::vector<SensitivityRecord> records;  // adjoint-MALA only
  /// Compute spent, in gradient evaluations (a Hessian-vector product
  /// counts 2; an ABC proposal counts L_s * substeps).
  long cost = 0;
  std::map<std::string, double> stats;
  std::vector<double> step_trace;
  std::vector<std::string> warnings;
  std::string error;  // non-empty when the run aborted; results are partial
};

/// Draw from the prior in sampler coordinates of `target`.
PriorSampler prior_sampler(const PosteriorTarget& target);

MethodResult run_method(const Problem& problem, const Dataset& data, Method method, const MethodConfig& cfg,
                        std::uint64_t seed);

/// Plain-MALA settings spending `budget` gradient evaluations on
/// ceil(G / B) chains that record B samples spaced Delta, as adjoint-MALA does.
MalaConfig matched_mala(const Algorithm1Config& adjoint, long budget, int* chains, double step);

/// ABC proposals affordable with `budget`.
long matched_abc_proposals(long budget, int sims_per_proposal, int substeps);

/// K-S statistic of each key species between a method's posterior predictive
/// and the reference ensemble. `key_species` maps display labels to species.
std::map<std::string, double> ks_against_reference(const Problem& problem, const MethodResult& result,
                                                   const PredictiveEnsemble& reference,
                                                   const std::vector<std::pair<std::string, std::string>>& key_species,
                                                   int predictive_draws, std::uint64_t seed, int jobs);

/// Thins or cycles the draws to exactly n parameter sets.
std::vector<ParameterDraw> resample_draws(const std::vector<ParameterDraw>& draws, int n);

}  // namespace regmech
