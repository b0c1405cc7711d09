#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "regmech/experiment.hpp"

namespace regmech::cli {

/// Everything a run needs, parsed from the JSON run-config file.
struct RunConfig {
  std::string network_path;
  std::optional<std::vector<bool>> truth_mask;
  std::map<std::string, double> truth_constants;
  /// name -> (prior_guess, prior_scale) overrides.
  std::map<std::string, std::pair<double, double>> prior_constants;
  double dirichlet = 1.0;

  int m = 3;
  std::string dataset_path;  // optional input for infer
  SimConfig sim;

  Method method = Method::Mala;
  MethodConfig methods;
  /// When set, plain MALA and ABC spend this many gradient evaluations.
  std::optional<long> budget;

  double t_eval = 72.0;
  Index reference_draws = 10000;
  int predictive_draws = 2000;
  std::vector<std::pair<std::string, std::string>> key_species;

  int replications = 1;
  std::uint64_t seed = 1;
  std::string output = "out";
  int jobs = 1;

  /// FNV-1a of the canonical config (jobs and output excluded).
  std::string hash;
};

RunConfig parse_config(const std::string& json_text, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

/// Network with truth and prior overrides applied, then the problem.
Problem build_problem(const RunConfig& cfg);

/// Dataset of replication r: trajectory i draws from stream (seed', i) with
/// seed' derived from (seed, r), so smaller m is a prefix of larger m.
Dataset make_dataset(const Problem& problem, const RunConfig& cfg, int replication);

/// Entry point; returns the process exit code (0 ok, 2 config or usage
/// error, 3 numeric failure, 1 anything else).
int run(int argc, char** argv);

}  // namespace regmech::cli
