#include "regmech/experiment.hpp"

#include <algorithm>
#include <cmath>

#include "regmech/parallel.hpp"

namespace regmech {

Problem make_problem(std::shared_ptr<const NetworkSpec> network, const SimConfig& sim, double dirichlet_alpha) {
  if (!network) throw UsageError("problem needs a network");
  sim.validate();
  Problem p;
  p.network = network;
  auto candidates = enumerate_candidates(network);
  MechanismMask mask;
  mask.bits = network->truth_mask ? *network->truth_mask : std::vector<bool>(network->mechanisms.size(), true);
  p.truth_index = candidate_index(mask);
  p.truth = make_mixture(candidates, p.truth_index);
  p.structure = make_mixture(std::move(candidates));
  if (!network->initial_state) throw SpecError("network '" + network->name + "' declares no initial_state");
  p.s0 = *network->initial_state;
  p.prior = PriorSpec::from_network(p.structure, dirichlet_alpha);
  p.sim = sim;
  return p;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Mala: return "mala";
    case Method::AdjointMala: return "adjoint-mala";
    case Method::Abc: return "abc";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "mala") return Method::Mala;
  if (s == "adjoint-mala") return Method::AdjointMala;
  if (s == "abc") return Method::Abc;
  throw UsageError("unknown method '" + s + "' (expected mala, adjoint-mala or abc)");
}

PriorSampler prior_sampler(const PosteriorTarget& target) {
  const PriorSpec& prior = target.model().prior();
  return [&target, prior](Rng& rng) {
    const PriorDraw d = draw_prior(prior, rng);
    return target.to_coordinates(d.theta, d.w);
  };
}

MalaConfig matched_mala(const Algorithm1Config& adjoint, long budget, int* chains, double step) {
  const int c = (adjoint.total_samples + adjoint.samples_per_chain - 1) / adjoint.samples_per_chain;
  if (chains) *chains = c;
  MalaConfig m;
  m.step = step;
  m.samples = adjoint.samples_per_chain;
  m.thin = adjoint.thin;
  const long per_chain = budget / c - 1 - static_cast<long>(m.samples) * m.thin;
  m.warmup = static_cast<int>(std::max(0L, per_chain));
  return m;
}

long matched_abc_proposals(long budget, int sims_per_proposal, int substeps) {
  return std::max(1L, budget / (static_cast<long>(sims_per_proposal) * substeps));
}

namespace {

SampleTable make_table(const MixtureModel& structure) {
  SampleTable t;
  t.theta_names = structure.theta_names();
  t.num_weights = structure.num_candidates();
  return t;
}

void add_sample(MethodResult& r, const PosteriorTarget& target, const PosteriorSample& s) {
  SampleRow row;
  row.chain = s.chain;
  row.iteration = s.iteration;
  row.log_posterior = s.log_density;
  row.accepted = s.accepted;
  row.weight = s.weight;
  row.theta = target.theta_of(s.x);
  row.w = target.weights_of(s.x);
  r.draws.push_back({row.theta, row.w});
  r.table.rows.push_back(std::move(row));
}

MethodResult run_mala(const PosteriorTarget& target, const MethodConfig& cfg, std::uint64_t seed) {
  MethodResult r;
  r.method = Method::Mala;
  r.table = make_table(target.model().structure());
  const auto sampler = prior_sampler(target);
  const auto n = static_cast<std::size_t>(std::max(cfg.mala_chains, 1));
  std::vector<ChainResult> chains(n);
  std::vector<std::string> errors(n);
  parallel_for(n, cfg.jobs, [&](std::size_t c) {
    try {
      Rng init_rng = make_stream(seed, 10, c);
      Rng rng = make_stream(seed, 11, c);
      chains[c] = run_chain(sampler(init_rng), target, cfg.mala, rng, static_cast<int>(c));
    } catch (const std::exception& e) {
      errors[c] = "chain " + std::to_string(c) + ": " + e.what();
    }
  });
  double acc = 0.0, step = 0.0;
  long fallbacks = 0;
  for (std::size_t c = 0; c < n; ++c) {
    if (!errors[c].empty() && r.error.empty()) r.error = errors[c];
    for (const auto& s : chains[c].samples) add_sample(r, target, s);
    r.cost += chains[c].gradient_evaluations;
    acc += chains[c].acceptance_rate;
    step += chains[c].step;
    fallbacks += chains[c].fallbacks;
  }
  if (!chains.empty()) r.step_trace = chains.front().step_trace;
  r.stats["chains"] = static_cast<double>(n);
  r.stats["acceptance_rate"] = acc / static_cast<double>(n);
  r.stats["step"] = step / static_cast<double>(n);
  r.stats["gradient_fallbacks"] = static_cast<double>(fallbacks);
  if (fallbacks > 0) r.warnings.push_back(std::to_string(fallbacks) + " random-walk fallbacks (non-finite gradient)");
  return r;
}

MethodResult run_adjoint(const PosteriorTarget& target, const MethodConfig& cfg, std::uint64_t seed) {
  MethodResult r;
  r.method = Method::AdjointMala;
  r.table = make_table(target.model().structure());
  Algorithm1Config a = cfg.adjoint;
  a.jobs = cfg.jobs;
  Algorithm1Result out = algorithm1(target, prior_sampler(target), a, seed);
  for (const auto& s : out.samples) add_sample(r, target, s);
  r.records = std::move(out.records);
  r.error = out.error;
  const auto& rep = out.report;
  r.cost = rep.stage1_gradient_evaluations + rep.stage2_gradient_evaluations;
  r.stats["stage1_gradient_evaluations"] = static_cast<double>(rep.stage1_gradient_evaluations);
  r.stats["stage2_gradient_evaluations"] = static_cast<double>(rep.stage2_gradient_evaluations);
  r.stats["plain_warmup_iterations"] = static_cast<double>(rep.plain_warmup_iterations);
  r.stats["prediction_fallbacks"] = static_cast<double>(rep.prediction_fallbacks);
  r.stats["acceptance_rate"] = rep.acceptance_rate;
  r.stats["step"] = a.step;
  if (rep.prediction_fallbacks > 0)
    r.warnings.push_back(std::to_string(rep.prediction_fallbacks) +
                         " metamodel predictions had non-finite density; used the nearest endpoint");
  return r;
}

MethodResult run_abc(const Problem& problem, const Dataset& data, const MethodConfig& cfg, std::uint64_t seed) {
  MethodResult r;
  r.method = Method::Abc;
  r.table = make_table(problem.structure);
  AbcConfig a = cfg.abc;
  a.jobs = cfg.jobs;
  const AbcResult out = abc_rejection(problem.prior, problem.structure, data, problem.s0, problem.sim, a, seed);
  for (const auto& s : out.accepted) {
    SampleRow row;
    row.chain = 0;
    row.iteration = s.proposal;
    row.log_posterior = -s.distance;  // ABC has no density; the column carries -distance
    row.accepted = true;
    row.weight = s.weight;
    row.theta = s.theta;
    row.w = s.w;
    r.draws.push_back({s.theta, s.w});
    r.table.rows.push_back(std::move(row));
  }
  r.cost = out.proposals * a.sims_per_proposal * problem.sim.substeps;
  r.stats["proposals"] = static_cast<double>(out.proposals);
  r.stats["accepted"] = static_cast<double>(out.accepted.size());
  r.stats["threshold"] = out.threshold;
  r.stats["failed"] = static_cast<double>(out.failed);
  for (const auto& f : out.failures) r.warnings.push_back("skipped " + f);
  return r;
}

}  // namespace

MethodResult run_method(const Problem& problem, const Dataset& data, Method method, const MethodConfig& cfg,
                        std::uint64_t seed) {
  if (method == Method::Abc) return run_abc(problem, data, cfg, seed);
  PosteriorOptions opts;
  opts.jitter = cfg.jitter;
  opts.jobs = 1;
  const PosteriorModel model(problem.structure, data, problem.prior, opts);
  const PosteriorTarget target(model, cfg.weights);
  return method == Method::Mala ? run_mala(target, cfg, seed) : run_adjoint(target, cfg, seed);
}

std::vector<ParameterDraw> resample_draws(const std::vector<ParameterDraw>& draws, int n) {
  if (draws.empty()) throw UsageError("no posterior draws to resample");
  if (n < 1) throw UsageError("resample size must be >= 1");
  std::vector<ParameterDraw> out;
  out.reserve(static_cast<std::size_t>(n));
  const std::size_t N = draws.size();
  for (int i = 0; i < n; ++i) {
    const std::size_t idx = static_cast<std::size_t>(i) * N / static_cast<std::size_t>(n);
    out.push_back(draws[n >= static_cast<int>(N) ? static_cast<std::size_t>(i) % N : idx]);
  }
  return out;
}

std::map<std::string, double> ks_against_reference(const Problem& problem, const MethodResult& result,
                                                   const PredictiveEnsemble& reference,
                                                   const std::vector<std::pair<std::string, std::string>>& key_species,
                                                   int predictive_draws, std::uint64_t seed, int jobs) {
  const auto draws = resample_draws(result.draws, predictive_draws);
  const PredictiveEnsemble pred =
      posterior_predictive(problem.structure, draws, problem.s0, problem.sim, reference.t_eval, 1, seed, jobs);
  std::map<std::string, double> out;
  for (const auto& [label, species] : key_species) out[label] = ks_statistic(pred.column(species), reference.column(species));
  return out;
}

}  // namespace regmech
