#include "doctest.h"
#include "regmech/experiment.hpp"
#include "support.hpp"

using namespace regmech;

namespace {

Problem toy_problem() {
  SimConfig sim;
  sim.horizon = 12;
  sim.substeps = 5;
  return make_problem(regmech::testing::toy_network(), sim);
}

}  // namespace

TEST_CASE("problem layout") {
  const Problem p = toy_problem();
  CHECK(p.structure.num_candidates() == 4);
  CHECK(p.truth_index == 3);
  CHECK(p.truth.weights[3] == 1.0);
  CHECK(p.structure.theta_dim() == 4);
  CHECK(p.prior.log_location.size() == 4);
}

TEST_CASE("methods run and are reproducible") {
  const Problem p = toy_problem();
  SimConfig sim = p.sim;
  sim.seed = 3;
  const Dataset d = generate_dataset(p.s0, p.truth, sim, 2);
  MethodConfig cfg;
  cfg.mala.warmup = 50;
  cfg.mala.samples = 20;
  cfg.mala_chains = 2;
  cfg.adjoint.warmup = 10;
  cfg.adjoint.g_meta = 2;
  cfg.adjoint.replicates = 1;
  cfg.adjoint.total_samples = 6;
  cfg.adjoint.samples_per_chain = 2;
  cfg.adjoint.hessian_stride = 5;
  cfg.abc.proposals = 40;
  cfg.abc.accept_quantile = 0.1;
  for (Method m : {Method::Mala, Method::AdjointMala, Method::Abc}) {
    const MethodResult a = run_method(p, d, m, cfg, 9);
    const MethodResult b = run_method(p, d, m, cfg, 9);
    CHECK(a.error.empty());
    REQUIRE(!a.draws.empty());
    CHECK(a.draws.size() == b.draws.size());
    CHECK(a.draws.back().theta == b.draws.back().theta);
    CHECK(a.cost > 0);
    for (const auto& dr : a.draws) CHECK(std::abs(dr.w.sum() - 1.0) < 1e-12);
  }
  const MethodResult adj = run_method(p, d, Method::AdjointMala, cfg, 9);
  CHECK(adj.records.size() == 2);
  CHECK(adj.draws.size() == 6);
  cfg.weights = WeightParam::Softmax;
  const MethodResult soft = run_method(p, d, Method::Mala, cfg, 9);
  CHECK(soft.draws.size() == 40);
}

TEST_CASE("budget matching") {
  Algorithm1Config a;
  a.total_samples = 100;
  a.samples_per_chain = 3;
  a.thin = 2;
  int chains = 0;
  const MalaConfig m = matched_mala(a, 10000, &chains, 0.1);
  CHECK(chains == 34);
  CHECK(m.samples == 3);
  CHECK(m.thin == 2);
  // Per chain: 1 initial evaluation, warmup, then samples * thin.
  const long spent = static_cast<long>(chains) * (1 + m.warmup + m.samples * m.thin);
  CHECK(spent <= 10000);
  CHECK(spent > 10000 - chains);
  CHECK(matched_abc_proposals(10000, 2, 10) == 500);
  CHECK(matched_abc_proposals(1, 2, 10) == 1);
}

TEST_CASE("resampling draws") {
  std::vector<ParameterDraw> d;
  for (int i = 0; i < 5; ++i) d.push_back({Vector::Constant(1, i), Vector::Constant(1, 1.0)});
  CHECK(resample_draws(d, 12).size() == 12);
  CHECK(resample_draws(d, 3).size() == 3);
  CHECK(resample_draws(d, 5)[4].theta[0] == 4.0);
  CHECK(parse_method("adjoint-mala") == Method::AdjointMala);
  CHECK_THROWS_AS(parse_method("nuts"), UsageError);
}
