#include <cmath>

#include "doctest.h"
#include "regmech/abc.hpp"
#include "regmech/experiment.hpp"
#include "support.hpp"

using namespace regmech;

namespace {

Dataset make_data(Index m, Index rows, Index p, Rng& rng) {
  Dataset d;
  for (Index j = 0; j < p; ++j) d.species.push_back("S" + std::to_string(j));
  for (Index i = 0; i < m; ++i) {
    Trajectory t;
    t.times = Vector::LinSpaced(rows, 0.0, static_cast<double>(rows - 1));
    t.states = (Matrix::Random(rows, p).array() + 2.0).matrix() * (1.0 + static_cast<double>(rng() % 5));
    d.trajectories.push_back(t);
  }
  return d;
}

Problem toy_problem() {
  SimConfig sim;
  sim.horizon = 10;
  sim.substeps = 5;
  return make_problem(regmech::testing::toy_network(), sim);
}

}  // namespace

TEST_CASE("distance is a pseudometric and order-invariant") {
  Rng rng(3);
  const Dataset a = make_data(4, 6, 3, rng);
  const Dataset b = make_data(4, 6, 3, rng);
  for (AbcDistance kind : {AbcDistance::TrajectoryL2, AbcDistance::SummaryStat}) {
    CHECK(abc_distance(a, a, kind) == 0.0);
    const Vector scale = observed_scale(a);
    CHECK(abc_distance(a, b, scale, kind) >= 0.0);
    CHECK(abc_distance(a, b, scale, kind) == doctest::Approx(abc_distance(b, a, scale, kind)).epsilon(1e-14));
    Dataset shuffled = b;
    std::swap(shuffled.trajectories[0], shuffled.trajectories[3]);
    std::swap(shuffled.trajectories[1], shuffled.trajectories[2]);
    CHECK(abc_distance(a, shuffled, scale, kind) == doctest::Approx(abc_distance(a, b, scale, kind)).epsilon(1e-14));
  }
}

TEST_CASE("constant offset on one species") {
  Rng rng(5);
  const Dataset a = make_data(3, 5, 4, rng);
  const Vector scale = observed_scale(a);
  Dataset b = a;
  const double c = 0.7;
  for (auto& t : b.trajectories) t.states.col(2).array() += c * scale[2];
  CHECK(abc_distance(a, b, scale) == doctest::Approx(c * std::sqrt(0.25)).epsilon(1e-12));
}

TEST_CASE("grid mismatch is a usage error") {
  Rng rng(1);
  const Dataset a = make_data(2, 5, 2, rng);
  Dataset b = a;
  b.trajectories[0].times[1] += 0.5;
  CHECK_THROWS_AS(abc_distance(a, b), UsageError);
  Dataset c = a;
  c.trajectories.pop_back();
  CHECK_THROWS_AS(abc_distance(a, c), UsageError);
}

TEST_CASE("accepted count is the quantile ceiling") {
  AbcConfig cfg;
  for (long n : {1L, 7L, 100L, 1001L})
    for (double q : {0.01, 0.05, 0.33, 0.5}) {
      cfg.proposals = n;
      cfg.accept_quantile = q;
      CHECK(cfg.accepted_count() == std::min(n, static_cast<long>(std::ceil(q * static_cast<double>(n) - 1e-9))));
    }
  cfg.accept_quantile = 1.0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
}

TEST_CASE("rejection ABC is deterministic and keeps the closest proposals") {
  Problem p = toy_problem();
  SimConfig sim = p.sim;
  sim.seed = 2;
  const Dataset obs = generate_dataset(p.s0, p.truth, sim, 2);
  AbcConfig cfg;
  cfg.proposals = 60;
  cfg.accept_quantile = 0.1;
  const AbcResult a = abc_rejection(p.prior, p.structure, obs, p.s0, p.sim, cfg, 17);
  cfg.jobs = 3;
  const AbcResult b = abc_rejection(p.prior, p.structure, obs, p.s0, p.sim, cfg, 17);
  REQUIRE(a.accepted.size() == 6);
  for (std::size_t i = 0; i < a.accepted.size(); ++i) {
    CHECK(a.accepted[i].proposal == b.accepted[i].proposal);
    CHECK(a.accepted[i].distance == b.accepted[i].distance);
    if (i > 0) CHECK(a.accepted[i - 1].distance <= a.accepted[i].distance);
    CHECK(std::abs(a.accepted[i].w.sum() - 1.0) < 1e-12);
  }
  CHECK(a.threshold == a.accepted.back().distance);
}

TEST_CASE("accept-almost-all returns prior draws") {
  Problem p = toy_problem();
  SimConfig sim = p.sim;
  const Dataset obs = generate_dataset(p.s0, p.truth, sim, 1);
  AbcConfig cfg;
  cfg.proposals = 400;
  cfg.accept_quantile = 0.999;
  const AbcResult r = abc_rejection(p.prior, p.structure, obs, p.s0, p.sim, cfg, 4);
  CHECK(r.accepted.size() == 400);
  // Log-theta of accepted draws keeps the prior mean and spread.
  const Index j = 0;
  double mean = 0.0, sq = 0.0;
  for (const auto& s : r.accepted) {
    const double u = std::log(s.theta[j]);
    mean += u;
    sq += u * u;
  }
  mean /= 400.0;
  const double sd = std::sqrt(sq / 400.0 - mean * mean);
  CHECK(std::abs(mean - p.prior.log_location[j]) < 4.0 * p.prior.log_scale[j] / 20.0);
  CHECK(sd == doctest::Approx(p.prior.log_scale[j]).epsilon(0.2));
}
