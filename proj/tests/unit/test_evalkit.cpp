#include <cmath>

#include "doctest.h"
#include "regmech/evalkit.hpp"
#include "regmech/experiment.hpp"
#include "support.hpp"

using namespace regmech;

namespace {

Problem toy_problem() {
  SimConfig sim;
  sim.horizon = 10;
  sim.substeps = 5;
  return make_problem(regmech::testing::toy_network(), sim);
}

// Two-sample critical value at level alpha (asymptotic).
double ks_critical(double n, double m, double alpha) {
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) * std::sqrt((n + m) / (n * m));
}

}  // namespace

TEST_CASE("K-S statistic examples") {
  const std::vector<double> a{1, 2, 3}, b{1.5, 2.5, 3.5}, far{10, 11};
  CHECK(ks_statistic(a, a) == 0.0);
  CHECK(ks_statistic(a, far) == 1.0);
  CHECK(ks_statistic(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(ks_statistic(std::vector<double>{1, 1, 2}, std::vector<double>{1, 2, 2}) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(ks_statistic(std::vector<double>{}, a), UsageError);
}

TEST_CASE("K-S bounds and invariance to monotone transforms") {
  Rng rng(12);
  for (int t = 0; t < 50; ++t) {
    Vector x = standard_normal(30 + t, rng), y = (standard_normal(40, rng).array() + 0.3).matrix();
    const double d = ks_statistic(x, y);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    const Vector ex = x.array().exp(), ey = y.array().exp();
    CHECK(ks_statistic(ex, ey) == d);
  }
}

TEST_CASE("disjoint halves of one ensemble pass the two-sample test") {
  Rng rng(99);
  int passes = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    const Vector z = standard_normal(1000, rng);
    const double d = ks_statistic(z.head(500), z.tail(500));
    passes += d < ks_critical(500, 500, 0.01) ? 1 : 0;
  }
  CHECK(passes >= 0.95 * trials);
}

TEST_CASE("confidence interval arithmetic") {
  const KsSummary s = summarize_ks({0.3, 0.5});
  CHECK(s.mean == doctest::Approx(0.4));
  CHECK(s.sd == doctest::Approx(std::sqrt(0.02)));
  CHECK(s.half_width == doctest::Approx(1.96 * 0.1));
  const KsSummary same = summarize_ks({0.2, 0.2, 0.2});
  CHECK(same.half_width < 1e-15);
}

TEST_CASE("report layout") {
  std::map<KsCell, std::vector<double>> reps;
  for (const char* sp : {"VCD", "GLC", "LAC"})
    for (const char* method : {"abc", "mala", "adjoint-mala"})
      for (int m : {3, 5}) reps[{sp, method, m}] = {0.1 * m, 0.1 * m + 0.02};
  const KsReport r = ks_report(reps, {"VCD", "GLC", "LAC"}, {"adjoint-mala", "mala", "abc"});
  CHECK(r.species == std::vector<std::string>{"VCD", "GLC", "LAC"});
  CHECK(r.methods == std::vector<std::string>{"adjoint-mala", "mala", "abc"});
  CHECK(r.ms == std::vector<int>{3, 5});
  CHECK(r.at("GLC", "mala", 5).mean == doctest::Approx(0.51));
  CHECK_THROWS_AS(r.at("GLC", "mala", 7), UsageError);
  const std::string table = r.to_table();
  CHECK(table.find("VCD") < table.find("GLC"));
  CHECK(table.find("GLC") < table.find("LAC"));
  CHECK(table.find("±") != std::string::npos);
  const std::string csv = r.to_csv();
  CHECK(csv.find("species,method,m,R,mean,sd,half_width") == 0);
}

TEST_CASE("predictive ensembles") {
  Problem p = toy_problem();
  SimConfig still = p.sim;
  still.diffusion = false;
  const std::vector<ParameterDraw> one{{p.truth.theta(), p.truth.weights}};
  const PredictiveEnsemble det = posterior_predictive(p.structure, one, p.s0, still, 10.0, 1, 3);
  CHECK(det.size() == 1);
  const PredictiveEnsemble a = posterior_predictive(p.structure, one, p.s0, p.sim, 10.0, 5, 3);
  const PredictiveEnsemble b = posterior_predictive(p.structure, one, p.s0, p.sim, 10.0, 5, 3, 4);
  CHECK(a.draws == b.draws);
  CHECK(a.size() == 5);
  CHECK_THROWS_AS(posterior_predictive(p.structure, {}, p.s0, p.sim, 10.0, 1, 3), UsageError);
}

TEST_CASE("equal samples reproduce the single-model predictive") {
  Problem p = toy_problem();
  const std::vector<ParameterDraw> same(10000, ParameterDraw{p.truth.theta(), p.truth.weights});
  const PredictiveEnsemble post = posterior_predictive(p.structure, same, p.s0, p.sim, 10.0, 1, 5);
  const PredictiveEnsemble ref = model_predictive(p.truth, p.s0, p.sim, 10.0, 10000, 6);
  for (const auto& sp : p.network->species) CHECK(ks_statistic(post.column(sp), ref.column(sp)) < 0.05);
}
