#include <cmath>
#include <sstream>

#include "doctest.h"
#include "regmech/sde.hpp"
#include "support.hpp"

using namespace regmech;
using regmech::testing::parse;

namespace {

// A -> B at constant rate V (no substrate terms).
std::shared_ptr<const NetworkSpec> constant_conversion(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return parse(R"({"name": "ab", "species": ["A", "B"], "constants": {"V": )" + os.str() + R"(},
    "reactions": [{"name": "r", "stoich": {"A": -1, "B": 1}, "rate": {"vmax": "V"}}],
    "initial_state": {"A": 10, "B": 10}})");
}

MixtureModel single(const std::shared_ptr<const NetworkSpec>& net) { return make_mixture(enumerate_candidates(net)); }

// Michaelis-Menten decay A -> 0: Km log(A0/A) + A0 - A = V t, solved for A.
double mm_decay(double a0, double vmax, double km, double t) {
  double a = a0 * std::exp(-vmax * t / (km + a0));
  for (int it = 0; it < 100; ++it) {
    const double g = km * std::log(a0 / a) + a0 - a - vmax * t;
    const double dg = -km / a - 1.0;
    a -= g / dg;
  }
  return a;
}

}  // namespace

TEST_CASE("drift is the stoichiometry column times the flux") {
  const Vector d = drift(Vector::Constant(2, 5.0), single(constant_conversion(1.0)));
  CHECK(d[0] == -1.0);
  CHECK(d[1] == 1.0);
  const Vector z = drift(Vector::Constant(2, 5.0), single(constant_conversion(1e-300)));
  CHECK(z.norm() < 1e-299);
}

TEST_CASE("diffusion covariance of one reaction") {
  const Matrix s = diffusion_cov(Vector::Constant(2, 5.0), single(constant_conversion(2.0)), 0.5);
  Matrix expect(2, 2);
  expect << 1, -1, -1, 1;
  CHECK((s - expect).norm() < 1e-14);
}

TEST_CASE("psd_sqrt examples and asymmetry") {
  CHECK((psd_sqrt(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)).norm() < 1e-14);
  Matrix d = Vector(Eigen::Vector2d(4, 9)).asDiagonal();
  Matrix r = psd_sqrt(d);
  CHECK(r(0, 0) == doctest::Approx(2.0));
  CHECK(r(1, 1) == doctest::Approx(3.0));
  CHECK(std::abs(r(0, 1)) < 1e-14);
  Matrix a(2, 2);
  a << 1, 0.5, 0, 1;
  CHECK_THROWS_AS(psd_sqrt(a), NumericError);
  CHECK((psd_sqrt(Matrix::Zero(2, 2))).norm() == 0.0);
}

TEST_CASE("psd_sqrt on rank-deficient matrices") {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    Matrix g = Matrix::NullaryExpr(6, 3, [&] { return standard_normal(1, rng)[0]; });
    Matrix sigma = g * g.transpose();
    Matrix b = psd_sqrt(sigma);
    CHECK((b * b.transpose() - sigma).norm() / sigma.norm() < 1e-10);
    CHECK((b - b.transpose()).norm() < 1e-10 * b.norm());
  }
}

TEST_CASE("em_step without noise or flux is the identity") {
  auto net = constant_conversion(1e-300);
  Vector s(2);
  s << 3.0, 4.0;
  CHECK((em_step(s, single(net), 0.1, Vector::Zero(2)) - s).norm() < 1e-290);
}

TEST_CASE("deterministic decay follows the Michaelis-Menten solution") {
  auto net = parse(R"({"name": "decay", "species": ["A"], "constants": {"V": 2.0, "Km": 5.0},
    "reactions": [{"name": "r", "stoich": {"A": -1}, "rate": {"vmax": "V", "substrates": {"A": "Km"}}}],
    "initial_state": {"A": 10}})");
  SimConfig cfg;
  cfg.diffusion = false;
  cfg.substeps = 1000;
  cfg.horizon = 3;
  cfg.dt_obs = 1.0;
  const Trajectory tr = simulate(Vector::Constant(1, 10.0), single(net), cfg);
  for (Index h = 0; h <= 3; ++h) {
    const double exact = mm_decay(10.0, 2.0, 5.0, static_cast<double>(h));
    CHECK(std::abs(tr.states(h, 0) - exact) < 1e-3 * exact);
  }

  // Euler error is first order in the substep size.
  auto endpoint = [&](int substeps) {
    SimConfig c = cfg;
    c.substeps = substeps;
    return simulate(Vector::Constant(1, 10.0), single(net), c).states(3, 0);
  };
  const double exact = mm_decay(10.0, 2.0, 5.0, 3.0);
  const double e1 = std::abs(endpoint(20) - exact);
  const double e2 = std::abs(endpoint(40) - exact);
  CHECK(e2 / e1 == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("one-step increments have covariance Sigma") {
  auto net = parse(R"({"name": "three", "species": ["A", "B", "C"], "constants": {"V1": 4.0, "V2": 2.0, "K": 3.0},
    "reactions": [{"name": "r1", "stoich": {"A": -1, "B": 1}, "rate": {"vmax": "V1", "substrates": {"A": "K"}}},
                  {"name": "r2", "stoich": {"B": -1, "C": 2}, "rate": {"vmax": "V2", "substrates": {"B": "K"}}}],
    "initial_state": {"A": 50, "B": 50, "C": 50}})");
  const auto model = single(net);
  const Vector s = Vector::Constant(3, 50.0);
  const double h = 0.25;
  const Matrix sigma = diffusion_cov(s, model, h);
  const int n = 100000;
  Rng rng(77);
  Matrix inc(n, 3);
  for (int i = 0; i < n; ++i)
    inc.row(i) = (em_step(s, model, h, standard_normal(3, rng), false) - s).transpose();
  const Vector mean = inc.colwise().mean();
  const Matrix centred = inc.rowwise() - mean.transpose();
  const Matrix cov = centred.transpose() * centred / (n - 1);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j) {
      const double se = std::sqrt((sigma(i, i) * sigma(j, j) + sigma(i, j) * sigma(i, j)) / n);
      CHECK(std::abs(cov(i, j) - sigma(i, j)) < 3.0 * se + 1e-12);
    }
}

TEST_CASE("floored simulation never goes negative") {
  auto net = parse(R"({"name": "decay", "species": ["A", "B"], "constants": {"V": 5.0, "Km": 0.5},
    "reactions": [{"name": "r", "stoich": {"A": -1, "B": 1}, "rate": {"vmax": "V", "substrates": {"A": "Km"}}}],
    "initial_state": {"A": 3, "B": 0}})");
  SimConfig cfg;
  cfg.horizon = 20;
  cfg.substeps = 5;
  Dataset d = generate_dataset(*net->initial_state, single(net), cfg, 20);
  for (const auto& tr : d.trajectories) CHECK(tr.states.minCoeff() >= 0.0);
}

TEST_CASE("dataset shape and determinism") {
  auto net = constant_conversion(1.0);
  SimConfig cfg;
  cfg.horizon = 72;
  cfg.seed = 9;
  Dataset a = generate_dataset(*net->initial_state, single(net), cfg, 3);
  Dataset b = generate_dataset(*net->initial_state, single(net), cfg, 3, 3);
  REQUIRE(a.size() == 3);
  for (Index i = 0; i < 3; ++i) {
    CHECK(a.trajectories[i].states.rows() == 73);
    CHECK(a.trajectories[i].times[72] == doctest::Approx(72.0));
    CHECK(a.trajectories[i].states == b.trajectories[i].states);
  }
  Dataset prefix = generate_dataset(*net->initial_state, single(net), cfg, 2);
  CHECK(prefix.trajectories[1].states == a.trajectories[1].states);
}

TEST_CASE("invalid simulation config is rejected") {
  SimConfig cfg;
  cfg.substeps = 0;
  CHECK_THROWS(cfg.validate());
  cfg.substeps = 1;
  cfg.dt_obs = 0.0;
  CHECK_THROWS(cfg.validate());
}
