#include <cmath>

#include "doctest.h"
#include "regmech/network.hpp"
#include "support.hpp"

using namespace regmech;
using regmech::testing::demo_network;
using regmech::testing::parse;

namespace {

const char* kTwoMechanisms = R"({
  "name": "two", "species": ["A", "B", "C"],
  "constants": {"V": 2.0, "Km": 3.0, "Ki": {"value": 4.0, "infer": true}, "Ka": {"value": 5.0, "infer": true}},
  "reactions": [{"name": "r1", "stoich": {"A": -1, "B": 1},
                 "rate": {"vmax": "V", "substrates": {"A": "Km"}}}],
  "mechanisms": [{"name": "M1", "reaction": "r1", "kind": "noncompetitive", "species": "C", "constant": "Ki"},
                 {"name": "M2", "reaction": "r1", "kind": "allosteric", "species": "B", "constant": "Ka"}],
  "initial_state": {"A": 1, "B": 1, "C": 1}})";

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12}); }

}  // namespace

TEST_CASE("enumeration counts and order") {
  auto net = parse(kTwoMechanisms);
  auto none = enumerate_candidates(net, {});
  CHECK(none.size() == 1);
  auto cands = enumerate_candidates(net);
  REQUIRE(cands.size() == 4);
  CHECK(cands[0].mask.to_string() == "00");
  CHECK(cands[3].mask.bits == std::vector<bool>{true, true});
  CHECK(cands[1].mask.bits == std::vector<bool>{true, false});
  for (std::size_t k = 0; k < cands.size(); ++k) CHECK(candidate_index(cands[k].mask) == static_cast<Index>(k));
  CHECK(enumerate_candidates(demo_network()).size() == 16);
}

TEST_CASE("mechanism with unknown species is a spec error") {
  std::string bad = kTwoMechanisms;
  bad.replace(bad.find("\"species\": \"C\""), 14, "\"species\": \"Q\"");
  CHECK_THROWS_AS(parse(bad), SpecError);
}

TEST_CASE("single-substrate rate law") {
  auto net = parse(R"({"name": "mm", "species": ["A", "B"], "constants": {"V": 3.0, "Km": 2.0},
    "reactions": [{"name": "r", "stoich": {"A": -1, "B": 1}, "rate": {"vmax": "V", "substrates": {"A": "Km"}}}],
    "initial_state": {"A": 2, "B": 0}})");
  auto cands = enumerate_candidates(net);
  CHECK(flux_candidate(Vector::Constant(2, 2.0), cands[0])[0] == doctest::Approx(1.5).epsilon(1e-14));
  Vector s(2);
  s << 0.0, 1.0;
  CHECK(std::abs(flux_candidate(s, cands[0])[0]) < 1e-8);
}

TEST_CASE("noncompetitive inhibition halves at s = Ki") {
  auto net = parse(R"({"name": "v2", "species": ["EGLC", "ELAC", "G6P"],
    "constants": {"Vmax": 1.0, "Km_EGLC": 1.0, "Ki_ELACtoHK": {"value": 1.0, "infer": true}},
    "reactions": [{"name": "r2", "stoich": {"EGLC": -1, "G6P": 1},
                   "rate": {"vmax": "Vmax", "substrates": {"EGLC": "Km_EGLC"}}}],
    "mechanisms": [{"name": "R1", "reaction": "r2", "kind": "noncompetitive", "species": "ELAC",
                    "constant": "Ki_ELACtoHK"}],
    "initial_state": {"EGLC": 1, "ELAC": 1, "G6P": 0}})");
  auto cands = enumerate_candidates(net);
  Vector s(3);
  s << 1.0, 1.0, 0.0;
  CHECK(flux_candidate(s, cands[1])[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(flux_candidate(s, cands[0])[0] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("mixture flux is the weighted candidate flux") {
  auto net = parse(kTwoMechanisms);
  auto mix = make_mixture(enumerate_candidates(net));
  Vector s(3);
  s << 2.0, 1.5, 0.7;
  Vector avg = Vector::Zero(1);
  for (const auto& c : mix.candidates) avg += flux_candidate(s, c) / 4.0;
  CHECK(flux_mixture(s, mix)[0] == doctest::Approx(avg[0]).epsilon(1e-14));
  for (Index k = 0; k < 4; ++k) {
    auto hot = make_mixture(enumerate_candidates(net), k);
    CHECK(flux_mixture(s, hot)[0] == doctest::Approx(flux_candidate(s, hot.candidates[k])[0]).epsilon(1e-14));
  }
  auto single = make_mixture(enumerate_candidates(net, {}));
  CHECK(flux_mixture(s, single)[0] == flux_candidate(s, single.candidates[0])[0]);
}

TEST_CASE("mixture flux lies between candidate fluxes") {
  auto net = demo_network();
  auto cands = enumerate_candidates(net);
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Vector s = (standard_normal(net->num_species(), rng).array().abs() * 30.0).matrix();
    Vector w = Vector::NullaryExpr(16, [&] { return uniform01(rng); });
    auto mix = make_mixture(cands);
    mix.weights = w / w.sum();
    const Vector v = flux_mixture(s, mix);
    Matrix all(net->num_reactions(), 16);
    for (Index k = 0; k < 16; ++k) all.col(k) = flux_candidate(s, cands[k]);
    for (Index l = 0; l < v.size(); ++l) {
      CHECK(v[l] >= all.row(l).minCoeff() - 1e-12);
      CHECK(v[l] <= all.row(l).maxCoeff() + 1e-12);
    }
  }
}

TEST_CASE("inhibitors decrease and activators increase the flux") {
  auto net = parse(kTwoMechanisms);
  auto cands = enumerate_candidates(net);
  Vector s(3);
  s << 2.0, 1.0, 1.0;
  Vector t = s;
  t[2] = 3.0;
  CHECK(flux_candidate(t, cands[1])[0] < flux_candidate(s, cands[1])[0]);
  t = s;
  t[1] = 3.0;
  CHECK(flux_candidate(t, cands[2])[0] > flux_candidate(s, cands[2])[0]);
}

TEST_CASE("all-inactive candidate equals the bare model") {
  auto net = demo_network();
  NetworkSpec bare = *net;
  bare.mechanisms.clear();
  bare.truth_mask.reset();
  auto bare_c = enumerate_candidates(std::make_shared<NetworkSpec>(bare));
  auto c0 = enumerate_candidates(net)[0];
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    Vector s = (standard_normal(net->num_species(), rng).array().abs() * 20.0).matrix();
    CHECK((flux_candidate(s, c0) - flux_candidate(s, bare_c[0])).norm() == 0.0);
  }
}

TEST_CASE("activator at zero concentration stays finite") {
  auto net = parse(kTwoMechanisms);
  auto c2 = enumerate_candidates(net)[2];
  Vector s(3);
  s << 2.0, 0.0, 1.0;
  Vector flux;
  Matrix dp, ds;
  flux_candidate_jacobian(s, c2, flux, dp, &ds);
  CHECK(flux.allFinite());
  CHECK(dp.allFinite());
  CHECK(ds.allFinite());
  CHECK(std::abs(flux[0]) < 1e-6);
}

TEST_CASE("Vmax derivative at half saturation") {
  auto net = parse(R"({"name": "mm", "species": ["A"], "constants": {"V": {"value": 3.0, "infer": true}, "Km": 2.0},
    "reactions": [{"name": "r", "stoich": {"A": -1}, "rate": {"vmax": "V", "substrates": {"A": "Km"}}}],
    "initial_state": {"A": 2}})");
  auto mix = make_mixture(enumerate_candidates(net));
  auto d = flux_derivatives(Vector::Constant(1, 2.0), mix);
  CHECK(d.d_theta(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("flux derivatives match central differences") {
  auto net = demo_network();
  auto base = make_mixture(enumerate_candidates(net));
  Rng rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Vector s = (standard_normal(net->num_species(), rng).array().abs() * 30.0 + 0.5).matrix();
    Vector theta = base.theta();
    theta = (theta.array() * (0.5 * standard_normal(theta.size(), rng)).array().exp()).matrix();
    Vector w = Vector::NullaryExpr(base.num_candidates(), [&] { return uniform01(rng) + 0.05; });
    w /= w.sum();
    const auto model = base.with_theta(theta, w);
    const auto d = flux_derivatives(s, model);
    auto fd = [](auto f, double x, double h) { return (f(x + h) - f(x - h)) / (2.0 * h); };
    auto richardson = [&](auto f, double x, double h) { return (4.0 * fd(f, x, h / 2) - fd(f, x, h)) / 3.0; };
    for (Index j = 0; j < s.size(); ++j) {
      const double h = 1e-3 * s[j];
      for (Index l = 0; l < d.d_state.rows(); ++l) {
        auto f = [&](double x) { Vector t = s; t[j] = x; return flux_mixture(t, model)[l]; };
        const double num = richardson(f, s[j], h);
        if (std::abs(num) < 1e-10 && std::abs(d.d_state(l, j)) < 1e-10) continue;
        CHECK(rel_err(d.d_state(l, j), num) < 1e-5);
        ++checked;
      }
    }
    for (Index j = 0; j < theta.size(); ++j) {
      for (Index l = 0; l < d.d_theta.rows(); ++l) {
        auto f = [&](double x) { Vector t = theta; t[j] = x; return flux_mixture(s, base.with_theta(t, w))[l]; };
        const double num = richardson(f, theta[j], 1e-3 * theta[j]);
        if (std::abs(num) < 1e-10 && std::abs(d.d_theta(l, j)) < 1e-10) continue;
        CHECK(rel_err(d.d_theta(l, j), num) < 1e-5);
      }
    }
    for (Index k = 0; k < w.size(); ++k) {
      auto f = [&](double x) { Vector u = w; u[k] = x; return flux_mixture(s, base.with_theta(theta, u)); };
      const Vector num = (f(w[k] + 1e-4) - f(w[k] - 1e-4)) / 2e-4;
      CHECK((d.d_weights.col(k) - num).norm() <= 1e-8 * (1.0 + num.norm()));
    }
  }
  CHECK(checked > 1000);
}
