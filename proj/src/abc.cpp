#include "regmech/abc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "regmech/parallel.hpp"

namespace regmech {

std::string to_string(AbcDistance d) {
  return d == AbcDistance::TrajectoryL2 ? "trajectory-l2" : "summary-stat";
}

AbcDistance parse_abc_distance(const std::string& s) {
  if (s == "trajectory-l2") return AbcDistance::TrajectoryL2;
  if (s == "summary-stat") return AbcDistance::SummaryStat;
  throw UsageError("unknown ABC distance '" + s + "' (expected trajectory-l2 or summary-stat)");
}

void AbcConfig::validate() const {
  if (proposals < 1) throw UsageError("ABC needs at least one proposal");
  if (!(accept_quantile > 0.0 && accept_quantile < 1.0)) throw UsageError("ABC accept quantile must lie in (0, 1)");
  if (sims_per_proposal < 1) throw UsageError("ABC needs sims_per_proposal >= 1");
}

long AbcConfig::accepted_count() const {
  return std::min(proposals, static_cast<long>(std::ceil(accept_quantile * static_cast<double>(proposals) - 1e-9)));
}

Vector observed_scale(const Dataset& observed) {
  const Index p = static_cast<Index>(observed.species.size());
  Vector sum = Vector::Zero(p);
  Vector sq = Vector::Zero(p);
  double count = 0.0;
  for (const auto& tr : observed.trajectories) {
    sum += tr.states.colwise().sum().transpose();
    sq += tr.states.array().square().matrix().colwise().sum().transpose();
    count += static_cast<double>(tr.states.rows());
  }
  Vector sd(p);
  for (Index j = 0; j < p; ++j) {
    const double mean = count > 0 ? sum[j] / count : 0.0;
    const double var = count > 1 ? (sq[j] - count * mean * mean) / (count - 1.0) : 0.0;
    sd[j] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return sd;
}

namespace {

void check_grids(const Dataset& a, const Dataset& b) {
  if (a.size() != b.size()) throw UsageError("ABC distance needs equally many trajectories");
  if (a.size() == 0) throw UsageError("ABC distance needs at least one trajectory");
  for (Index i = 0; i < a.size(); ++i) {
    const auto& ta = a.trajectories[i];
    const auto& tb = b.trajectories[i];
    if (ta.states.rows() != tb.states.rows() || ta.states.cols() != tb.states.cols())
      throw UsageError("ABC distance: trajectory shapes differ");
    if ((ta.times - tb.times).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + ta.times.cwiseAbs().maxCoeff()))
      throw UsageError("ABC distance: time grids differ");
  }
}

std::vector<Index> sorted_order(const Dataset& d, const Vector& scale) {
  std::vector<double> key(d.trajectories.size());
  for (std::size_t i = 0; i < key.size(); ++i)
    key[i] = (d.trajectories[i].states.array().rowwise() / scale.transpose().array()).mean();
  std::vector<Index> order(key.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return key[a] < key[b]; });
  return order;
}

Matrix summary(const Dataset& d, const Vector& scale) {
  const Index rows = d.trajectories.front().states.rows();
  const Index p = scale.size();
  Matrix mean = Matrix::Zero(rows, p);
  Matrix sq = Matrix::Zero(rows, p);
  for (const auto& tr : d.trajectories) {
    const Matrix z = (tr.states.array().rowwise() / scale.transpose().array()).matrix();
    mean += z;
    sq += z.cwiseProduct(z);
  }
  const double m = static_cast<double>(d.size());
  mean /= m;
  Matrix sd = (sq / m - mean.cwiseProduct(mean)).cwiseMax(0.0).cwiseSqrt();
  Matrix out(rows, 2 * p);
  out << mean, sd;
  return out;
}

}  // namespace

double abc_distance(const Dataset& observed, const Dataset& simulated, const Vector& scale, AbcDistance kind) {
  check_grids(observed, simulated);
  if (scale.size() != static_cast<Index>(observed.trajectories.front().states.cols()))
    throw UsageError("ABC distance: scale has the wrong length");
  if (kind == AbcDistance::SummaryStat) {
    const Matrix diff = summary(observed, scale) - summary(simulated, scale);
    return std::sqrt(diff.squaredNorm() / static_cast<double>(diff.size()));
  }
  const auto oa = sorted_order(observed, scale);
  const auto ob = sorted_order(simulated, scale);
  double total = 0.0;
  double count = 0.0;
  for (std::size_t i = 0; i < oa.size(); ++i) {
    const Matrix& a = observed.trajectories[oa[i]].states;
    const Matrix& b = simulated.trajectories[ob[i]].states;
    total += ((a - b).array().rowwise() / scale.transpose().array()).square().sum();
    count += static_cast<double>(a.size());
  }
  return std::sqrt(total / count);
}

double abc_distance(const Dataset& observed, const Dataset& simulated, AbcDistance kind) {
  return abc_distance(observed, simulated, observed_scale(observed), kind);
}

AbcResult abc_rejection(const PriorSpec& prior, const MixtureModel& structure, const Dataset& observed,
                        const Vector& s0, const SimConfig& sim, const AbcConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  sim.validate();
  prior.validate(structure.theta_dim(), structure.num_candidates());
  if (observed.size() < 1) throw UsageError("ABC needs observed trajectories");
  const Vector scale = observed_scale(observed);
  SimConfig grid = sim;
  grid.horizon = static_cast<int>(observed.trajectories.front().num_transitions());
  const double obs_dt = observed.trajectories.front().times.size() > 1
                            ? observed.trajectories.front().times[1] - observed.trajectories.front().times[0]
                            : sim.dt_obs;
  grid.dt_obs = obs_dt;

  const auto n = static_cast<std::size_t>(cfg.proposals);
  std::vector<AbcSample> all(n);
  std::vector<std::string> errors(n);
  parallel_for(n, cfg.jobs, [&](std::size_t i) {
    Rng rng = make_stream(seed, i, 0);
    const PriorDraw draw = draw_prior(prior, rng);
    AbcSample& s = all[i];
    s.proposal = static_cast<long>(i);
    s.theta = draw.theta;
    s.w = draw.w;
    try {
      const MixtureModel model = structure.with_theta(draw.theta, draw.w);
      double dist = 0.0;
      for (int r = 0; r < cfg.sims_per_proposal; ++r) {
        SimConfig c = grid;
        c.seed = make_stream(seed, i, 1 + r)();
        const Dataset simulated = generate_dataset(s0, model, c, observed.size(), 1);
        dist += abc_distance(observed, simulated, scale, cfg.distance);
      }
      s.distance = dist / static_cast<double>(cfg.sims_per_proposal);
      if (!std::isfinite(s.distance)) throw NumericError("non-finite distance");
    } catch (const NumericError& e) {
      s.distance = std::numeric_limits<double>::infinity();
      errors[i] = "proposal " + std::to_string(i) + ": " + e.what();
    }
  });

  AbcResult out;
  out.proposals = cfg.proposals;
  for (auto& e : errors)
    if (!e.empty()) {
      ++out.failed;
      out.failures.push_back(std::move(e));
    }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return all[a].distance < all[b].distance; });
  const long keep = cfg.accepted_count();
  for (long j = 0; j < keep; ++j) {
    AbcSample& s = all[order[static_cast<std::size_t>(j)]];
    if (!std::isfinite(s.distance)) break;
    out.accepted.push_back(std::move(s));
  }
  out.threshold = out.accepted.empty() ? std::numeric_limits<double>::infinity() : out.accepted.back().distance;
  return out;
}

}  // namespace regmech
