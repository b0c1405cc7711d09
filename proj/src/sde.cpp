#include "regmech/sde.hpp"

#include "regmech/parallel.hpp"

namespace regmech {

void SimConfig::validate() const {
  if (!(dt_obs > 0.0)) throw UsageError("dt_obs must be positive");
  if (substeps < 1) throw UsageError("substeps must be >= 1");
  if (horizon < 1) throw UsageError("horizon must be >= 1");
}

void Dataset::validate() const {
  if (trajectories.empty()) return;
  const auto& ref = trajectories.front();
  for (const auto& tr : trajectories) {
    if (tr.states.cols() != static_cast<Index>(species.size()))
      throw UsageError("trajectory width does not match the species list");
    if (tr.times.size() != ref.times.size() || tr.states.rows() != tr.times.size())
      throw UsageError("trajectories do not share one time grid");
    if ((tr.times - ref.times).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + ref.times.cwiseAbs().maxCoeff()))
      throw UsageError("trajectories do not share one time grid");
  }
}

Vector drift(const Vector& state, const MixtureModel& model) {
  return model.network().stoich_real() * flux_mixture(state, model);
}

Matrix diffusion_cov(const Vector& state, const MixtureModel& model, double dt) {
  const Matrix N = model.network().stoich_real();
  const Vector v = flux_mixture(state, model).cwiseAbs();
  Matrix sigma = N * (v * dt).asDiagonal() * N.transpose();
  // N D N^T is symmetric in exact arithmetic; make it so bitwise.
  return 0.5 * (sigma + sigma.transpose());
}

namespace {

Vector step_with(const Vector& state, const Matrix& N, const Vector& flux, double h, const Vector& noise,
                 bool floor_state, bool diffusion) {
  Vector next = state + N * flux * h;
  if (diffusion) {
    Matrix sigma = N * (flux.cwiseAbs() * h).asDiagonal() * N.transpose();
    sigma = 0.5 * (sigma + sigma.transpose());
    next += psd_sqrt(sigma) * noise;
  }
  if (floor_state) next = next.cwiseMax(0.0);
  return next;
}

}  // namespace

Vector em_step(const Vector& state, const MixtureModel& model, double h, const Vector& noise, bool floor_state,
               bool diffusion) {
  if (!(h > 0.0)) throw UsageError("em_step needs h > 0");
  if (noise.size() != state.size()) throw UsageError("noise dimension must equal state dimension");
  return step_with(state, model.network().stoich_real(), flux_mixture(state, model), h, noise, floor_state,
                   diffusion);
}

namespace {

void advance(Vector& s, const Matrix& N, const MixtureModel& model, double h, int steps, bool floor_state,
             bool diffusion, Rng& rng, long step_base) {
  const Index p = s.size();
  for (int j = 0; j < steps; ++j) {
    const Vector noise = diffusion ? standard_normal(p, rng) : Vector::Zero(p);
    s = step_with(s, N, flux_mixture(s, model), h, noise, floor_state, diffusion);
    if (!s.allFinite()) throw SimulationError("simulation produced a non-finite state", step_base + j);
  }
}

}  // namespace

Trajectory simulate(const Vector& s0, const MixtureModel& model, const SimConfig& cfg, Rng& rng) {
  cfg.validate();
  const Index p = model.network().num_species();
  if (s0.size() != p) throw UsageError("initial state dimension mismatch");
  if ((s0.array() < 0.0).any()) throw UsageError("initial state must be nonnegative");
  const Matrix N = model.network().stoich_real();
  const double h = cfg.dt_obs / cfg.substeps;
  Trajectory tr;
  tr.times.resize(cfg.horizon + 1);
  tr.states.resize(cfg.horizon + 1, p);
  Vector s = s0;
  tr.times[0] = 0.0;
  tr.states.row(0) = s.transpose();
  for (int t = 1; t <= cfg.horizon; ++t) {
    advance(s, N, model, h, cfg.substeps, cfg.floor_state, cfg.diffusion, rng,
            static_cast<long>(t - 1) * cfg.substeps);
    tr.times[t] = t * cfg.dt_obs;
    tr.states.row(t) = s.transpose();
  }
  return tr;
}

Trajectory simulate(const Vector& s0, const MixtureModel& model, const SimConfig& cfg) {
  Rng rng = make_stream(cfg.seed, 0);
  return simulate(s0, model, cfg, rng);
}

Vector simulate_endpoint(const Vector& s0, const MixtureModel& model, const SimConfig& cfg, double t_end,
                         Rng& rng) {
  cfg.validate();
  if (!(t_end >= 0.0)) throw UsageError("t_end must be nonnegative");
  const Matrix N = model.network().stoich_real();
  const double h = cfg.dt_obs / cfg.substeps;
  const int steps = static_cast<int>(std::llround(t_end / h));
  Vector s = s0;
  advance(s, N, model, h, steps, cfg.floor_state, cfg.diffusion, rng, 0);
  return s;
}

Dataset generate_dataset(const Vector& s0, const MixtureModel& truth, const SimConfig& cfg, Index m, int jobs) {
  if (m < 0) throw UsageError("dataset size must be nonnegative");
  Dataset ds;
  ds.species = truth.network().species;
  ds.seed = cfg.seed;
  std::string id = truth.network().name + ":";
  for (Index k = 0; k < truth.num_candidates(); ++k)
    if (truth.weights[k] > 0.0) id += truth.candidates[k].mask.to_string() + (truth.weights[k] < 1.0 ? "~" : "");
  ds.model_id = id;
  ds.trajectories.resize(static_cast<std::size_t>(m));
  parallel_for(static_cast<std::size_t>(m), jobs, [&](std::size_t i) {
    Rng rng = make_stream(cfg.seed, i);
    ds.trajectories[i] = simulate(s0, truth, cfg, rng);
  });
  return ds;
}

}  // namespace regmech
