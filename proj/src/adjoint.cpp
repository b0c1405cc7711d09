#include "regmech/adjoint.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "regmech/parallel.hpp"
#include "regmech/posterior.hpp"

namespace regmech {

namespace {

Vector drift_gradient(const Vector& g) {
  return g.allFinite() ? g : Vector::Zero(g.size());
}

// One flow step from `state` with the given noise and uniform; appends to path.
void flow_step(ChainState& state, double step, const LogTarget& target, const Vector& z, double u,
               const FlowOptions& opts, FlowPath& path) {
  Proposal p = propose_with_noise(state, step, target, z);
  bool accept = true;
  if (opts.metropolis) accept = std::log(u) < log_acceptance(state, p, step);
  else accept = std::isfinite(p.eval.log_density);
  path.noise.push_back(z);
  path.uniforms.push_back(u);
  path.pre_projection.push_back(p.pre_projection);
  path.accepted.push_back(accept);
  ++state.iteration;
  if (accept) {
    state.x = std::move(p.point);
    state.log_density = p.eval.log_density;
    state.gradient = std::move(p.eval.gradient);
  }
  path.states.push_back(state.x);
}

FlowPath start_path(double step, const ChainState& s, int T) {
  FlowPath path;
  path.step = step;
  path.states.reserve(static_cast<std::size_t>(T) + 1);
  path.states.push_back(s.x);
  return path;
}

Matrix step_jacobian(const LogTarget& target, const Vector& pre, const Matrix& I_plus_cH) {
  const Index b = target.simplex_begin();
  const Index d = target.dim();
  if (b >= d) return I_plus_cH;
  Matrix D = Matrix::Identity(d, d);
  D.bottomRightCorner(d - b, d - b) = project_simplex_jacobian(pre.tail(d - b));
  return D * I_plus_cH;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

FlowPath forward_flow(const Vector& x0, const LogTarget& target, double step, int T, Rng& rng,
                      const FlowOptions& opts) {
  if (T < 0) throw UsageError("flow length must be >= 0");
  if (!(step > 0.0)) throw UsageError("flow step must be positive");
  ChainState state = make_state(target, x0);
  FlowPath path = start_path(step, state, T);
  for (int t = 0; t < T; ++t) {
    Vector z = opts.noise ? standard_normal(target.dim(), rng) : Vector::Zero(target.dim());
    const double u = uniform01(rng);
    flow_step(state, step, target, z, u, opts, path);
  }
  return path;
}

FlowPath replay_flow(const Vector& x0, const LogTarget& target, double step, const std::vector<Vector>& noise,
                     const std::vector<double>& uniforms, const FlowOptions& opts) {
  if (noise.size() != uniforms.size()) throw UsageError("replay needs one uniform per noise draw");
  ChainState state = make_state(target, x0);
  FlowPath path = start_path(step, state, static_cast<int>(noise.size()));
  for (std::size_t t = 0; t < noise.size(); ++t) flow_step(state, step, target, noise[t], uniforms[t], opts, path);
  return path;
}

InverseFlow inverse_flow(const FlowPath& path, const LogTarget& target, double tol) {
  const int T = path.length();
  if (path.states.size() != static_cast<std::size_t>(T) + 1) throw UsageError("flow path is incomplete");
  const double eps = path.step;
  const double c = 0.5 * eps * eps;
  const Index b = target.simplex_begin();
  const Index d = target.dim();

  InverseFlow out;
  out.states.assign(static_cast<std::size_t>(T) + 1, Vector());
  out.states[T] = path.states[T];
  for (int t = T - 1; t >= 0; --t) {
    const Vector& next = out.states[t + 1];
    if (!path.accepted[t]) {
      out.states[t] = next;
      continue;
    }
    // The projection discards the pre-projection weight block, so it is taken
    // from the stored path; the theta block is the reconstructed state.
    Vector y = next;
    if (b < d) y.tail(d - b) = path.pre_projection[t].tail(d - b);
    const Vector base = y - eps * path.noise[t];
    Vector x = base - c * drift_gradient(target.evaluate(y).gradient);
    for (int it = 0; it < 200; ++it) {
      const Vector x_new = base - c * drift_gradient(target.evaluate(x).gradient);
      const double change = (x_new - x).norm();
      x = x_new;
      if (change <= 1e-13 * (1.0 + x.norm())) break;
    }
    out.states[t] = std::move(x);
  }
  for (int t = 0; t <= T; ++t)
    out.max_deviation = std::max(out.max_deviation, (out.states[t] - path.states[t]).norm());
  const double bound = tol * (1.0 + path.states.front().norm());
  if (!(out.max_deviation <= bound))
    throw NumericError("inverse flow drifted from the stored path (max deviation " +
                       std::to_string(out.max_deviation) + ", bound " + std::to_string(bound) + ")");
  return out;
}

Matrix pathwise_jacobian(const FlowPath& path, const LogTarget& target, int hessian_stride, bool reconstruct) {
  if (hessian_stride < 1) throw UsageError("hessian stride must be >= 1");
  const int T = path.length();
  const Index d = target.dim();
  const double c = 0.5 * path.step * path.step;
  Matrix A = Matrix::Identity(d, d);
  if (T == 0) return A;
  const std::vector<Vector> states = reconstruct ? inverse_flow(path, target).states : path.states;
  Matrix H;
  int since_refresh = 0;
  for (int t = T - 1; t >= 0; --t) {
    if (!path.accepted[t]) continue;
    if (H.size() == 0 || since_refresh >= hessian_stride) {
      H = hessian(target, states[t]);
      since_refresh = 0;
    }
    ++since_refresh;
    const Matrix M = Matrix::Identity(d, d) + c * H;
    A = A * step_jacobian(target, path.pre_projection[t], M);
  }
  return A;
}

SensitivityRecord estimate_EJ(const Vector& x0, const LogTarget& target, double step, int T, int n,
                              std::uint64_t seed, int hessian_stride, const FlowOptions& opts, bool reconstruct) {
  if (n < 1) throw UsageError("estimate_EJ needs n >= 1");
  const Index d = target.dim();
  SensitivityRecord rec;
  rec.x0 = project_block(target, x0);
  rec.n = n;
  rec.xT = Vector::Zero(d);
  rec.J = Matrix::Zero(d, d);
  Matrix sq = Matrix::Zero(d, d);
  for (int j = 0; j < n; ++j) {
    Rng rng = make_stream(seed, j);
    const FlowPath path = forward_flow(rec.x0, target, step, T, rng, opts);
    const Matrix J = pathwise_jacobian(path, target, hessian_stride, reconstruct);
    if (!J.allFinite()) throw NumericError("pathwise Jacobian is not finite (replicate " + std::to_string(j) + ")");
    rec.xT += path.endpoint();
    rec.J += J;
    sq += J.cwiseProduct(J);
  }
  const double inv = 1.0 / static_cast<double>(n);
  rec.xT *= inv;
  rec.J *= inv;
  rec.J_stddev = (sq * inv - rec.J.cwiseProduct(rec.J)).cwiseMax(0.0).cwiseSqrt();
  // Averaging keeps each replicate on the simplex, but not bit-exactly.
  const Index b = target.simplex_begin();
  if (b < d) rec.xT.tail(d - b) = project_simplex(rec.xT.tail(d - b));
  return rec;
}

Index nearest_record(const std::vector<SensitivityRecord>& training, const Vector& query) {
  if (training.empty()) throw UsageError("metamodel has no training records");
  Index best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < training.size(); ++g) {
    if (training[g].x0.size() != query.size()) throw UsageError("metamodel query has the wrong dimension");
    const double dist = (training[g].x0 - query).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = static_cast<Index>(g);
    }
  }
  return best;
}

Vector metamodel_predict(const std::vector<SensitivityRecord>& training, const Vector& query, Index simplex_begin) {
  const SensitivityRecord& rec = training[static_cast<std::size_t>(nearest_record(training, query))];
  Vector out = rec.xT + rec.J * (query - rec.x0);
  const Index d = out.size();
  if (simplex_begin >= 0 && simplex_begin < d) out.tail(d - simplex_begin) = project_simplex(out.tail(d - simplex_begin));
  return out;
}

void Algorithm1Config::validate() const {
  if (!(step > 0.0)) throw UsageError("adjoint-MALA step must be positive");
  if (warmup < 0) throw UsageError("adjoint-MALA warmup T must be >= 0");
  if (replicates < 1 || g_meta < 1 || total_samples < 1 || thin < 1 || samples_per_chain < 1)
    throw UsageError("adjoint-MALA counts n, G_meta, G, Delta, B must be >= 1");
  if (hessian_stride < 1) throw UsageError("hessian stride must be >= 1");
}

std::vector<SensitivityRecord> build_sensitivity_records(const LogTarget& target, const PriorSampler& prior,
                                                         const Algorithm1Config& cfg, std::uint64_t seed,
                                                         long* gradient_evaluations) {
  cfg.validate();
  std::vector<SensitivityRecord> records(static_cast<std::size_t>(cfg.g_meta));
  std::vector<long> evals(records.size(), 0);
  parallel_for(records.size(), cfg.jobs, [&](std::size_t g) {
    Rng prior_rng = make_stream(seed, 1, g);
    const Vector x0 = prior(prior_rng);
    const std::uint64_t flow_seed = make_stream(seed, 2, g)();
    const CountingTarget counted(target);
    records[g] = estimate_EJ(x0, counted, cfg.step, cfg.warmup, cfg.replicates, flow_seed, cfg.hessian_stride, {},
                             cfg.reconstruct);
    evals[g] = counted.gradient_calls();
  });
  if (gradient_evaluations) {
    *gradient_evaluations = 0;
    for (long e : evals) *gradient_evaluations += e;
  }
  return records;
}

Algorithm1Result run_warm_started(const LogTarget& target, const PriorSampler& prior,
                                  std::vector<SensitivityRecord> records, const Algorithm1Config& cfg,
                                  std::uint64_t seed) {
  cfg.validate();
  Algorithm1Result out;
  out.records = std::move(records);
  const auto t0 = std::chrono::steady_clock::now();
  const int chains = (cfg.total_samples + cfg.samples_per_chain - 1) / cfg.samples_per_chain;
  out.warm_starts.assign(static_cast<std::size_t>(chains), Vector());
  std::vector<std::vector<PosteriorSample>> per_chain(static_cast<std::size_t>(chains));
  std::vector<long> evals(per_chain.size(), 0);
  std::vector<long> accepts(per_chain.size(), 0);
  std::vector<char> fallback(per_chain.size(), 0);
  std::vector<std::string> errors(per_chain.size());

  parallel_for(per_chain.size(), cfg.jobs, [&](std::size_t g) {
    try {
      Rng prior_rng = make_stream(seed, 3, g);
      const Vector x0 = prior(prior_rng);
      const CountingTarget counted(target);
      Vector start = metamodel_predict(out.records, x0, target.simplex_begin());
      ChainState state;
      bool ok = start.allFinite();
      if (ok) {
        try {
          state = make_state(counted, start);
        } catch (const NumericError&) {
          ok = false;
        }
      }
      if (!ok) {
        fallback[g] = 1;
        start = out.records[static_cast<std::size_t>(nearest_record(out.records, x0))].xT;
        state = make_state(counted, start);
      }
      out.warm_starts[g] = state.x;
      Rng rng = make_stream(seed, 4, g);
      for (int b = 0; b < cfg.samples_per_chain; ++b) {
        bool last = false;
        for (int j = 0; j < cfg.thin; ++j) {
          last = mala_transition(state, cfg.step, counted, rng);
          accepts[g] += last ? 1 : 0;
        }
        per_chain[g].push_back({static_cast<int>(g), state.iteration, state.x, state.log_density, last, 1.0});
      }
      evals[g] = counted.gradient_calls();
    } catch (const std::exception& e) {
      errors[g] = "chain " + std::to_string(g) + ": " + e.what();
    }
  });

  long total_accepts = 0;
  for (std::size_t g = 0; g < per_chain.size(); ++g) {
    if (!errors[g].empty() && out.error.empty()) out.error = errors[g];
    for (auto& s : per_chain[g]) out.samples.push_back(std::move(s));
    out.report.stage2_gradient_evaluations += evals[g];
    out.report.prediction_fallbacks += fallback[g];
    total_accepts += accepts[g];
  }
  out.report.plain_warmup_iterations = static_cast<long>(chains) * cfg.warmup;
  const long moves = static_cast<long>(chains) * cfg.samples_per_chain * cfg.thin;
  out.report.acceptance_rate = moves > 0 ? static_cast<double>(total_accepts) / static_cast<double>(moves) : 0.0;
  out.report.stage2_seconds = seconds_since(t0);
  return out;
}

Algorithm1Result algorithm1(const LogTarget& target, const PriorSampler& prior, const Algorithm1Config& cfg,
                            std::uint64_t seed) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  long stage1_evals = 0;
  std::vector<SensitivityRecord> records;
  try {
    records = build_sensitivity_records(target, prior, cfg, seed, &stage1_evals);
  } catch (const std::exception& e) {
    Algorithm1Result partial;
    partial.error = std::string("stage 1: ") + e.what();
    partial.report.stage1_seconds = seconds_since(t0);
    return partial;
  }
  const double stage1_seconds = seconds_since(t0);
  Algorithm1Result out = run_warm_started(target, prior, std::move(records), cfg, seed);
  out.report.stage1_gradient_evaluations = stage1_evals;
  out.report.stage1_seconds = stage1_seconds;
  return out;
}

}  // namespace regmech
