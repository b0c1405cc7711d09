#include "regmech/mala.hpp"

#include <cmath>

namespace regmech {

Matrix project_simplex_jacobian(const Vector& v) {
  const Index K = v.size();
  const Vector w = project_simplex(v);
  std::vector<Index> active;
  for (Index k = 0; k < K; ++k)
    if (w[k] > 0.0) active.push_back(k);
  Matrix J = Matrix::Zero(K, K);
  const double inv = 1.0 / static_cast<double>(active.size());
  for (Index a : active)
    for (Index b : active) J(a, b) = (a == b ? 1.0 : 0.0) - inv;
  return J;
}

void MalaConfig::validate() const {
  if (!(step > 0.0)) throw UsageError("MALA step must be positive");
  if (warmup < 0 || thin < 1 || samples < 1) throw UsageError("MALA needs warmup >= 0, thin >= 1, samples >= 1");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw UsageError("target acceptance must lie in (0, 1)");
}

ChainState make_state(const LogTarget& target, const Vector& x, long iteration) {
  if (x.size() != target.dim()) throw UsageError("initial point has the wrong dimension");
  ChainState s;
  s.x = project_block(target, x);
  Evaluation e = target.evaluate(s.x);
  s.log_density = e.log_density;
  s.gradient = std::move(e.gradient);
  s.iteration = iteration;
  if (!std::isfinite(s.log_density)) throw NumericError("initial point has a non-finite log density");
  return s;
}

Vector project_block(const LogTarget& target, const Vector& x) {
  const Index b = target.simplex_begin();
  if (b >= x.size()) return x;
  Vector out = x;
  out.tail(x.size() - b) = project_simplex(x.tail(x.size() - b));
  return out;
}

double log_proposal_density(const Vector& to, const Vector& from, const Vector& grad_from, double step) {
  const double e2 = step * step;
  const Vector diff = to - from - 0.5 * e2 * grad_from;
  return -0.5 * diff.squaredNorm() / e2 - static_cast<double>(to.size()) * std::log(step) -
         0.5 * static_cast<double>(to.size()) * std::log(2.0 * 3.14159265358979323846);
}

namespace {

Vector finite_or_zero(const Vector& g, bool* fallback) {
  if (g.allFinite()) {
    if (fallback) *fallback = false;
    return g;
  }
  if (fallback) *fallback = true;
  return Vector::Zero(g.size());
}

}  // namespace

Proposal propose_with_noise(const ChainState& state, double step, const LogTarget& target, const Vector& noise) {
  if (noise.size() != state.x.size()) throw UsageError("proposal noise has the wrong dimension");
  Proposal p;
  const Vector g = finite_or_zero(state.gradient, &p.gradient_fallback);
  p.pre_projection = state.x + 0.5 * step * step * g + step * noise;
  p.point = project_block(target, p.pre_projection);
  p.eval = target.evaluate(p.point);
  return p;
}

Proposal propose(const ChainState& state, double step, const LogTarget& target, Rng& rng) {
  return propose_with_noise(state, step, target, standard_normal(state.x.size(), rng));
}

double log_acceptance(const ChainState& current, const Proposal& proposal, double step) {
  if (!std::isfinite(proposal.eval.log_density)) return -std::numeric_limits<double>::infinity();
  const Vector g_cur = finite_or_zero(current.gradient, nullptr);
  const Vector g_prop = finite_or_zero(proposal.eval.gradient, nullptr);
  const double forward = log_proposal_density(proposal.pre_projection, current.x, g_cur, step);
  const double reverse = log_proposal_density(current.x, proposal.point, g_prop, step);
  const double log_ratio = proposal.eval.log_density - current.log_density + reverse - forward;
  if (std::isnan(log_ratio)) return -std::numeric_limits<double>::infinity();
  return std::min(0.0, log_ratio);
}

double acceptance_prob(const ChainState& current, const Proposal& proposal, double step) {
  return std::exp(log_acceptance(current, proposal, step));
}

bool mala_transition(ChainState& state, double step, const LogTarget& target, Rng& rng, bool* fallback,
                     double* accept_prob) {
  Proposal p = propose(state, step, target, rng);
  const double la = log_acceptance(state, p, step);
  if (fallback) *fallback = p.gradient_fallback;
  if (accept_prob) *accept_prob = std::exp(la);
  const double u = uniform01(rng);
  ++state.iteration;
  if (std::log(u) < la) {
    state.x = std::move(p.point);
    state.log_density = p.eval.log_density;
    state.gradient = std::move(p.eval.gradient);
    return true;
  }
  return false;
}

ChainResult run_chain(const Vector& init, const LogTarget& target, const MalaConfig& cfg, Rng& rng, int chain_id) {
  cfg.validate();
  ChainResult out;
  ChainState state = make_state(target, init);
  out.gradient_evaluations = 1;
  double step = cfg.step;

  // Dual averaging on log step (Hoffman & Gelman), warmup only.
  const double mu = std::log(10.0 * cfg.step);
  constexpr double gamma = 0.05;
  constexpr double t0 = 10.0;
  constexpr double kappa = 0.75;
  double h_bar = 0.0;
  double log_step_bar = std::log(cfg.step);
  long warm_accepts = 0;
  out.step_trace.reserve(static_cast<std::size_t>(cfg.warmup));
  for (int t = 1; t <= cfg.warmup; ++t) {
    bool fb = false;
    double alpha = 0.0;
    warm_accepts += mala_transition(state, step, target, rng, &fb, &alpha) ? 1 : 0;
    ++out.gradient_evaluations;
    out.fallbacks += fb ? 1 : 0;
    if (cfg.adapt) {
      const double tt = static_cast<double>(t);
      h_bar = (1.0 - 1.0 / (tt + t0)) * h_bar + (cfg.target_accept - alpha) / (tt + t0);
      const double log_step = mu - std::sqrt(tt) / gamma * h_bar;
      const double w = std::pow(tt, -kappa);
      log_step_bar = w * log_step + (1.0 - w) * log_step_bar;
      step = std::exp(log_step);
    }
    out.step_trace.push_back(step);
  }
  if (cfg.adapt && cfg.warmup > 0) step = std::exp(log_step_bar);
  out.warmup_acceptance_rate = cfg.warmup > 0 ? static_cast<double>(warm_accepts) / cfg.warmup : 0.0;
  out.step = step;

  long accepts = 0;
  long total = 0;
  out.samples.reserve(static_cast<std::size_t>(cfg.samples));
  for (int b = 0; b < cfg.samples; ++b) {
    bool last = false;
    for (int j = 0; j < cfg.thin; ++j) {
      bool fb = false;
      last = mala_transition(state, step, target, rng, &fb);
      ++out.gradient_evaluations;
      out.fallbacks += fb ? 1 : 0;
      accepts += last ? 1 : 0;
      ++total;
    }
    out.samples.push_back({chain_id, state.iteration, state.x, state.log_density, last, 1.0});
  }
  out.acceptance_rate = total > 0 ? static_cast<double>(accepts) / static_cast<double>(total) : 0.0;
  out.final_state = std::move(state);
  return out;
}

double effective_sample_size(const std::vector<double>& draws) {
  const std::size_t n = draws.size();
  if (n < 4) return static_cast<double>(n);
  const double mean = std::accumulate(draws.begin(), draws.end(), 0.0) / static_cast<double>(n);
  std::vector<double> c(draws.size());
  for (std::size_t i = 0; i < n; ++i) c[i] = draws[i] - mean;
  auto acov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += c[i] * c[i + lag];
    return s / static_cast<double>(n);
  };
  const double c0 = acov(0);
  if (c0 <= 0.0) return static_cast<double>(n);
  // Geyer: sum consecutive pairs of autocorrelations while positive.
  double tau = -1.0;
  for (std::size_t k = 0; k + 1 < n; k += 2) {
    const double pair = (acov(k) + acov(k + 1)) / c0;
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / static_cast<double>(n));
  return static_cast<double>(n) / tau;
}

}  // namespace regmech
