#include "regmech/posterior.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "regmech/parallel.hpp"

namespace regmech {

PriorSpec PriorSpec::from_network(const MixtureModel& model, double alpha) {
  PriorSpec p;
  const Index d = model.theta_dim();
  p.log_location.resize(d);
  p.log_scale.resize(d);
  Index j = 0;
  for (const auto& cand : model.candidates) {
    for (Index c : cand.layout->param_constant) {
      const auto& k = cand.layout->network->constants[c];
      p.log_location[j] = std::log(k.prior_guess);
      p.log_scale[j] = k.prior_scale;
      ++j;
    }
  }
  p.dirichlet = Vector::Constant(model.num_candidates(), alpha);
  return p;
}

void PriorSpec::validate(Index theta_dim, Index num_candidates) const {
  if (log_location.size() != theta_dim || log_scale.size() != theta_dim)
    throw SpecError("prior dimension does not match theta");
  if (dirichlet.size() != num_candidates) throw SpecError("Dirichlet dimension does not match the candidate count");
  if ((log_scale.array() <= 0.0).any()) throw SpecError("prior scales must be positive");
  if ((dirichlet.array() <= 0.0).any()) throw SpecError("Dirichlet concentrations must be positive");
}

double log_prior_theta(const PriorSpec& prior, const Vector& theta) {
  constexpr double half_log_2pi = 0.91893853320467274178;
  double lp = 0.0;
  for (Index j = 0; j < theta.size(); ++j) {
    if (!(theta[j] > 0.0)) return -std::numeric_limits<double>::infinity();
    const double u = std::log(theta[j]);
    const double z = (u - prior.log_location[j]) / prior.log_scale[j];
    lp += -u - std::log(prior.log_scale[j]) - half_log_2pi - 0.5 * z * z;
  }
  return lp;
}

Vector grad_log_prior_theta(const PriorSpec& prior, const Vector& theta) {
  Vector g(theta.size());
  for (Index j = 0; j < theta.size(); ++j) {
    const double s2 = prior.log_scale[j] * prior.log_scale[j];
    g[j] = -(1.0 + (std::log(theta[j]) - prior.log_location[j]) / s2) / theta[j];
  }
  return g;
}

double log_prior_weights(const PriorSpec& prior, const Vector& w) {
  double lp = std::lgamma(prior.dirichlet.sum());
  for (Index k = 0; k < w.size(); ++k) {
    const double a = prior.dirichlet[k];
    lp -= std::lgamma(a);
    if (a != 1.0) lp += (a - 1.0) * std::log(w[k]);
  }
  return lp;
}

Vector grad_log_prior_weights(const PriorSpec& prior, const Vector& w) {
  Vector g = Vector::Zero(w.size());
  for (Index k = 0; k < w.size(); ++k)
    if (prior.dirichlet[k] != 1.0) g[k] = (prior.dirichlet[k] - 1.0) / w[k];
  return g;
}

PriorDraw draw_prior(const PriorSpec& prior, Rng& rng) {
  PriorDraw d;
  const Vector u = standard_normal(prior.log_location.size(), rng);
  d.theta = (prior.log_location.array() + prior.log_scale.array() * u.array()).exp();
  d.w.resize(prior.dirichlet.size());
  for (Index k = 0; k < d.w.size(); ++k) d.w[k] = std::gamma_distribution<double>(prior.dirichlet[k], 1.0)(rng);
  const double total = d.w.sum();
  if (total > 0.0) d.w /= total;
  else d.w.setConstant(1.0 / static_cast<double>(d.w.size()));
  return d;
}

PosteriorModel::PosteriorModel(MixtureModel structure, Dataset data, PriorSpec prior, PosteriorOptions options)
    : structure_(std::move(structure)), data_(std::move(data)), prior_(std::move(prior)), options_(options) {
  prior_.validate(structure_.theta_dim(), structure_.num_candidates());
  data_.validate();
  if (!(options_.jitter >= 0.0)) throw UsageError("jitter must be nonnegative");
  const auto& net = structure_.network();
  if (static_cast<Index>(data_.species.size()) != net.num_species())
    throw UsageError("dataset species do not match the network");
  stoich_ = net.stoich_real();
  Eigen::JacobiSVD<Matrix> svd(stoich_, Eigen::ComputeFullU);
  const Vector sv = svd.singularValues();
  const double tol = 1e-10 * std::max<double>(1.0, sv.size() ? sv[0] : 1.0);
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv[i] > tol) ++rank;
  if (rank == 0) throw SpecError("stoichiometry matrix is zero");
  const Index p = stoich_.rows();
  identity_basis_ = rank == p;
  basis_ = identity_basis_ ? Matrix::Identity(p, p) : Matrix(svd.matrixU().leftCols(rank));
  reduced_ = identity_basis_ ? stoich_ : Matrix(basis_.transpose() * stoich_);
  colnorm_ = reduced_.colwise().squaredNorm().transpose();
  if (!data_.trajectories.empty()) {
    const auto& t = data_.trajectories.front().times;
    dt_ = t.size() > 1 ? t[1] - t[0] : 1.0;
    for (Index h = 1; h < t.size(); ++h)
      if (std::abs((t[h] - t[h - 1]) - dt_) > 1e-9 * (1.0 + std::abs(dt_)))
        throw UsageError("dataset time grid must be evenly spaced");
  }
}

PosteriorModel PosteriorModel::with_data(Dataset data) const {
  return PosteriorModel(structure_, std::move(data), prior_, options_);
}

TransitionMoments PosteriorModel::moments(const Vector& state, const MixtureModel& model) const {
  const Vector v = flux_mixture(state, model);
  TransitionMoments m;
  m.mu = state + stoich_ * v * dt_;
  m.sigma = stoich_ * (v.cwiseAbs() * dt_).asDiagonal() * stoich_.transpose();
  m.sigma = 0.5 * (m.sigma + m.sigma.transpose());
  const double scale = m.sigma.diagonal().mean();
  m.sigma.diagonal().array() += options_.jitter * scale;
  return m;
}

double PosteriorModel::trajectory_term(const MixtureModel& model, const Trajectory& tr, Index traj,
                                       Vector* g_theta, Vector* g_w) const {
  const Index K = model.num_candidates();
  const Index L = stoich_.cols();
  const Index r = reduced_.rows();
  const bool grad = g_theta != nullptr;
  const auto offsets = model.theta_offsets();
  const double log2pi = std::log(2.0 * std::numbers::pi);
  std::vector<Vector> flux(static_cast<std::size_t>(K));
  std::vector<Matrix> dflux(static_cast<std::size_t>(K));
  double total = 0.0;
  for (Index h = 0; h + 1 < tr.states.rows(); ++h) {
    const Vector s = tr.states.row(h).transpose();
    const Vector s_next = tr.states.row(h + 1).transpose();
    Vector v = Vector::Zero(L);
    for (Index k = 0; k < K; ++k) {
      const double wk = model.weights[k];
      if (grad && wk != 0.0) {
        flux_candidate_jacobian(s, model.candidates[k], flux[k], dflux[k]);
      } else if (grad || wk != 0.0) {
        flux[k] = flux_candidate(s, model.candidates[k]);
      }
      if (wk != 0.0) v += wk * flux[k];
    }
    const Vector absv = v.cwiseAbs();
    Vector resid = identity_basis_ ? Vector(s_next - s) : Vector(basis_.transpose() * (s_next - s));
    resid -= reduced_ * v * dt_;
    Matrix sigma = reduced_ * (absv * dt_).asDiagonal() * reduced_.transpose();
    sigma = 0.5 * (sigma + sigma.transpose());
    const double jitter = options_.jitter * sigma.diagonal().mean();
    sigma.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success || !resid.allFinite()) {
      throw NumericError("non-finite transition term at trajectory " + std::to_string(traj) + ", transition " +
                         std::to_string(h));
    }
    const Matrix& Lc = llt.matrixLLT();
    double logdet = 0.0;
    for (Index i = 0; i < r; ++i) logdet += 2.0 * std::log(Lc(i, i));
    const Vector a = llt.solve(resid);
    const double term = -0.5 * (static_cast<double>(r) * log2pi + logdet + resid.dot(a));
    if (!std::isfinite(term))
      throw NumericError("non-finite transition term at trajectory " + std::to_string(traj) + ", transition " +
                         std::to_string(h));
    total += term;
    if (!grad) continue;

    // d/dx of -1/2 [log det S + r^T S^{-1} r] with
    //   dS = dt Nr diag(d|v|) Nr^T + jitter' I,  dmu = dt Nr dv,
    // is -1/2 [Tr(S^{-1} dS) - 2 dmu^T a - a^T dS a] with a = S^{-1} r.
    // Contracting through the diagonal structure of dS gives one L-vector
    // gamma with dlogp/dx = -1/2 gamma . dv/dx.
    const Matrix GN = llt.solve(reduced_);
    const Vector u = reduced_.transpose() * a;
    const double tr_g = llt.solve(Matrix::Identity(r, r)).trace();
    const double jfac = options_.jitter * (tr_g - a.squaredNorm()) / static_cast<double>(r);
    Vector gamma(L);
    for (Index l = 0; l < L; ++l) {
      const double cm = reduced_.col(l).dot(GN.col(l));
      const double alpha = dt_ * (cm - u[l] * u[l] + jfac * colnorm_[l]);
      const double sgn = v[l] > 0.0 ? 1.0 : (v[l] < 0.0 ? -1.0 : 0.0);
      gamma[l] = sgn * alpha - 2.0 * dt_ * u[l];
    }
    for (Index k = 0; k < K; ++k) {
      (*g_w)[k] += -0.5 * gamma.dot(flux[k]);
      const double wk = model.weights[k];
      if (wk != 0.0 && dflux[k].cols() > 0)
        g_theta->segment(offsets[k], dflux[k].cols()).noalias() += (-0.5 * wk) * (dflux[k].transpose() * gamma);
    }
  }
  return total;
}

double PosteriorModel::data_term(const Vector& theta, const Vector& w, Vector* g_theta, Vector* g_w) const {
  if (theta.size() != theta_dim()) throw UsageError("theta dimension mismatch");
  if (w.size() != num_candidates()) throw UsageError("weight dimension mismatch");
  const MixtureModel model = structure_.with_theta(theta, w);
  const std::size_t m = data_.trajectories.size();
  std::vector<double> values(m, 0.0);
  std::vector<Vector> gt(m), gw(m);
  parallel_for(m, options_.jobs, [&](std::size_t i) {
    if (g_theta) {
      gt[i] = Vector::Zero(theta.size());
      gw[i] = Vector::Zero(w.size());
      values[i] = trajectory_term(model, data_.trajectories[i], static_cast<Index>(i), &gt[i], &gw[i]);
    } else {
      values[i] = trajectory_term(model, data_.trajectories[i], static_cast<Index>(i), nullptr, nullptr);
    }
  });
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    total += values[i];
    if (g_theta) {
      *g_theta += gt[i];
      *g_w += gw[i];
    }
  }
  return total;
}

double PosteriorModel::log_likelihood(const Vector& theta, const Vector& w) const {
  return data_term(theta, w, nullptr, nullptr);
}

double PosteriorModel::log_posterior(const Vector& theta, const Vector& w) const {
  const double lp = log_prior_theta(prior_, theta) + log_prior_weights(prior_, w);
  if (!std::isfinite(lp)) return lp;
  return lp + data_term(theta, w, nullptr, nullptr);
}

PosteriorGradient PosteriorModel::grad_log_posterior(const Vector& theta, const Vector& w) const {
  PosteriorGradient g;
  g.theta = grad_log_prior_theta(prior_, theta);
  g.weights = grad_log_prior_weights(prior_, w);
  g.value = log_prior_theta(prior_, theta) + log_prior_weights(prior_, w);
  g.value += data_term(theta, w, &g.theta, &g.weights);
  return g;
}

double log_posterior(const PosteriorModel& model, const Vector& theta, const Vector& w) {
  return model.log_posterior(theta, w);
}

PosteriorGradient grad_log_posterior(const PosteriorModel& model, const Vector& theta, const Vector& w) {
  return model.grad_log_posterior(theta, w);
}

Vector hessian_vec(const LogTarget& target, const Vector& x, const Vector& direction) {
  const double dnorm = direction.norm();
  if (dnorm == 0.0) return Vector::Zero(x.size());
  if (!direction.allFinite()) throw UsageError("hessian_vec: direction must be finite");
  const Vector unit = direction / dnorm;
  const double h = 1e-5 * (1.0 + x.norm());
  const Vector gp = target.evaluate(x + h * unit).gradient;
  const Vector gm = target.evaluate(x - h * unit).gradient;
  return (gp - gm) * (dnorm / (2.0 * h));
}

Matrix hessian(const LogTarget& target, const Vector& x) {
  const Index d = x.size();
  Matrix H(d, d);
  for (Index j = 0; j < d; ++j) H.col(j) = hessian_vec(target, x, Vector::Unit(d, j));
  return 0.5 * (H + H.transpose());
}

PosteriorTarget::PosteriorTarget(const PosteriorModel& model, WeightParam param) : model_(model), param_(param) {}

Index PosteriorTarget::dim() const {
  const Index K = model_.num_candidates();
  return model_.theta_dim() + (param_ == WeightParam::Projected ? K : K - 1);
}

Index PosteriorTarget::simplex_begin() const {
  return param_ == WeightParam::Projected ? model_.theta_dim() : dim();
}

Vector PosteriorTarget::theta_of(const Vector& x) const { return x.head(model_.theta_dim()).array().exp(); }

Vector PosteriorTarget::weights_of(const Vector& x) const {
  const Index K = model_.num_candidates();
  if (param_ == WeightParam::Projected) return x.tail(K);
  Vector eta(K);
  eta.head(K - 1) = x.tail(K - 1);
  eta[K - 1] = 0.0;
  const double mx = eta.maxCoeff();
  Vector e = (eta.array() - mx).exp();
  return e / e.sum();
}

Vector PosteriorTarget::to_coordinates(const Vector& theta, const Vector& w) const {
  const Index K = model_.num_candidates();
  Vector x(dim());
  x.head(model_.theta_dim()) = theta.array().log();
  if (param_ == WeightParam::Projected) {
    x.tail(K) = w;
  } else {
    const Vector lw = w.array().max(1e-300).log();
    x.tail(K - 1) = lw.head(K - 1).array() - lw[K - 1];
  }
  return x;
}

double PosteriorTarget::log_density(const Vector& x) const {
  const Vector theta = theta_of(x);
  const Vector w = weights_of(x);
  // Change of variables to log theta adds sum(log theta).
  double lp = model_.log_posterior(theta, w) + x.head(model_.theta_dim()).sum();
  if (param_ == WeightParam::Softmax) lp += w.array().log().sum();
  return lp;
}

Evaluation PosteriorTarget::evaluate(const Vector& x) const {
  const Index dt = model_.theta_dim();
  const Vector theta = theta_of(x);
  const Vector w = weights_of(x);
  const PosteriorGradient g = model_.grad_log_posterior(theta, w);
  Evaluation e;
  e.log_density = g.value + x.head(dt).sum();
  e.gradient.resize(dim());
  e.gradient.head(dt) = (theta.array() * g.theta.array() + 1.0).matrix();
  if (param_ == WeightParam::Projected) {
    // Tangential part: the component along (1, ..., 1) leaves the simplex and
    // is discarded by the projection anyway.
    e.gradient.tail(w.size()) = (g.weights.array() - g.weights.mean()).matrix();
  } else {
    const Index K = w.size();
    e.log_density += w.array().log().sum();
    const double mean_g = w.dot(g.weights);
    for (Index j = 0; j + 1 < K; ++j) e.gradient[dt + j] = w[j] * (g.weights[j] - mean_g) + 1.0 - K * w[j];
  }
  return e;
}

}  // namespace regmech
