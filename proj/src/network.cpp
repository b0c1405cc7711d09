#include "regmech/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace regmech {

std::string to_string(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::Competitive:
      return "competitive";
    case MechanismKind::Noncompetitive:
      return "noncompetitive";
    case MechanismKind::Allosteric:
      return "allosteric";
  }
  return "unknown";
}

MechanismKind parse_mechanism_kind(const std::string& name) {
  if (name == "competitive") return MechanismKind::Competitive;
  if (name == "noncompetitive" || name == "non-competitive") return MechanismKind::Noncompetitive;
  if (name == "allosteric" || name == "activation") return MechanismKind::Allosteric;
  throw SpecError("unknown mechanism kind '" + name + "'");
}

namespace {

template <typename T>
Index find_name(const std::vector<T>& items, const std::string& name, const char* what,
                const std::string& (*get)(const T&)) {
  for (std::size_t i = 0; i < items.size(); ++i)
    if (get(items[i]) == name) return static_cast<Index>(i);
  throw SpecError(std::string("unknown ") + what + " '" + name + "'");
}

void check_half(const NetworkSpec& spec, const RateHalf& half, const std::string& where) {
  const Index p = spec.num_species();
  const Index nc = static_cast<Index>(spec.constants.size());
  auto check_const = [&](Index c) {
    if (c < 0 || c >= nc) throw SpecError(where + ": constant index out of range");
    if (!(spec.constants[c].value > 0.0))
      throw SpecError(where + ": constant '" + spec.constants[c].name + "' must be positive");
  };
  check_const(half.vmax);
  std::set<Index> regulators;  // the four term sets are disjoint
  auto check_terms = [&](const std::vector<RateTerm>& terms) {
    for (const auto& t : terms) {
      if (t.species < 0 || t.species >= p) throw SpecError(where + ": species index out of range");
      check_const(t.constant);
      if (!regulators.insert(t.species).second)
        throw SpecError(where + ": species '" + spec.species[t.species] +
                        "' appears in more than one term set");
    }
  };
  check_terms(half.substrates);
  check_terms(half.noncompetitive);
  check_terms(half.competitive);
  check_terms(half.activators);
}

}  // namespace

Index NetworkSpec::species_index(const std::string& n) const {
  for (std::size_t i = 0; i < species.size(); ++i)
    if (species[i] == n) return static_cast<Index>(i);
  throw SpecError("unknown species '" + n + "'");
}

Index NetworkSpec::constant_index(const std::string& n) const {
  return find_name<KineticConstant>(constants, n, "constant",
                                    [](const KineticConstant& c) -> const std::string& { return c.name; });
}

Index NetworkSpec::reaction_index(const std::string& n) const {
  return find_name<ReactionKinetics>(reactions, n, "reaction",
                                     [](const ReactionKinetics& r) -> const std::string& { return r.name; });
}

Vector NetworkSpec::constant_values() const {
  Vector v(static_cast<Index>(constants.size()));
  for (std::size_t i = 0; i < constants.size(); ++i) v[static_cast<Index>(i)] = constants[i].value;
  return v;
}

void NetworkSpec::validate() const {
  const Index p = num_species();
  const Index L = num_reactions();
  if (p < 1) throw SpecError("network needs at least one species");
  if (L < 1) throw SpecError("network needs at least one reaction");
  if (stoich.rows() != p || stoich.cols() != L) throw SpecError("stoichiometry matrix must be p x L");
  for (Index l = 0; l < L; ++l)
    if ((stoich.col(l).array() == 0).all())
      throw SpecError("reaction '" + reactions[l].name + "' has an all-zero stoichiometry column");
  for (const auto& c : constants) {
    if (!(c.value > 0.0)) throw SpecError("constant '" + c.name + "' must be positive");
    if (!(c.prior_guess > 0.0) || !(c.prior_scale > 0.0))
      throw SpecError("constant '" + c.name + "' needs a positive prior guess and scale");
  }
  for (Index l = 0; l < L; ++l) {
    check_half(*this, reactions[l].forward, reactions[l].name);
    if (reactions[l].reverse) check_half(*this, *reactions[l].reverse, reactions[l].name + " (reverse)");
  }
  for (const auto& m : mechanisms) {
    if (m.reaction < 0 || m.reaction >= L) throw SpecError("mechanism '" + m.name + "' references an unknown reaction");
    if (m.species < 0 || m.species >= p) throw SpecError("mechanism '" + m.name + "' references an unknown species");
    if (m.constant < 0 || m.constant >= static_cast<Index>(constants.size()))
      throw SpecError("mechanism '" + m.name + "' references an unknown constant");
    if (m.on_reverse && !reactions[m.reaction].reverse)
      throw SpecError("mechanism '" + m.name + "' attaches to a missing reverse half");
  }
  if (initial_state && initial_state->size() != p) throw SpecError("initial state must have p entries");
  if (truth_mask && truth_mask->size() != mechanisms.size())
    throw SpecError("truth mask length must equal the mechanism count");
}

std::string MechanismMask::to_string() const {
  // Highest mechanism first, so the string reads like the binary candidate index.
  std::string s;
  for (auto it = bits.rbegin(); it != bits.rend(); ++it) s += *it ? '1' : '0';
  return s.empty() ? "-" : s;
}

Vector CandidateModel::constants() const {
  Vector c = layout->network->constant_values();
  for (Index j = 0; j < params.size(); ++j) c[layout->param_constant[j]] = params[j];
  return c;
}

CandidateModel CandidateModel::with_params(const Vector& new_params) const {
  if (new_params.size() != params.size()) throw UsageError("candidate parameter dimension mismatch");
  CandidateModel out = *this;
  out.params = new_params;
  return out;
}

Index MixtureModel::theta_dim() const {
  Index d = 0;
  for (const auto& c : candidates) d += c.num_params();
  return d;
}

std::vector<Index> MixtureModel::theta_offsets() const {
  std::vector<Index> off;
  off.reserve(candidates.size() + 1);
  Index d = 0;
  for (const auto& c : candidates) {
    off.push_back(d);
    d += c.num_params();
  }
  off.push_back(d);
  return off;
}

Vector MixtureModel::theta() const {
  Vector t(theta_dim());
  Index d = 0;
  for (const auto& c : candidates) {
    t.segment(d, c.num_params()) = c.params;
    d += c.num_params();
  }
  return t;
}

MixtureModel MixtureModel::with_theta(const Vector& theta, const Vector& new_weights) const {
  if (theta.size() != theta_dim()) throw UsageError("theta dimension mismatch");
  if (new_weights.size() != num_candidates()) throw UsageError("weight dimension mismatch");
  MixtureModel out;
  out.candidates.reserve(candidates.size());
  Index d = 0;
  for (const auto& c : candidates) {
    out.candidates.push_back(c.with_params(theta.segment(d, c.num_params())));
    d += c.num_params();
  }
  out.weights = new_weights;
  return out;
}

std::vector<std::string> MixtureModel::theta_names() const {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto& lay = *candidates[k].layout;
    for (Index c : lay.param_constant) names.push_back("k" + std::to_string(k) + "." + lay.network->constants[c].name);
  }
  return names;
}

void MixtureModel::validate() const {
  if (candidates.empty()) throw SpecError("mixture needs at least one candidate");
  if (weights.size() != num_candidates()) throw SpecError("mixture weight count must equal candidate count");
  if ((weights.array() < 0.0).any() || (weights.array() > 1.0).any())
    throw SpecError("mixture weights must lie in [0, 1]");
  if (std::abs(weights.sum() - 1.0) > 1e-12) throw SpecError("mixture weights must sum to one");
}

namespace {

std::shared_ptr<const CandidateLayout> compile_layout(const std::shared_ptr<const NetworkSpec>& spec,
                                                       const std::vector<MechanismDecl>& mechanisms,
                                                       const MechanismMask& mask) {
  auto lay = std::make_shared<CandidateLayout>();
  lay->network = spec;
  lay->mask = mask;
  for (const auto& r : spec->reactions) {
    lay->forward.push_back(r.forward);
    lay->reverse.push_back(r.reverse);
  }
  for (std::size_t c = 0; c < mechanisms.size(); ++c) {
    if (!mask.bits[c]) continue;
    const auto& m = mechanisms[c];
    RateHalf& half = m.on_reverse ? *lay->reverse[m.reaction] : lay->forward[m.reaction];
    const RateTerm term{m.species, m.constant};
    switch (m.kind) {
      case MechanismKind::Competitive:
        half.competitive.push_back(term);
        break;
      case MechanismKind::Noncompetitive:
        half.noncompetitive.push_back(term);
        break;
      case MechanismKind::Allosteric:
        half.activators.push_back(term);
        break;
    }
  }
  for (std::size_t l = 0; l < lay->forward.size(); ++l) {
    check_half(*spec, lay->forward[l], spec->reactions[l].name + " [" + mask.to_string() + "]");
    if (lay->reverse[l]) check_half(*spec, *lay->reverse[l], spec->reactions[l].name + " reverse [" + mask.to_string() + "]");
  }
  // Parameters: inferred constants referenced by any active term.
  std::vector<bool> used(spec->constants.size(), false);
  auto mark = [&](const RateHalf& h) {
    used[h.vmax] = true;
    for (const auto* set : {&h.substrates, &h.noncompetitive, &h.competitive, &h.activators})
      for (const auto& t : *set) used[t.constant] = true;
  };
  for (std::size_t l = 0; l < lay->forward.size(); ++l) {
    mark(lay->forward[l]);
    if (lay->reverse[l]) mark(*lay->reverse[l]);
  }
  lay->constant_slot.assign(spec->constants.size(), -1);
  for (std::size_t c = 0; c < spec->constants.size(); ++c) {
    if (used[c] && spec->constants[c].inferred) {
      lay->constant_slot[c] = static_cast<Index>(lay->param_constant.size());
      lay->param_constant.push_back(static_cast<Index>(c));
    }
  }
  return lay;
}

}  // namespace

std::vector<CandidateModel> enumerate_candidates(const std::shared_ptr<const NetworkSpec>& spec,
                                                 const std::vector<MechanismDecl>& mechanisms) {
  if (!spec) throw SpecError("null network");
  NetworkSpec checked = *spec;
  checked.mechanisms = mechanisms;
  checked.truth_mask.reset();
  checked.validate();
  const std::size_t C = mechanisms.size();
  if (C > 20) throw SpecError("too many mechanisms to enumerate");
  const std::size_t K = std::size_t{1} << C;
  const Vector values = spec->constant_values();
  std::vector<CandidateModel> out;
  out.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    MechanismMask mask;
    mask.bits.resize(C);
    for (std::size_t c = 0; c < C; ++c) mask.bits[c] = ((k >> c) & 1U) != 0;
    CandidateModel cand;
    cand.layout = compile_layout(spec, mechanisms, mask);
    cand.mask = mask;
    cand.params.resize(cand.layout->num_params());
    for (Index j = 0; j < cand.params.size(); ++j) cand.params[j] = values[cand.layout->param_constant[j]];
    out.push_back(std::move(cand));
  }
  return out;
}

std::vector<CandidateModel> enumerate_candidates(const std::shared_ptr<const NetworkSpec>& spec) {
  return enumerate_candidates(spec, spec->mechanisms);
}

Index candidate_index(const MechanismMask& mask) {
  Index k = 0;
  for (std::size_t c = 0; c < mask.bits.size(); ++c)
    if (mask.bits[c]) k |= Index{1} << c;
  return k;
}

MixtureModel make_mixture(std::vector<CandidateModel> candidates, std::optional<Index> hot) {
  MixtureModel m;
  const Index K = static_cast<Index>(candidates.size());
  m.candidates = std::move(candidates);
  if (hot) {
    if (*hot < 0 || *hot >= K) throw UsageError("one-hot index out of range");
    m.weights = Vector::Zero(K);
    m.weights[*hot] = 1.0;
  } else {
    m.weights = Vector::Constant(K, 1.0 / static_cast<double>(K));
  }
  return m;
}

namespace {

// Evaluates one rate half at a floored state. Derivatives with respect to
// network constants are accumulated into d_const(row, c) scaled by `sign`;
// state derivatives into d_state(row, i) when non-null.
double eval_half(const RateHalf& h, const Vector& s, const Vector& c, double sign, Index row,
                 Matrix* d_const, Matrix* d_state, const std::vector<bool>* floored) {
  double F = 1.0;
  for (const auto& t : h.competitive) F += s[t.species] / c[t.constant];
  for (const auto& t : h.activators) F += c[t.constant] / s[t.species];

  double v = c[h.vmax];
  for (const auto& t : h.substrates) {
    const double km = c[t.constant];
    v *= s[t.species] / (s[t.species] + km * F);
  }
  for (const auto& t : h.noncompetitive) {
    const double ki = c[t.constant];
    v *= ki / (s[t.species] + ki);
  }
  if (!d_const && !d_state) return v;

  // d log v / d F
  double gF = 0.0;
  for (const auto& t : h.substrates) {
    const double km = c[t.constant];
    gF -= km / (s[t.species] + km * F);
  }
  const double sv = sign * v;
  if (d_const) {
    Matrix& D = *d_const;
    D(row, h.vmax) += sv / c[h.vmax];
    for (const auto& t : h.substrates) {
      const double km = c[t.constant];
      D(row, t.constant) -= sv * F / (s[t.species] + km * F);
    }
    for (const auto& t : h.noncompetitive) {
      const double ki = c[t.constant];
      D(row, t.constant) += sv * s[t.species] / (ki * (s[t.species] + ki));
    }
    for (const auto& t : h.competitive) {
      const double ki = c[t.constant];
      D(row, t.constant) += sv * gF * (-s[t.species] / (ki * ki));
    }
    for (const auto& t : h.activators) D(row, t.constant) += sv * gF / s[t.species];
  }
  if (d_state) {
    Matrix& D = *d_state;
    auto add = [&](Index i, double val) {
      if (!(*floored)[i]) D(row, i) += val;
    };
    for (const auto& t : h.substrates) {
      const double kp = c[t.constant] * F;
      add(t.species, sv * kp / (s[t.species] * (s[t.species] + kp)));
    }
    for (const auto& t : h.noncompetitive) add(t.species, -sv / (s[t.species] + c[t.constant]));
    for (const auto& t : h.competitive) add(t.species, sv * gF / c[t.constant]);
    for (const auto& t : h.activators) {
      const double x = s[t.species];
      add(t.species, sv * gF * (-c[t.constant] / (x * x)));
    }
  }
  return v;
}

Vector floor_state(const Vector& state, std::vector<bool>* floored) {
  Vector s = state;
  if (floored) floored->assign(static_cast<std::size_t>(state.size()), false);
  for (Index i = 0; i < s.size(); ++i) {
    if (!(s[i] >= kStateFloor)) {
      s[i] = kStateFloor;
      if (floored) (*floored)[i] = true;
    }
  }
  return s;
}

}  // namespace

Vector flux_candidate(const Vector& state, const CandidateModel& candidate) {
  const auto& lay = *candidate.layout;
  const Index L = static_cast<Index>(lay.forward.size());
  if (state.size() != lay.network->num_species()) throw UsageError("state dimension mismatch");
  const Vector s = floor_state(state, nullptr);
  const Vector c = candidate.constants();
  Vector v(L);
  for (Index l = 0; l < L; ++l) {
    v[l] = eval_half(lay.forward[l], s, c, 1.0, l, nullptr, nullptr, nullptr);
    if (lay.reverse[l]) v[l] -= eval_half(*lay.reverse[l], s, c, -1.0, l, nullptr, nullptr, nullptr);
  }
  return v;
}

void flux_candidate_jacobian(const Vector& state, const CandidateModel& candidate, Vector& flux,
                             Matrix& d_params, Matrix* d_state) {
  const auto& lay = *candidate.layout;
  const auto& net = *lay.network;
  const Index L = static_cast<Index>(lay.forward.size());
  const Index nc = static_cast<Index>(net.constants.size());
  if (state.size() != net.num_species()) throw UsageError("state dimension mismatch");
  std::vector<bool> floored;
  const Vector s = floor_state(state, &floored);
  const Vector c = candidate.constants();
  Matrix d_const = Matrix::Zero(L, nc);
  if (d_state) *d_state = Matrix::Zero(L, net.num_species());
  flux.resize(L);
  for (Index l = 0; l < L; ++l) {
    flux[l] = eval_half(lay.forward[l], s, c, 1.0, l, &d_const, d_state, &floored);
    if (lay.reverse[l]) flux[l] -= eval_half(*lay.reverse[l], s, c, -1.0, l, &d_const, d_state, &floored);
  }
  d_params.resize(L, lay.num_params());
  for (Index j = 0; j < lay.num_params(); ++j) d_params.col(j) = d_const.col(lay.param_constant[j]);
}

Vector flux_mixture(const Vector& state, const MixtureModel& model) {
  Vector v = Vector::Zero(model.network().num_reactions());
  for (Index k = 0; k < model.num_candidates(); ++k) {
    if (model.weights[k] == 0.0) continue;
    v += model.weights[k] * flux_candidate(state, model.candidates[k]);
  }
  return v;
}

FluxDerivatives flux_derivatives(const Vector& state, const MixtureModel& model) {
  const auto& net = model.network();
  const Index L = net.num_reactions();
  const Index K = model.num_candidates();
  FluxDerivatives out;
  out.d_state = Matrix::Zero(L, net.num_species());
  out.d_theta = Matrix::Zero(L, model.theta_dim());
  out.d_weights.resize(L, K);
  const auto offsets = model.theta_offsets();
  Vector flux;
  Matrix dp;
  Matrix ds;
  for (Index k = 0; k < K; ++k) {
    flux_candidate_jacobian(state, model.candidates[k], flux, dp, &ds);
    const double w = model.weights[k];
    out.d_weights.col(k) = flux;
    out.d_theta.middleCols(offsets[k], dp.cols()) = w * dp;
    out.d_state += w * ds;
  }
  return out;
}

}  // namespace regmech
