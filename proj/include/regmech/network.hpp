#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "regmech/common.hpp"

namespace regmech {

/// Lower bound applied to every concentration before a rate law is evaluated.
/// Keeps K_a / s terms of allosteric activators finite as s -> 0.
inline constexpr double kStateFloor = 1e-9;

enum class MechanismKind { Competitive, Noncompetitive, Allosteric };

std::string to_string(MechanismKind kind);
MechanismKind parse_mechanism_kind(const std::string& name);

/// A named kinetic constant. `value` is the ground truth used for synthetic
/// data; constants with `inferred == false` stay fixed at `value` during
/// inference.
struct KineticConstant {
  std::string name;
  double value = 1.0;
  bool inferred = false;
  /// Order-of-magnitude guess used as the log-normal prior location.
  double prior_guess = 1.0;
  double prior_scale = 1.0;
};

/// One species attached to a rate law through a constant (K_m, K_i or K_a).
struct RateTerm {
  Index species = 0;
  Index constant = 0;
};

/// One Michaelis-Menten half of a reaction:
///   V_max * prod_y s_y / (s_y + K'_m,y) * prod_z K_i,z / (s_z + K_i,z)
///   K'_m,y = K_m,y * (1 + sum_z' s_z' / K_i,z' + sum_x K_a,x / s_x)
struct RateHalf {
  Index vmax = 0;
  std::vector<RateTerm> substrates;
  std::vector<RateTerm> noncompetitive;
  std::vector<RateTerm> competitive;
  std::vector<RateTerm> activators;
};

/// Rate law of one reaction; reversible reactions report forward minus reverse.
struct ReactionKinetics {
  std::string name;
  RateHalf forward;
  std::optional<RateHalf> reverse;
};

/// An optional regulatory term: present only in candidates whose mask bit is set.
struct MechanismDecl {
  std::string name;
  Index reaction = 0;
  bool on_reverse = false;
  MechanismKind kind = MechanismKind::Noncompetitive;
  Index species = 0;
  Index constant = 0;
};

struct NetworkSpec {
  std::string name;
  std::vector<std::string> species;
  std::vector<ReactionKinetics> reactions;
  /// p x L net stoichiometric change per reaction firing.
  IntMatrix stoich;
  std::vector<KineticConstant> constants;
  std::vector<MechanismDecl> mechanisms;
  std::optional<Vector> initial_state;
  std::optional<std::vector<bool>> truth_mask;

  Index num_species() const { return static_cast<Index>(species.size()); }
  Index num_reactions() const { return static_cast<Index>(reactions.size()); }
  Matrix stoich_real() const { return stoich.cast<double>(); }

  Index species_index(const std::string& name) const;
  Index constant_index(const std::string& name) const;
  Index reaction_index(const std::string& name) const;
  Vector constant_values() const;

  /// Throws SpecError on any structural violation.
  void validate() const;
};

/// Activation status of each optional mechanism.
struct MechanismMask {
  std::vector<bool> bits;

  Index size() const { return static_cast<Index>(bits.size()); }
  std::string to_string() const;
  bool operator==(const MechanismMask&) const = default;
};

/// Compiled structure of one candidate: the rate halves with exactly the
/// active terms, and the map between its parameter vector and the network's
/// constants. Shared read-only between copies of a CandidateModel.
struct CandidateLayout {
  std::shared_ptr<const NetworkSpec> network;
  MechanismMask mask;
  std::vector<RateHalf> forward;
  std::vector<std::optional<RateHalf>> reverse;
  /// Network constant index of every parameter entry, in network order.
  std::vector<Index> param_constant;
  /// Parameter slot of every network constant, -1 when not a parameter.
  std::vector<Index> constant_slot;

  Index num_params() const { return static_cast<Index>(param_constant.size()); }
};

struct CandidateModel {
  std::shared_ptr<const CandidateLayout> layout;
  MechanismMask mask;
  Vector params;

  Index num_params() const { return params.size(); }
  /// Network constants with this candidate's parameters substituted.
  Vector constants() const;
  /// Candidate with the same structure and new parameter values.
  CandidateModel with_params(const Vector& new_params) const;
};

/// Weighted ensemble over candidates. theta is the concatenation of the
/// candidates' parameter vectors in candidate order.
struct MixtureModel {
  std::vector<CandidateModel> candidates;
  Vector weights;

  Index num_candidates() const { return static_cast<Index>(candidates.size()); }
  Index theta_dim() const;
  std::vector<Index> theta_offsets() const;
  Vector theta() const;
  MixtureModel with_theta(const Vector& theta, const Vector& new_weights) const;
  std::vector<std::string> theta_names() const;
  const NetworkSpec& network() const { return *candidates.front().layout->network; }

  /// Throws SpecError unless weights are on the simplex within 1e-12.
  void validate() const;
};

/// All 2^C candidates in binary-counting order: bit c of the candidate index
/// is the activation status of mechanisms[c]. Parameters start at the
/// network's ground-truth values.
std::vector<CandidateModel> enumerate_candidates(const std::shared_ptr<const NetworkSpec>& spec,
                                                 const std::vector<MechanismDecl>& mechanisms);
std::vector<CandidateModel> enumerate_candidates(const std::shared_ptr<const NetworkSpec>& spec);

/// Index of the candidate whose mask equals `mask`.
Index candidate_index(const MechanismMask& mask);

/// Uniform K-candidate mixture, or one-hot at `hot` when given.
MixtureModel make_mixture(std::vector<CandidateModel> candidates, std::optional<Index> hot = {});

Vector flux_candidate(const Vector& state, const CandidateModel& candidate);
Vector flux_mixture(const Vector& state, const MixtureModel& model);

struct FluxDerivatives {
  Matrix d_state;    // L x p
  Matrix d_theta;    // L x dim(theta)
  Matrix d_weights;  // L x K, column k is candidate k's flux
};

FluxDerivatives flux_derivatives(const Vector& state, const MixtureModel& model);

/// Candidate flux and its Jacobian with respect to the candidate's own
/// parameters (L x num_params). `d_state` is filled when non-null.
void flux_candidate_jacobian(const Vector& state, const CandidateModel& candidate, Vector& flux,
                             Matrix& d_params, Matrix* d_state = nullptr);

}  // namespace regmech
