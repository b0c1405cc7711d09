#include "regmech/network_io.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace regmech {

namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& source, const std::string& what) {
  throw SpecError(source + ": " + what);
}

const Json& require(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw SpecError(where + ": missing '" + key + "'");
  return j.at(key);
}

std::vector<RateTerm> parse_terms(const NetworkSpec& spec, const Json& j, const std::string& where) {
  std::vector<RateTerm> out;
  if (j.is_null()) return out;
  if (!j.is_object()) throw SpecError(where + ": expected an object of species -> constant");
  for (const auto& [sp, k] : j.items()) {
    if (!k.is_string()) throw SpecError(where + ": constant for '" + sp + "' must be a name");
    try {
      out.push_back({spec.species_index(sp), spec.constant_index(k.get<std::string>())});
    } catch (const SpecError& e) {
      throw SpecError(where + ": " + e.what());
    }
  }
  return out;
}

RateHalf parse_half(const NetworkSpec& spec, const Json& j, const std::string& where) {
  RateHalf h;
  const Json& v = require(j, "vmax", where);
  if (!v.is_string()) throw SpecError(where + ": vmax must name a constant");
  h.vmax = spec.constant_index(v.get<std::string>());
  auto terms = [&](const char* key) {
    return j.contains(key) ? parse_terms(spec, j.at(key), where + "." + key) : std::vector<RateTerm>{};
  };
  h.substrates = terms("substrates");
  h.noncompetitive = terms("noncompetitive");
  h.competitive = terms("competitive");
  h.activators = terms("activators");
  return h;
}

KineticConstant parse_constant(const std::string& name, const Json& j, const std::string& where) {
  KineticConstant c;
  c.name = name;
  if (j.is_number()) {
    c.value = j.get<double>();
    c.prior_guess = c.value;
    return c;
  }
  if (!j.is_object()) throw SpecError(where + ": constant '" + name + "' must be a number or object");
  c.value = require(j, "value", where + "." + name).get<double>();
  c.inferred = j.value("infer", false);
  c.prior_guess = j.value("prior_guess", c.value);
  c.prior_scale = j.value("prior_scale", 1.0);
  return c;
}

}  // namespace

NetworkSpec parse_network(const std::string& json_text, const std::string& source) {
  Json root;
  try {
    root = Json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(source, std::string("invalid JSON: ") + e.what());
  }
  NetworkSpec spec;
  try {
    spec.name = root.value("name", std::string("network"));
    for (const auto& s : require(root, "species", source)) spec.species.push_back(s.get<std::string>());
    for (std::size_t i = 0; i < spec.species.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (spec.species[i] == spec.species[j]) fail(source, "duplicate species '" + spec.species[i] + "'");
    for (const auto& [name, c] : require(root, "constants", source).items()) {
      for (const auto& existing : spec.constants)
        if (existing.name == name) fail(source, "duplicate constant '" + name + "'");
      spec.constants.push_back(parse_constant(name, c, source + ".constants"));
    }

    const Json& reactions = require(root, "reactions", source);
    const Index p = static_cast<Index>(spec.species.size());
    spec.stoich = IntMatrix::Zero(p, static_cast<Index>(reactions.size()));
    Index l = 0;
    for (const auto& r : reactions) {
      ReactionKinetics rk;
      rk.name = r.value("name", "r" + std::to_string(l + 1));
      const std::string where = source + ".reactions[" + rk.name + "]";
      for (const auto& [sp, n] : require(r, "stoich", where).items()) {
        if (!n.is_number_integer()) fail(where, "stoichiometric coefficient of '" + sp + "' must be an integer");
        spec.stoich(spec.species_index(sp), l) = n.get<int>();
      }
      rk.forward = parse_half(spec, require(r, "rate", where), where + ".rate");
      if (r.contains("reverse") && !r.at("reverse").is_null())
        rk.reverse = parse_half(spec, r.at("reverse"), where + ".reverse");
      spec.reactions.push_back(std::move(rk));
      ++l;
    }

    if (root.contains("mechanisms")) {
      for (const auto& m : root.at("mechanisms")) {
        MechanismDecl d;
        d.name = require(m, "name", source + ".mechanisms").get<std::string>();
        const std::string where = source + ".mechanisms[" + d.name + "]";
        d.reaction = spec.reaction_index(require(m, "reaction", where).get<std::string>());
        const std::string half = m.value("half", std::string("forward"));
        if (half != "forward" && half != "reverse") fail(where, "half must be 'forward' or 'reverse'");
        d.on_reverse = half == "reverse";
        d.kind = parse_mechanism_kind(require(m, "kind", where).get<std::string>());
        d.species = spec.species_index(require(m, "species", where).get<std::string>());
        d.constant = spec.constant_index(require(m, "constant", where).get<std::string>());
        spec.mechanisms.push_back(d);
      }
    }

    if (root.contains("initial_state")) {
      Vector s0 = Vector::Constant(p, -1.0);
      for (const auto& [sp, v] : root.at("initial_state").items()) s0[spec.species_index(sp)] = v.get<double>();
      for (Index i = 0; i < p; ++i)
        if (!(s0[i] >= 0.0)) fail(source, "initial_state needs a nonnegative value for '" + spec.species[i] + "'");
      spec.initial_state = s0;
    }
    if (root.contains("truth_mask")) {
      std::vector<bool> mask;
      for (const auto& b : root.at("truth_mask")) mask.push_back(b.get<bool>());
      spec.truth_mask = mask;
    }
  } catch (const nlohmann::json::exception& e) {
    fail(source, e.what());
  }
  spec.validate();
  return spec;
}

NetworkSpec load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read network file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_network(ss.str(), path);
}

}  // namespace regmech
