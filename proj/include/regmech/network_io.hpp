#pragma once

#include <string>

#include "regmech/network.hpp"

namespace regmech {

/// Network definition from its JSON text. Schema:
///
///   { "name": "...",
///     "species": ["A", "B"],
///     "constants": { "Vmax_1": {"value": 2, "infer": true, "prior_guess": 1, "prior_scale": 1},
///                    "Km_A": 0.5 },
///     "reactions": [ { "name": "r1", "stoich": {"A": -1, "B": 1},
///                      "rate": {"vmax": "Vmax_1", "substrates": {"A": "Km_A"},
///                               "noncompetitive": {}, "competitive": {}, "activators": {}},
///                      "reverse": { ...same keys as rate... } } ],
///     "mechanisms": [ {"name": "M1", "reaction": "r1", "half": "forward",
///                      "kind": "noncompetitive", "species": "B", "constant": "Ki_B"} ],
///     "initial_state": {"A": 1, "B": 0},
///     "truth_mask": [true] }
///
/// A bare number for a constant means a fixed (not inferred) value whose
/// prior guess is the value itself. Constants keep their file order.
NetworkSpec parse_network(const std::string& json_text, const std::string& source = "network");
NetworkSpec load_network(const std::string& path);

}  // namespace regmech
