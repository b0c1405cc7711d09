#pragma once

#include <algorithm>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "regmech/common.hpp"
#include "regmech/network.hpp"
#include "regmech/network_io.hpp"

namespace regmech::testing {

inline std::string data_path(const std::string& file) { return std::string(REGMECH_DATA_DIR) + "/" + file; }

inline std::shared_ptr<const NetworkSpec> demo_network() {
  return std::make_shared<NetworkSpec>(load_network(data_path("demo_network.json")));
}

inline std::shared_ptr<const NetworkSpec> toy_network() {
  return std::make_shared<NetworkSpec>(load_network(data_path("toy_network.json")));
}

inline std::shared_ptr<const NetworkSpec> parse(const std::string& json) {
  return std::make_shared<NetworkSpec>(parse_network(json, "test"));
}

/// Random network with p species, L irreversible single-substrate reactions
/// and C mechanisms on distinct reactions. Every constant is inferred.
inline std::string random_network_json(Rng& rng, int p, int L, int C) {
  auto pick = [&](int n) { return static_cast<int>(std::uniform_int_distribution<int>(0, n - 1)(rng)); };
  auto value = [&](double lo, double hi) { return lo * std::pow(hi / lo, uniform01(rng)); };
  std::ostringstream os;
  os.precision(17);
  os << "{\"name\":\"random\",\"species\":[";
  for (int i = 0; i < p; ++i) os << (i ? "," : "") << "\"S" << i << "\"";
  os << "],\"constants\":{";
  std::vector<int> substrate(L);
  for (int l = 0; l < L; ++l) {
    substrate[l] = pick(p);
    os << (l ? "," : "") << "\"V" << l << "\":{\"value\":" << value(0.5, 5.0) << ",\"infer\":true,\"prior_guess\":"
       << value(0.5, 5.0) << "},\"K" << l << "\":{\"value\":" << value(1.0, 20.0)
       << ",\"infer\":true,\"prior_guess\":" << value(1.0, 20.0) << "}";
  }
  for (int c = 0; c < C; ++c)
    os << ",\"R" << c << "\":{\"value\":" << value(1.0, 20.0) << ",\"infer\":true,\"prior_guess\":" << value(1.0, 20.0)
       << "}";
  os << "},\"reactions\":[";
  for (int l = 0; l < L; ++l) {
    const int a = substrate[l];
    int b = pick(p);
    os << (l ? "," : "") << "{\"name\":\"r" << l << "\",\"stoich\":{\"S" << a << "\":-1";
    if (b != a) os << ",\"S" << b << "\":1";
    os << "},\"rate\":{\"vmax\":\"V" << l << "\",\"substrates\":{\"S" << a << "\":\"K" << l << "\"}}}";
  }
  os << "],\"mechanisms\":[";
  const char* kinds[] = {"competitive", "noncompetitive", "allosteric"};
  std::vector<std::vector<int>> regulators(L);
  for (int c = 0; c < C; ++c) {
    const int l = c % L;
    // Regulators of one reaction are distinct from its substrate and each other.
    std::vector<int> free;
    for (int i = 0; i < p; ++i)
      if (i != substrate[l] && std::find(regulators[l].begin(), regulators[l].end(), i) == regulators[l].end())
        free.push_back(i);
    if (free.empty()) throw std::invalid_argument("random_network_json: too many mechanisms for p");
    const int s = free[pick(static_cast<int>(free.size()))];
    regulators[l].push_back(s);
    os << (c ? "," : "") << "{\"name\":\"M" << c << "\",\"reaction\":\"r" << l << "\",\"kind\":\"" << kinds[pick(3)]
       << "\",\"species\":\"S" << s << "\",\"constant\":\"R" << c << "\"}";
  }
  os << "],\"initial_state\":{";
  for (int i = 0; i < p; ++i) os << (i ? "," : "") << "\"S" << i << "\":" << value(20.0, 60.0);
  os << "}}";
  return os.str();
}

}  // namespace regmech::testing
