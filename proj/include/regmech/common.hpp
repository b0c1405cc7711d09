#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace regmech {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IntMatrix = Eigen::MatrixXi;

// Error taxonomy. The CLI maps SpecError/UsageError to exit code 2 and
// NumericError/SimulationError to exit code 3.
class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SimulationError : public NumericError {
 public:
  SimulationError(const std::string& what, long step)
      : NumericError(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based stream derivation: stream(seed, a, b, ...) is a pure
// function of its arguments, so jobs can be scheduled in any order.
template <typename... Ids>
Rng make_stream(std::uint64_t seed, Ids... ids) {
  std::uint64_t state = mix64(seed);
  ((state = mix64(state ^ mix64(static_cast<std::uint64_t>(ids) + 0x632be59bd9b4e019ULL))), ...);
  return Rng(state);
}

// Stable 64-bit FNV-1a, used for labels and config hashes.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline Vector standard_normal(Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(n);
  for (Index i = 0; i < n; ++i) z[i] = normal(rng);
  return z;
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace regmech
