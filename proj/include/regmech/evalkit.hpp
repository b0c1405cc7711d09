#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "regmech/common.hpp"
#include "regmech/network.hpp"
#include "regmech/sde.hpp"

namespace regmech {

/// Pooled endpoint draws s_t, one row per draw.
struct PredictiveEnsemble {
  std::vector<std::string> species;
  double t_eval = 0.0;
  Matrix draws;  // N x p

  Index size() const { return draws.rows(); }
  std::vector<double> column(Index species_index) const;
  std::vector<double> column(const std::string& name) const;
};

struct ParameterDraw {
  Vector theta;  // natural scale
  Vector w;
};

/// Simulates paths_per_sample endpoints per posterior draw; draw g, path j
/// uses stream (seed, g, j).
PredictiveEnsemble posterior_predictive(const MixtureModel& structure, const std::vector<ParameterDraw>& samples,
                                        const Vector& s0, const SimConfig& sim, double t_eval,
                                        int paths_per_sample, std::uint64_t seed, int jobs = 1);

/// Reference predictive of a single fixed model.
PredictiveEnsemble model_predictive(const MixtureModel& model, const Vector& s0, const SimConfig& sim, double t_eval,
                                    Index draws, std::uint64_t seed, int jobs = 1);

/// Two-sample sup-distance between empirical CDFs by a merged sweep over
/// the sorted samples (ties advance both sides together).
template <typename A, typename B>
double ks_statistic(const A& a, const B& b) {
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  if (x.empty() || y.empty()) throw UsageError("ks_statistic needs two non-empty samples");
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  return d;
}

/// Mean, sample standard deviation and 1.96 S_D / sqrt(R) over replications.
struct KsSummary {
  std::vector<double> values;
  double mean = 0.0;
  double sd = 0.0;
  double half_width = 0.0;
};

KsSummary summarize_ks(const std::vector<double>& values);

struct KsCell {
  std::string species;  // display label
  std::string method;
  int m = 0;
};

inline bool operator<(const KsCell& a, const KsCell& b) {
  return std::tie(a.species, a.method, a.m) < std::tie(b.species, b.method, b.m);
}

struct KsReport {
  std::vector<std::string> species;  // row order
  std::vector<std::string> methods;  // column order
  std::vector<int> ms;
  std::map<KsCell, KsSummary> cells;

  const KsSummary& at(const std::string& species, const std::string& method, int m) const;
  /// Long-form delimited rows: species,method,m,R,mean,sd,half_width,values...
  std::string to_csv() const;
  /// Rows are species; columns method x m as "mean ± half-width".
  std::string to_table() const;
};

/// Per (species, method, m) list of D values across the R replications.
/// Rows and columns follow the given orders; labels not listed are appended
/// in sorted order.
KsReport ks_report(const std::map<KsCell, std::vector<double>>& replications,
                   const std::vector<std::string>& species_order = {},
                   const std::vector<std::string>& method_order = {});

}  // namespace regmech
