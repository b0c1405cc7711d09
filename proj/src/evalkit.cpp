#include "regmech/evalkit.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "regmech/parallel.hpp"

namespace regmech {

std::vector<double> PredictiveEnsemble::column(Index j) const {
  if (j < 0 || j >= draws.cols()) throw UsageError("predictive ensemble: species index out of range");
  std::vector<double> out(static_cast<std::size_t>(draws.rows()));
  for (Index i = 0; i < draws.rows(); ++i) out[static_cast<std::size_t>(i)] = draws(i, j);
  return out;
}

std::vector<double> PredictiveEnsemble::column(const std::string& name) const {
  for (std::size_t j = 0; j < species.size(); ++j)
    if (species[j] == name) return column(static_cast<Index>(j));
  throw UsageError("predictive ensemble has no species '" + name + "'");
}

PredictiveEnsemble posterior_predictive(const MixtureModel& structure, const std::vector<ParameterDraw>& samples,
                                        const Vector& s0, const SimConfig& sim, double t_eval,
                                        int paths_per_sample, std::uint64_t seed, int jobs) {
  if (samples.empty()) throw UsageError("posterior predictive needs at least one sample");
  if (paths_per_sample < 1) throw UsageError("paths_per_sample must be >= 1");
  const NetworkSpec& net = structure.network();
  PredictiveEnsemble out;
  out.species = net.species;
  out.t_eval = t_eval;
  const auto per = static_cast<Index>(paths_per_sample);
  out.draws.resize(static_cast<Index>(samples.size()) * per, net.num_species());
  parallel_for(samples.size(), jobs, [&](std::size_t g) {
    const MixtureModel model = structure.with_theta(samples[g].theta, samples[g].w);
    for (Index j = 0; j < per; ++j) {
      Rng rng = make_stream(seed, g, j);
      out.draws.row(static_cast<Index>(g) * per + j) = simulate_endpoint(s0, model, sim, t_eval, rng).transpose();
    }
  });
  if (!out.draws.allFinite()) throw NumericError("posterior predictive produced non-finite states");
  return out;
}

PredictiveEnsemble model_predictive(const MixtureModel& model, const Vector& s0, const SimConfig& sim, double t_eval,
                                    Index draws, std::uint64_t seed, int jobs) {
  if (draws < 1) throw UsageError("reference ensemble needs at least one draw");
  PredictiveEnsemble out;
  out.species = model.network().species;
  out.t_eval = t_eval;
  out.draws.resize(draws, model.network().num_species());
  parallel_for(static_cast<std::size_t>(draws), jobs, [&](std::size_t i) {
    Rng rng = make_stream(seed, 0, i);
    out.draws.row(static_cast<Index>(i)) = simulate_endpoint(s0, model, sim, t_eval, rng).transpose();
  });
  return out;
}

KsSummary summarize_ks(const std::vector<double>& values) {
  KsSummary s;
  s.values = values;
  const double R = static_cast<double>(values.size());
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / R;
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / (R - 1.0));
    s.half_width = 1.96 * s.sd / std::sqrt(R);
  }
  return s;
}

const KsSummary& KsReport::at(const std::string& sp, const std::string& method, int m) const {
  auto it = cells.find({sp, method, m});
  if (it == cells.end()) throw UsageError("K-S report has no cell " + sp + "/" + method + "/m=" + std::to_string(m));
  return it->second;
}

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
void push_unique(std::vector<T>& v, const T& x) {
  if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

}  // namespace

std::string KsReport::to_csv() const {
  std::ostringstream os;
  os << "species,method,m,R,mean,sd,half_width,values\n";
  for (const auto& sp : species)
    for (const auto& method : methods)
      for (int m : ms) {
        auto it = cells.find({sp, method, m});
        if (it == cells.end()) continue;
        const KsSummary& s = it->second;
        os << sp << ',' << method << ',' << m << ',' << s.values.size() << ',' << g17(s.mean) << ',' << g17(s.sd)
           << ',' << g17(s.half_width) << ',';
        for (std::size_t i = 0; i < s.values.size(); ++i) os << (i ? ";" : "") << g17(s.values[i]);
        os << '\n';
      }
  return os.str();
}

std::string KsReport::to_table() const {
  std::ostringstream os;
  char buf[64];
  os << "state";
  for (const auto& method : methods)
    for (int m : ms) os << " | " << method << " m=" << m;
  os << '\n';
  for (const auto& sp : species) {
    os << sp;
    for (const auto& method : methods)
      for (int m : ms) {
        auto it = cells.find({sp, method, m});
        if (it == cells.end()) {
          os << " | -";
          continue;
        }
        std::snprintf(buf, sizeof buf, " | %.2f ± %.2f", it->second.mean, it->second.half_width);
        os << buf;
      }
    os << '\n';
  }
  return os.str();
}

KsReport ks_report(const std::map<KsCell, std::vector<double>>& replications,
                   const std::vector<std::string>& species_order, const std::vector<std::string>& method_order) {
  KsReport r;
  r.species = species_order;
  r.methods = method_order;
  for (const auto& [cell, values] : replications) {
    for (double d : values)
      if (!(d >= 0.0 && d <= 1.0)) throw NumericError("K-S statistic outside [0, 1]");
    push_unique(r.species, cell.species);
    push_unique(r.methods, cell.method);
    push_unique(r.ms, cell.m);
    r.cells[cell] = summarize_ks(values);
  }
  std::sort(r.ms.begin(), r.ms.end());
  return r;
}

}  // namespace regmech
