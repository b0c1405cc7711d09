#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "regmech/adjoint.hpp"
#include "regmech/common.hpp"
#include "regmech/sde.hpp"

namespace regmech {

/// "# key=value" lines at the top of every output file.
struct Provenance {
  std::vector<std::pair<std::string, std::string>> entries;

  void set(const std::string& key, const std::string& value);
  const std::string* find(const std::string& key) const;
  std::string get(const std::string& key) const;  // UsageError when absent
};

/// Shortest decimal text that round-trips the double (17 significant digits).
std::string format_double(double v);

/// Columns trajectory_id,time,<species...>.
void write_dataset(std::ostream& os, const Dataset& d, const Provenance& prov = {});
Dataset read_dataset(std::istream& is, Provenance* prov = nullptr);
void save_dataset(const std::string& path, const Dataset& d, const Provenance& prov = {});
Dataset load_dataset(const std::string& path, Provenance* prov = nullptr);

struct SampleRow {
  int chain = 0;
  long iteration = 0;
  double log_posterior = 0.0;
  bool accepted = false;
  double weight = 1.0;
  Vector theta;  // natural scale
  Vector w;
};

struct SampleTable {
  std::vector<std::string> theta_names;
  Index num_weights = 0;
  std::vector<SampleRow> rows;
};

/// Columns chain,iteration,log_posterior,accepted,weight,<theta names>,w0..w{K-1}.
void write_samples(std::ostream& os, const SampleTable& t, const Provenance& prov = {});
SampleTable read_samples(std::istream& is, Provenance* prov = nullptr);
void save_samples(const std::string& path, const SampleTable& t, const Provenance& prov = {});
SampleTable load_samples(const std::string& path, Provenance* prov = nullptr);

/// Columns x0_*, xT_*, J_<row>_<col> (row-major), n.
void write_records(std::ostream& os, const std::vector<SensitivityRecord>& records, const Provenance& prov = {});
std::vector<SensitivityRecord> read_records(std::istream& is, Provenance* prov = nullptr);
void save_records(const std::string& path, const std::vector<SensitivityRecord>& records, const Provenance& prov = {});
std::vector<SensitivityRecord> load_records(const std::string& path, Provenance* prov = nullptr);

void save_text(const std::string& path, const std::string& body, const Provenance& prov = {});

}  // namespace regmech
