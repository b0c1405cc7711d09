#include "regmech/table_io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace regmech {

void Provenance::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries)
    if (k == key) {
      v = value;
      return;
    }
  entries.emplace_back(key, value);
}

const std::string* Provenance::find(const std::string& key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return &v;
  return nullptr;
}

std::string Provenance::get(const std::string& key) const {
  const std::string* v = find(key);
  if (!v) throw UsageError("file header lacks '" + key + "'");
  return *v;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

void write_header(std::ostream& os, const Provenance& prov) {
  for (const auto& [k, v] : prov.entries) os << "# " << k << '=' << v << '\n';
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, long line) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
    throw UsageError("line " + std::to_string(line) + ": '" + s + "' is not a number");
  return v;
}

long parse_long(const std::string& s, long line) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
    throw UsageError("line " + std::to_string(line) + ": '" + s + "' is not an integer");
  return v;
}

// Reads "# key=value" lines and returns the column header split into cells.
std::vector<std::string> read_preamble(std::istream& is, Provenance* prov, long& line_no) {
  std::string line;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string body = line.substr(line.find_first_not_of("# ") == std::string::npos
                                               ? line.size()
                                               : line.find_first_not_of("# "));
      const auto eq = body.find('=');
      if (prov && eq != std::string::npos) prov->set(body.substr(0, eq), body.substr(eq + 1));
      continue;
    }
    return split(line);
  }
  throw UsageError("file has no column header");
}

bool next_row(std::istream& is, std::vector<std::string>& cells, long& line_no) {
  std::string line;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    cells = split(line);
    return true;
  }
  return false;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw UsageError("cannot write '" + path + "'");
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw UsageError("cannot read '" + path + "'");
  return is;
}

void check_width(const std::vector<std::string>& cells, std::size_t width, long line) {
  if (cells.size() != width)
    throw UsageError("line " + std::to_string(line) + ": expected " + std::to_string(width) + " columns, found " +
                     std::to_string(cells.size()));
}

}  // namespace

void write_dataset(std::ostream& os, const Dataset& d, const Provenance& prov) {
  write_header(os, prov);
  os << "trajectory_id,time";
  for (const auto& s : d.species) {
    if (s.find(',') != std::string::npos) throw UsageError("species name '" + s + "' contains a comma");
    os << ',' << s;
  }
  os << '\n';
  for (std::size_t i = 0; i < d.trajectories.size(); ++i) {
    const auto& tr = d.trajectories[i];
    for (Index h = 0; h < tr.states.rows(); ++h) {
      os << i << ',' << format_double(tr.times[h]);
      for (Index j = 0; j < tr.states.cols(); ++j) os << ',' << format_double(tr.states(h, j));
      os << '\n';
    }
  }
}

Dataset read_dataset(std::istream& is, Provenance* prov) {
  Provenance local;
  Provenance& pv = prov ? *prov : local;
  long line = 0;
  const auto header = read_preamble(is, &pv, line);
  if (header.size() < 3 || header[0] != "trajectory_id" || header[1] != "time")
    throw UsageError("dataset header must start with trajectory_id,time and name at least one species");
  Dataset d;
  d.species.assign(header.begin() + 2, header.end());
  if (const auto* m = pv.find("model")) d.model_id = *m;
  if (const auto* s = pv.find("seed")) d.seed = std::strtoull(s->c_str(), nullptr, 10);
  const Index p = static_cast<Index>(d.species.size());

  std::vector<std::vector<double>> times;
  std::vector<std::vector<Vector>> rows;
  std::vector<std::string> cells;
  while (next_row(is, cells, line)) {
    check_width(cells, header.size(), line);
    const long id = parse_long(cells[0], line);
    if (id < 0) throw UsageError("line " + std::to_string(line) + ": negative trajectory id");
    if (static_cast<std::size_t>(id) != rows.size() && static_cast<std::size_t>(id) + 1 != rows.size())
      throw UsageError("line " + std::to_string(line) + ": trajectory ids must be contiguous and ordered");
    if (static_cast<std::size_t>(id) == rows.size()) {
      rows.emplace_back();
      times.emplace_back();
    }
    Vector s(p);
    for (Index j = 0; j < p; ++j) s[j] = parse_double(cells[static_cast<std::size_t>(j) + 2], line);
    times.back().push_back(parse_double(cells[1], line));
    rows.back().push_back(std::move(s));
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Trajectory tr;
    tr.times = Eigen::Map<const Vector>(times[i].data(), static_cast<Index>(times[i].size()));
    tr.states.resize(static_cast<Index>(rows[i].size()), p);
    for (std::size_t h = 0; h < rows[i].size(); ++h) tr.states.row(static_cast<Index>(h)) = rows[i][h].transpose();
    d.trajectories.push_back(std::move(tr));
  }
  d.validate();
  return d;
}

void save_dataset(const std::string& path, const Dataset& d, const Provenance& prov) {
  auto os = open_out(path);
  write_dataset(os, d, prov);
}

Dataset load_dataset(const std::string& path, Provenance* prov) {
  auto is = open_in(path);
  return read_dataset(is, prov);
}

void write_samples(std::ostream& os, const SampleTable& t, const Provenance& prov) {
  write_header(os, prov);
  os << "chain,iteration,log_posterior,accepted,weight";
  for (const auto& n : t.theta_names) os << ',' << n;
  for (Index k = 0; k < t.num_weights; ++k) os << ",w" << k;
  os << '\n';
  for (const auto& r : t.rows) {
    if (r.theta.size() != static_cast<Index>(t.theta_names.size()) || r.w.size() != t.num_weights)
      throw UsageError("sample row has the wrong width");
    os << r.chain << ',' << r.iteration << ',' << format_double(r.log_posterior) << ',' << (r.accepted ? 1 : 0)
       << ',' << format_double(r.weight);
    for (Index j = 0; j < r.theta.size(); ++j) os << ',' << format_double(r.theta[j]);
    for (Index k = 0; k < r.w.size(); ++k) os << ',' << format_double(r.w[k]);
    os << '\n';
  }
}

SampleTable read_samples(std::istream& is, Provenance* prov) {
  long line = 0;
  const auto header = read_preamble(is, prov, line);
  static const char* fixed[] = {"chain", "iteration", "log_posterior", "accepted", "weight"};
  if (header.size() < 6) throw UsageError("sample header is too short");
  for (std::size_t c = 0; c < 5; ++c)
    if (header[c] != fixed[c]) throw UsageError(std::string("sample header column ") + fixed[c] + " missing");
  SampleTable t;
  std::size_t c = 5;
  for (; c < header.size(); ++c) {
    const std::string& h = header[c];
    if (h.size() > 1 && h[0] == 'w' && h.find_first_not_of("0123456789", 1) == std::string::npos) break;
    t.theta_names.push_back(h);
  }
  t.num_weights = static_cast<Index>(header.size() - c);
  if (t.num_weights < 1) throw UsageError("sample file has no weight columns");
  const Index dth = static_cast<Index>(t.theta_names.size());
  std::vector<std::string> cells;
  while (next_row(is, cells, line)) {
    check_width(cells, header.size(), line);
    SampleRow r;
    r.chain = static_cast<int>(parse_long(cells[0], line));
    r.iteration = parse_long(cells[1], line);
    r.log_posterior = parse_double(cells[2], line);
    r.accepted = parse_long(cells[3], line) != 0;
    r.weight = parse_double(cells[4], line);
    r.theta.resize(dth);
    for (Index j = 0; j < dth; ++j) r.theta[j] = parse_double(cells[5 + static_cast<std::size_t>(j)], line);
    r.w.resize(t.num_weights);
    for (Index k = 0; k < t.num_weights; ++k) r.w[k] = parse_double(cells[c + static_cast<std::size_t>(k)], line);
    t.rows.push_back(std::move(r));
  }
  return t;
}

void save_samples(const std::string& path, const SampleTable& t, const Provenance& prov) {
  auto os = open_out(path);
  write_samples(os, t, prov);
}

SampleTable load_samples(const std::string& path, Provenance* prov) {
  auto is = open_in(path);
  return read_samples(is, prov);
}

void write_records(std::ostream& os, const std::vector<SensitivityRecord>& records, const Provenance& prov) {
  write_header(os, prov);
  const Index d = records.empty() ? 0 : records.front().x0.size();
  for (Index i = 0; i < d; ++i) os << (i ? "," : "") << "x0_" << i;
  for (Index i = 0; i < d; ++i) os << ",xT_" << i;
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) os << ",J_" << i << '_' << j;
  os << (d ? "," : "") << "n\n";
  for (const auto& r : records) {
    if (r.x0.size() != d || r.xT.size() != d || r.J.rows() != d || r.J.cols() != d)
      throw UsageError("sensitivity records have inconsistent dimensions");
    for (Index i = 0; i < d; ++i) os << (i ? "," : "") << format_double(r.x0[i]);
    for (Index i = 0; i < d; ++i) os << ',' << format_double(r.xT[i]);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) os << ',' << format_double(r.J(i, j));
    os << ',' << r.n << '\n';
  }
}

std::vector<SensitivityRecord> read_records(std::istream& is, Provenance* prov) {
  long line = 0;
  const auto header = read_preamble(is, prov, line);
  // width = 2d + d^2 + 1
  const std::size_t w = header.size();
  Index d = 0;
  while (static_cast<std::size_t>(2 * d + d * d + 1) < w) ++d;
  if (static_cast<std::size_t>(2 * d + d * d + 1) != w || header.back() != "n")
    throw UsageError("sensitivity record header has an unexpected layout");
  std::vector<SensitivityRecord> out;
  std::vector<std::string> cells;
  while (next_row(is, cells, line)) {
    check_width(cells, w, line);
    SensitivityRecord r;
    r.x0.resize(d);
    r.xT.resize(d);
    r.J.resize(d, d);
    std::size_t c = 0;
    for (Index i = 0; i < d; ++i) r.x0[i] = parse_double(cells[c++], line);
    for (Index i = 0; i < d; ++i) r.xT[i] = parse_double(cells[c++], line);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) r.J(i, j) = parse_double(cells[c++], line);
    r.n = static_cast<int>(parse_long(cells[c], line));
    if (r.n < 1 || !r.J.allFinite()) throw UsageError("line " + std::to_string(line) + ": invalid record");
    out.push_back(std::move(r));
  }
  return out;
}

void save_records(const std::string& path, const std::vector<SensitivityRecord>& records, const Provenance& prov) {
  auto os = open_out(path);
  write_records(os, records, prov);
}

std::vector<SensitivityRecord> load_records(const std::string& path, Provenance* prov) {
  auto is = open_in(path);
  return read_records(is, prov);
}

void save_text(const std::string& path, const std::string& body, const Provenance& prov) {
  auto os = open_out(path);
  write_header(os, prov);
  os << body;
}

}  // namespace regmech
