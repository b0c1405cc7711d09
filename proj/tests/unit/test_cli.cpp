#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "doctest.h"
#include "regmech/cli.hpp"
#include "regmech/table_io.hpp"
#include "support.hpp"

using namespace regmech;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Workspace {
  fs::path dir;
  fs::path config;

  explicit Workspace(const std::string& name, const std::string& extra = "",
                     const std::string& evaluate = R"({"t_eval": 12, "reference_draws": 400, "predictive_draws": 200,
                                                      "key_species": {"X": "X", "Y": "Y"}})") {
    dir = fs::temp_directory_path() / ("regmech_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    config = dir / "run.json";
    std::ofstream os(config);
    os << R"({"network": ")" << regmech::testing::data_path("toy_network.json") << R"(",
      "dataset": {"m": 3}, "sim": {"horizon": 12, "substeps": 5},
      "mala": {"warmup": 40, "samples": 25, "chains": 2},
      "adjoint": {"warmup": 10, "g_meta": 2, "replicates": 1, "total_samples": 8, "samples_per_chain": 2,
                  "hessian_stride": 5},
      "abc": {"proposals": 40, "accept_quantile": 0.25},
      "seed": 5, "output": "out", "evaluate": )"
       << evaluate << extra << "}";
  }

  int run(std::vector<std::string> args) const {
    args.insert(args.begin(), "regmech-cli");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return cli::run(static_cast<int>(argv.size()), argv.data());
  }
  fs::path out(const std::string& f) const { return dir / "out" / f; }
};

}  // namespace

TEST_CASE("simulate writes a byte-identical dataset per seed") {
  Workspace ws("simulate");
  REQUIRE(ws.run({"simulate", "--config", ws.config.string()}) == 0);
  const std::string first = read_file(ws.out("dataset_m3_r0.csv"));
  REQUIRE(ws.run({"simulate", "--config", ws.config.string()}) == 0);
  CHECK(read_file(ws.out("dataset_m3_r0.csv")) == first);
  Provenance prov;
  const Dataset d = load_dataset(ws.out("dataset_m3_r0.csv").string(), &prov);
  CHECK(d.size() == 3);
  CHECK(d.trajectories[0].states.rows() == 13);
  CHECK(prov.get("seed") == "5");
  CHECK(!prov.get("config_hash").empty());
  REQUIRE(ws.run({"simulate", "--config", ws.config.string(), "--seed", "6"}) == 0);
  CHECK(read_file(ws.out("dataset_m3_r0.csv")) != first);
}

TEST_CASE("infer writes samples and diagnostics, deterministically") {
  Workspace ws("infer");
  for (const char* method : {"mala", "adjoint-mala", "abc"}) {
    REQUIRE(ws.run({"infer", "--config", ws.config.string(), "--method", method}) == 0);
    const std::string tag = std::string(method) + "_m3_r0";
    const std::string samples = read_file(ws.out("samples_" + tag + ".csv"));
    const std::string diag = read_file(ws.out("diagnostics_" + tag + ".json"));
    Provenance prov;
    const SampleTable t = load_samples(ws.out("samples_" + tag + ".csv").string(), &prov);
    CHECK(!t.rows.empty());
    CHECK(prov.get("method") == method);
    const auto j = nlohmann::json::parse(diag);
    CHECK(j.at("seed").get<int>() == 5);
    CHECK(j.contains("config_hash"));
    CHECK(fs::exists(ws.out("records_" + tag + ".csv")) == (std::string(method) == "adjoint-mala"));
    REQUIRE(ws.run({"infer", "--config", ws.config.string(), "--method", method, "--jobs", "3"}) == 0);
    CHECK(read_file(ws.out("samples_" + tag + ".csv")) == samples);
  }
  REQUIRE(ws.run({"simulate", "--config", ws.config.string()}) == 0);
  REQUIRE(ws.run({"infer", "--config", ws.config.string(), "--data", ws.out("dataset_m3_r0.csv").string()}) == 0);
  REQUIRE(ws.run({"sensitivity", "--config", ws.config.string()}) == 0);
  CHECK(load_records(ws.out("records_adjoint-mala_m3_r0.csv").string()).size() == 2);
}

TEST_CASE("evaluate reports finite half-widths over replications") {
  Workspace ws("evaluate");
  std::vector<std::string> args{"evaluate", "--config", ws.config.string()};
  for (const char* r : {"0", "1"}) {
    REQUIRE(ws.run({"infer", "--config", ws.config.string(), "--replication", r}) == 0);
    args.push_back("--samples");
    args.push_back(ws.out(std::string("samples_mala_m3_r") + r + ".csv").string());
  }
  REQUIRE(ws.run(args) == 0);
  const auto summary = nlohmann::json::parse(read_file(ws.out("ks_summary.json")));
  REQUIRE(summary.at("cells").size() == 2);
  for (const auto& cell : summary.at("cells")) {
    CHECK(cell.at("R").get<int>() == 2);
    CHECK(std::isfinite(cell.at("half_width").get<double>()));
  }
  CHECK(read_file(ws.out("ks_table.txt")).find("±") != std::string::npos);
}

TEST_CASE("samples compared against themselves") {
  Workspace ws("self", "", R"({"t_eval": 12, "key_species": {"X": "X", "Y": "Y"}})");
  REQUIRE(ws.run({"infer", "--config", ws.config.string()}) == 0);
  const std::string s = ws.out("samples_mala_m3_r0.csv").string();
  REQUIRE(ws.run({"evaluate", "--config", ws.config.string(), "--samples", s, "--reference", s}) == 0);
  const auto summary = nlohmann::json::parse(read_file(ws.out("ks_summary.json")));
  for (const auto& cell : summary.at("cells")) CHECK(cell.at("mean").get<double>() < 0.05);
}

TEST_CASE("exit codes") {
  Workspace ws("errors");
  CHECK(ws.run({"evaluate", "--config", ws.config.string(), "--samples", (ws.dir / "missing.csv").string()}) == 2);
  CHECK(ws.run({"simulate"}) == 2);
  CHECK(ws.run({"simulate", "--config", (ws.dir / "nope.json").string()}) == 2);
  CHECK(ws.run({"infer", "--config", ws.config.string(), "--method", "nuts"}) == 2);
  Workspace bad("badkey", R"(, "bogus": 1)");
  CHECK(bad.run({"simulate", "--config", bad.config.string()}) == 2);
  Workspace badnet("badnet");
  {
    std::ofstream os(badnet.dir / "net.json");
    os << R"({"name": "x", "species": ["A"], "constants": {"V": -1},
      "reactions": [{"name": "r", "stoich": {"A": 1}, "rate": {"vmax": "V"}}], "initial_state": {"A": 1}})";
    std::ofstream cfg(badnet.config);
    cfg << R"({"network": "net.json"})";
  }
  CHECK(badnet.run({"simulate", "--config", badnet.config.string()}) == 2);
}

TEST_CASE("config hash ignores jobs and output") {
  const std::string base = R"({"network": "n.json", "seed": 3)";
  const auto a = cli::parse_config(base + "}");
  const auto b = cli::parse_config(base + R"(, "jobs": 4, "output": "elsewhere"})");
  const auto c = cli::parse_config(R"({"network": "n.json", "seed": 4})");
  CHECK(a.hash == b.hash);
  CHECK(a.hash != c.hash);
  CHECK_THROWS_AS(cli::parse_config(R"({"network": "n.json", "mala": {"step": -1}})"), UsageError);
  CHECK_THROWS_AS(cli::parse_config("{not json"), UsageError);
}
