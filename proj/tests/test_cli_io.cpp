#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mmc/cli.hpp"
#include "mmc/suite.hpp"

using namespace mmc;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "mmcalc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mmc_cli_tests";
  fs::create_directories(dir);
  return dir / name;
}

Verdict sample_verdict() {
  Verdict v;
  v.name = "sample";
  v.anchor = "integration by parts";
  v.lhs = 1.25;
  v.rhs = -3.5e-7;
  v.gap = 0.1;
  v.tol = 0.2;
  v.pass = true;
  v.meta = {{"h", 0.5}, {"seed", 42}, {"spaces", {"a", "b"}}};
  return v;
}

}  // namespace

TEST_CASE("empty report", "[cli_io]") { CHECK(emit_report({}) == "{\"verdicts\":[]}"); }

TEST_CASE("verdict JSON round-trips byte for byte", "[cli_io]") {
  const Verdict v = sample_verdict();
  const std::string once = emit_report({v});
  const Verdict back = verdict_from_json(json::parse(once)["verdicts"][0]);
  CHECK(emit_report({back}) == once);
  CHECK(back.name == v.name);
  CHECK(back.meta == v.meta);
  // Keys are sorted.
  CHECK(once.find("\"anchor\"") < once.find("\"gap\""));
  CHECK(once.find("\"gap\"") < once.find("\"tol\""));
}

TEST_CASE("exact and refined verdict logic", "[cli_io]") {
  TolPolicy pol;
  Measurement m;
  m.gap = 5e-11;
  CHECK(exact_verdict("a", "x", m, 1e-10, pol).pass);
  m.gap = 2e-10;
  CHECK_FALSE(exact_verdict("a", "x", m, 1e-10, pol).pass);
  pol.scale = 3.0;
  CHECK(exact_verdict("a", "x", m, 1e-10, pol).pass);

  TolPolicy p2;
  Measurement coarse, fine;
  coarse.gap = 0.1;
  coarse.h = 0.2;
  fine.gap = 0.07;
  fine.h = 0.1;
  CHECK(refined_verdict("r", "x", {coarse, fine}, p2).pass);
  fine.gap = 0.08;
  CHECK_FALSE(refined_verdict("r", "x", {coarse, fine}, p2).pass);
  fine.gap = 1e-12;
  coarse.gap = 1e-12;
  CHECK(refined_verdict("r", "x", {coarse, fine}, p2).pass);  // converged floor
  Measurement single;
  single.gap = 0.05;
  single.h = 0.1;
  CHECK(refined_verdict("r", "x", {single}, p2).pass);
  single.gap = 0.2;
  CHECK_FALSE(refined_verdict("r", "x", {single}, p2).pass);
  CHECK_FALSE(all_pass({exact_verdict("a", "x", single, 0.1, p2)}));
}

TEST_CASE("suite report lists each criterion once", "[cli_io]") {
  std::vector<CriterionReport> reports;
  for (int id = 1; id <= kCriteria; ++id) {
    CriterionReport r;
    r.id = id;
    r.name = criterion_name(id);
    r.space = "flat_torus:n=4";
    r.skipped = id == 3;
    if (r.skipped) r.reason = "needs a sphere";
    reports.push_back(r);
  }
  const json j = json::parse(emit_suite_report(reports));
  REQUIRE(j["criteria"].size() == kCriteria);
  std::set<int> ids;
  for (const auto& c : j["criteria"]) ids.insert(c["id"].get<int>());
  CHECK(ids.size() == kCriteria);
  CHECK(suite_pass(reports));

  for (auto& r : reports) r.skipped = true;
  CHECK_FALSE(suite_pass(reports));
  CHECK(criterion_inapplicable(2, build_space("icosphere:subdiv=0")).has_value());
  CHECK_FALSE(criterion_inapplicable(2, build_space("flat_torus:n=4")).has_value());
  CHECK(criterion_inapplicable(3, build_space("icosphere:subdiv=0")) == std::nullopt);
}

TEST_CASE("every criterion names known checks", "[cli_io]") {
  const std::vector<std::string> names = check_names();
  const std::set<std::string> known(names.begin(), names.end());
  for (int id = 1; id <= kCriteria; ++id)
    for (const auto& c : criterion_checks(id)) CHECK(known.count(c) == 1);
  CHECK_THROWS(criterion_checks(0));
}

TEST_CASE("usage errors exit with 2", "[cli_io]") {
  CHECK(run({}).code == exit_usage);
  CHECK(run({"betti", "--space", "flat_torus:n=4", "--bogus"}).code == exit_usage);
  CHECK(run({"no-such-command"}).code == exit_usage);
  CHECK(run({"space"}).code == exit_usage);  // --space is required
  CHECK(run({"space", "--space", "nope:n=3"}).code == exit_usage);
  CHECK(run({"space", "--space", "flat_torus:n=4", "--refine", "3"}).code == exit_usage);
  CHECK(run({"space", "--space", "flat_torus:n=4", "--tol-scale", "-1"}).code == exit_usage);
  CHECK(run({"bb", "--space", "icosphere:subdiv=1", "--refine", "1"}).code == exit_usage);
  CHECK(run({"--help"}).code == exit_ok);
}

TEST_CASE("space subcommand summary", "[cli_io]") {
  const Run r = run({"space", "--space", "flat_torus:n=4", "--refine", "1"});
  REQUIRE(r.code == exit_ok);
  const json j = json::parse(r.out);
  CHECK(j["command"] == "space");
  CHECK(j["seed"] == 42);
  CHECK(j["pass"] == true);
  CHECK(j.dump(2) + "\n" == r.out);
}

TEST_CASE("betti subcommand on a sphere", "[cli_io]") {
  const fs::path csv = scratch("betti.csv"), rep = scratch("betti.json");
  const Run r = run({"betti", "--space", "icosphere:subdiv=1", "--refine", "1", "--csv", csv.string(), "--report",
                     rep.string()});
  REQUIRE(r.code == exit_ok);
  const json j = json::parse(r.out);
  CHECK(j["betti"] == json::array({1, 0, 1}));
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("vertex,x,y,z,mass", 0) == 0);
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 42);
  std::ifstream rin(rep);
  CHECK(json::parse(rin) == j);
}

TEST_CASE("failed verdicts exit with 1", "[cli_io]") {
  // A torus at a wrong declared curvature violates the Bakry-Emery contraction.
  const Run r = run({"be-check", "--space", "flat_torus:n=8", "--kappa", "5", "--refine", "1"});
  CHECK(r.code == exit_failed);
  CHECK(json::parse(r.out)["pass"] == false);
}

TEST_CASE("mesh files load", "[cli_io]") {
  const fs::path off = scratch("tetra.off");
  {
    std::ofstream o(off);
    o << "OFF\n4 4 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n";
  }
  const TriMesh m = read_off(off.string());
  CHECK(m.vertices.size() == 4);
  CHECK(m.faces.size() == 4);
  const DiscreteSpace s = build_space("mesh_file:path=" + off.string());
  CHECK(s.nv == 4);
  CHECK(s.nc == 4);
  CHECK_NOTHROW(s.validate());
  CHECK_THROWS(read_off(scratch("missing.off").string()));
}
