#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <sstream>

#include <sys/wait.h>

#include "matgraph/experiments.hpp"
#include "matgraph/util.hpp"
#include "support.hpp"

using namespace matgraph;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

std::string cli_path() {
  const char* p = std::getenv("MATGRAPH_CLI");
  REQUIRE_MESSAGE(p != nullptr, "MATGRAPH_CLI must point at the matgraph binary");
  return p;
}

/// Runs the CLI with the given argument string; stderr goes to `err` if set.
Run cli(const std::string& args, const fs::path& err = "/dev/null") {
  const std::string cmd = "'" + cli_path() + "' " + args + " 2>'" + err.string() + "'";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, pipe)) > 0;) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

/// n named bodies in a chain of contacts, all under the root.
json chain_assembly(const std::string& id, int n) {
  json bodies = json::object(), contacts = json::array(), root = json::array();
  for (int i = 0; i < n; ++i) {
    const std::string uuid = id + "-" + std::to_string(i);
    bodies[uuid] = {{"name", "Plate " + std::to_string(i)},
                    {"physical_properties",
                     {{"surface_area", 0.01 * (i + 1)}, {"volume", 1e-5 * (i + 1)}, {"center_of_mass", {{"x", i}, {"y", 0}, {"z", 0}}}}},
                    {"material_id", i % 2 ? "PrismMaterial-002" : "PrismMaterial-040"},
                    {"appearance_id", "Prism-DefaultAppearance"},
                    {"is_visible", true}};
    root.push_back(uuid);
    if (i > 0) contacts.push_back({{"body_one", id + "-" + std::to_string(i - 1)}, {"body_two", uuid}});
  }
  return {{"assembly_id", id},
          {"bodies", bodies},
          {"tree", {{"bodies", root}, {"occurrences", json::array()}}},
          {"contacts", contacts},
          {"joints", json::array()},
          {"as_built_joints", json::array()},
          {"meta", {{"category", "Misc"}, {"industry", "Other"}, {"products", json::array()}}}};
}

const std::vector<std::string> kSubcommands{"synth", "ingest", "build-graphs", "stats", "train",
                                            "evaluate", "ablate", "experiment", "grid", "serve"};

}  // namespace

TEST_CASE("help text matches the golden files") {
  const fs::path golden = fs::path(MATGRAPH_GOLDEN_DIR) / "help";
  std::vector<std::pair<std::string, std::string>> pages{{"matgraph", "--help"}};
  for (const auto& s : kSubcommands) pages.push_back({s, s + " --help"});
  for (const auto& [name, args] : pages) {
    CAPTURE(name);
    const auto r = cli(args);
    CHECK(r.code == 0);
    const fs::path file = golden / (name + ".txt");
    if (std::getenv("MATGRAPH_UPDATE_GOLDEN")) write_text_file(file, r.out);
    REQUIRE(fs::exists(file));
    CHECK(r.out == read_text_file(file));
  }
}

TEST_CASE("usage errors exit with 2, failures with 1") {
  CHECK(cli("").code == 2);
  CHECK(cli("--no-such-flag synth").code == 2);
  CHECK(cli("synth --graphs 0").code == 2);
  CHECK(cli("synth --kind random").code == 2);
  CHECK(cli("ingest --catalog /nonexistent.json --assemblies /tmp").code == 2);
  CHECK(cli("train").code == 2);

  testing::TempDir dir("cli-fail");
  write_text_file(dir / "catalog.json", "{ not json");
  fs::create_directories(dir / "asm");
  const auto err = dir / "err.txt";
  const auto r = cli("--out-dir " + q(dir / "out") + " ingest --assemblies " + q(dir / "asm") + " --catalog " +
                         q(dir / "catalog.json"),
                     err);
  CHECK(r.code == 1);
  CHECK(read_text_file(err).find("error") != std::string::npos);
}

TEST_CASE("ingest prints the tally and writes records") {
  testing::TempDir dir("cli-ingest");
  const auto r = cli("--out-dir " + q(dir.path()) + " ingest --assemblies " + q(testing::fixture("ingest")) +
                     " --catalog " + q(testing::fixture("catalog.json")));
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string first, second;
  std::getline(lines, first);
  std::getline(lines, second);
  CHECK(first == "parsed 4 kept 3 dropped 1");
  CHECK(second.rfind("  dropped defaults: ", 0) == 0);
  const json records = json::parse(read_text_file(dir / "records.json"));
  CHECK(records.at("kept_count") == 3);
  CHECK(records.at("assemblies").size() == 3);
}

TEST_CASE("stats over graphs of three, four and five nodes") {
  testing::TempDir dir("cli-stats");
  fs::create_directories(dir / "asm");
  for (int n : {3, 4, 5}) write_text_file(dir / ("asm/a" + std::to_string(n) + ".json"), chain_assembly("a" + std::to_string(n), n).dump());
  write_text_file(dir / "split.json", R"({"seed": 0, "test_ids": []})");
  const std::string out = "--out-dir " + q(dir.path()) + " ";
  REQUIRE(cli(out + "ingest --assemblies " + q(dir / "asm") + " --catalog " + q(testing::fixture("catalog.json"))).code == 0);
  REQUIRE(cli(out + "build-graphs --records " + q(dir / "records.json") + " --catalog " +
              q(testing::fixture("catalog.json")) + " --split " + q(dir / "split.json"))
              .code == 0);
  const auto r = cli(out + "stats --corpus " + q(dir / "corpus"));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("graphs 3 nodes 12 edges 18\n") != std::string::npos);
  CHECK(r.out.find("mean nodes 4.000 max 5 std 0.816\n") != std::string::npos);
  const json s = json::parse(read_text_file(dir / "stats.json"));
  CHECK(s.at("node_counts").at("mean") == 4.0);
  CHECK(fs::exists(dir / "stats.md"));
}

TEST_CASE("synth, train and evaluate end to end") {
  testing::TempDir dir("cli-smoke");
  const std::string out = "--seed 5 --out-dir " + q(dir.path()) + " ";
  REQUIRE(cli(out + "synth --graphs 20").code == 0);
  for (const char* f : {"catalog.json", "semantic.tsv", "split.json"}) CHECK(fs::exists(dir / f));
  REQUIRE(cli(out + "ingest --assemblies " + q(dir / "assemblies") + " --catalog " + q(dir / "catalog.json")).code == 0);
  REQUIRE(cli(out + "build-graphs --records " + q(dir / "records.json") + " --catalog " + q(dir / "catalog.json") +
              " --split " + q(dir / "split.json") + " --semantic " + q(dir / "semantic.tsv"))
              .code == 0);
  const auto t = cli(out + "train --corpus " + q(dir / "corpus") + " --layers 2 --hidden 16 --epochs 3");
  REQUIRE(t.code == 0);
  CHECK(t.out.find("epochs 3 ") == 0);
  for (const char* f : {"model.ckpt", "history.csv", "train.json"}) CHECK(fs::exists(dir / f));

  const auto e = cli(out + "evaluate --corpus " + q(dir / "corpus") + " --checkpoint " + q(dir / "model.ckpt"));
  REQUIRE(e.code == 0);
  CHECK(e.out.find("micro_f1") != std::string::npos);
  const std::string csv = read_text_file(dir / "metrics.csv");
  CHECK(csv.rfind(std::string(kMetricsCsvHeader) + "\n", 0) == 0);
  const json report = json::parse(read_text_file(dir / "report.json"));
  CHECK(report.at("split") == "test");
  CHECK(report.at("topk").size() == 3);

  // Same seed, same bytes.
  testing::TempDir again("cli-smoke2");
  fs::copy(dir / "corpus", again / "corpus", fs::copy_options::recursive);
  const std::string out2 = "--seed 5 --out-dir " + q(again.path()) + " ";
  REQUIRE(cli(out2 + "train --corpus " + q(again / "corpus") + " --layers 2 --hidden 16 --epochs 3").code == 0);
  REQUIRE(cli(out2 + "evaluate --corpus " + q(again / "corpus") + " --checkpoint " + q(again / "model.ckpt")).code == 0);
  CHECK(read_text_file(again / "metrics.csv") == csv);

  // The input protocol travels with the checkpoint; a broken file is refused.
  REQUIRE(cli(out + "train --corpus " + q(dir / "corpus") + " --layers 1 --hidden 8 --epochs 1 --tier-depth 1").code == 0);
  CHECK(cli("--out-dir " + q(dir / "tmp") + " evaluate --corpus " + q(dir / "corpus") + " --checkpoint " +
            q(dir / "model.ckpt"))
            .code == 0);  // the protocol is read back from the checkpoint
  write_text_file(dir / "broken.ckpt", "garbage");
  CHECK(cli(out + "evaluate --corpus " + q(dir / "corpus") + " --checkpoint " + q(dir / "broken.ckpt")).code == 1);
}
