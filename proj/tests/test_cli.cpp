#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "doctest.h"
#include "sommab/cli.hpp"
#include "sommab/config.hpp"

namespace fs = std::filesystem;
using namespace sommab;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "sommab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string data(const std::string& name) { return std::string(SOMMAB_TEST_DATA) + "/" + name; }

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("sommab-test-" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text) {
  std::ofstream(dir / name) << text;
  return dir / name;
}

}  // namespace

TEST_CASE("bounds subcommand") {
  const auto r = invoke({"bounds", "--M", "2", "--K", "2", "--n", "20000", "--H", "25", "--l", "1"});
  CHECK(r.code == 0);
  CHECK(r.out.find("0.12873") != std::string::npos);
  CHECK(r.out.find("619.23") != std::string::npos);
  CHECK(r.out.find("0.00026481") != std::string::npos);

  const auto bad = invoke({"bounds", "--M", "2", "--K", "2", "--n", "20000", "--H", "25", "--l", "153"});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("l=153") != std::string::npos);

  CHECK(invoke({"bounds", "--M", "2"}).code == 2);
  CHECK(invoke({"bounds", "--n", "20000", "--H", "25", "--a", "1e6"}).code == 2);
  CHECK(invoke({"--help"}).code == 0);
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"frobnicate"}).code == 2);

  TempDir tmp;
  const auto csv = tmp.path / "bounds.csv";
  CHECK(invoke({"bounds", "--n", "20000", "--H", "25", "--max-hm", "62.5", "--out", csv.string()})
            .code == 0);
  const auto text = slurp(csv);
  CHECK(text.rfind("# sommab ", 0) == 0);
  CHECK(text.find("uniform-ucbe,2250,") != std::string::npos);
}

TEST_CASE("bounds from a config") {
  const auto r = invoke({"bounds", "--config", data("explicit.json"), "--n", "5000"});
  CHECK(r.code == 0);
  CHECK(r.out.find("M=2 K=2 n=5000") != std::string::npos);
}

TEST_CASE("run subcommand writes artifacts") {
  TempDir tmp;
  const auto r = invoke({"run", data("explicit.json"), "--out", tmp.path.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto metrics = slurp(tmp.path / "metrics.csv");
  const auto hash = canonical_hash(read_json_file(data("explicit.json")));
  CHECK(metrics.find("# config " + hash) != std::string::npos);
  CHECK(metrics.find("# seed 11") != std::string::npos);
  CHECK(metrics.find("policy,n,lHat,lHat_lo,lHat_hi,eHat,rHat,unionHat,bound") != std::string::npos);
  CHECK(metrics.find("\noracle,400,") != std::string::npos);
  CHECK(fs::exists(tmp.path / "diagnostics.csv"));
  CHECK(fs::exists(tmp.path / "curves.csv"));
  CHECK_FALSE(fs::exists(tmp.path / "network.dot"));

  // identical inputs give identical bytes
  const auto again = tmp.path / "again";
  REQUIRE(invoke({"run", data("explicit.json"), "--out", again.string()}).code == 0);
  CHECK(slurp(again / "metrics.csv") == metrics);
  CHECK(slurp(again / "diagnostics.csv") == slurp(tmp.path / "diagnostics.csv"));
}

TEST_CASE("run on an ssnl config writes the network") {
  TempDir tmp;
  const auto r = invoke({"run", data("ssnl.json"), "--out", tmp.path.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto dot = slurp(tmp.path / "network.dot");
  CHECK(dot.find("// config ") != std::string::npos);
  CHECK(dot.find("\"b\" -> \"a\" [label=\"0.8000\"]") != std::string::npos);
  CHECK(dot.find("\"a\" -> \"b\" [label=\"0.7000\"]") != std::string::npos);
  CHECK(dot.find("\"b\" -> \"d\" [label=\"0.9000\"]") != std::string::npos);
  CHECK(dot.find("\"c\" -> \"d\" [label=\"0.9000\"]") != std::string::npos);
  CHECK(dot.find("-> \"c\"") == std::string::npos);
}

TEST_CASE("config errors exit with code 2") {
  CHECK(invoke({"run", data("both.json")}).code == 2);
  CHECK(invoke({"run", data("missing.json")}).code == 2);

  TempDir tmp;
  const auto unknown = write_file(tmp.path, "unknown.json", R"({"instance": {"b": 1,
    "bandits": [[{"kind": "point", "value": 0.5}, {"kind": "point", "value": 0.4}]], "colour": 1},
    "policies": [{"kind": "uniform"}], "experiment": {"horizons": [10]}})");
  const auto r = invoke({"run", unknown.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("/instance/colour") != std::string::npos);

  const auto bad_p = write_file(tmp.path, "p.json", R"({"instance": {"b": 1,
    "bandits": [[{"kind": "bernoulli", "p": 1.5}, {"kind": "point", "value": 0.4}]]}})");
  const auto p = invoke({"run", bad_p.string()});
  CHECK(p.code == 2);
  CHECK(p.err.find("/instance/bandits/0/0/p") != std::string::npos);

  const auto syntax = write_file(tmp.path, "syntax.json", "{\"instance\": ");
  CHECK(invoke({"run", syntax.string()}).code == 2);
  const auto comment = write_file(tmp.path, "comment.json", "// hi\n{}");
  CHECK(invoke({"run", comment.string()}).code == 2);

  const auto tie = write_file(tmp.path, "tie.json", R"({"instance": {"b": 1,
    "bandits": [[{"kind": "point", "value": 0.5}, {"kind": "point", "value": 0.5}]]},
    "policies": [{"kind": "uniform"}], "experiment": {"horizons": [10]}})");
  CHECK(invoke({"run", tie.string()}).code == 2);

  const auto short_budget = write_file(tmp.path, "short.json", R"({"instance": {"b": 1,
    "bandits": [[{"kind": "point", "value": 0.5}, {"kind": "point", "value": 0.4}]]},
    "policies": [{"kind": "gape", "a": 1, "l": 3}], "experiment": {"horizons": [5]}})");
  CHECK(invoke({"run", short_budget.string()}).code == 2);
}

TEST_CASE("canonical hash ignores formatting and key order") {
  const auto a = nlohmann::json::parse(R"({"x": 1, "y": [1, 2]})");
  const auto b = nlohmann::json::parse("{\"y\":[1,2],\n  \"x\":1}");
  CHECK(canonical_hash(a) == canonical_hash(b));
  CHECK(canonical_hash(a) != canonical_hash(nlohmann::json::parse(R"({"x": 2, "y": [1, 2]})")));
}

TEST_CASE("build-ssnl subcommand") {
  TempDir tmp;
  const auto single = write_file(tmp.path, "single.json", R"({"ssnl": {"b": 1,
    "entities": ["a", "b"], "candidates": {"a": [["b"]], "b": []}}})");
  const auto r = invoke({"build-ssnl", single.string(), "--closure-only"});
  CHECK(r.code == 0);
  CHECK(r.out.find("  b: {a}\n") != std::string::npos);

  const auto pairs = invoke({"build-ssnl", data("pairs.json"), "--closure-only"});
  CHECK(pairs.code == 0);
  CHECK(pairs.out.find("order r = 3") != std::string::npos);
  CHECK(invoke({"build-ssnl", data("pairs.json")}).code == 2);

  const auto orphan = invoke({"build-ssnl", data("orphan.json")});
  CHECK(orphan.code == 2);
  CHECK(orphan.err.find("'c'") != std::string::npos);

  const auto full = invoke({"build-ssnl", data("ssnl.json")});
  CHECK(full.code == 0);
  CHECK(full.out.find("  a: 4\n") != std::string::npos);
  CHECK(full.out.find("order r = 1") != std::string::npos);
  CHECK(full.out.find("size 3: 1") != std::string::npos);

  CHECK(invoke({"build-ssnl", data("explicit.json")}).code == 2);
}

TEST_CASE("export subcommand") {
  const auto json = invoke({"export", data("ssnl.json"), "--format", "json"});
  REQUIRE(json.code == 0);
  const auto doc = nlohmann::json::parse(json.out);
  CHECK(doc["instance"]["bandits"].size() == 4);

  // the exported instance is itself a valid config section
  TempDir tmp;
  auto round = doc;
  round["policies"] = {{{"kind", "uniform"}}};
  round["experiment"] = {{"horizons", {40}}};
  const auto path = write_file(tmp.path, "round.json", round.dump());
  CHECK(invoke({"run", path.string(), "--out", (tmp.path / "o").string()}).code == 0);

  const auto dot = invoke({"export", data("ssnl.json"), "--format", "dot"});
  CHECK(dot.code == 0);
  CHECK(dot.out.find("\"c\" -> \"d\"") != std::string::npos);
  CHECK(invoke({"export", data("explicit.json"), "--format", "dot"}).code == 2);
  CHECK(invoke({"export", data("explicit.json"), "--format", "xml"}).code == 2);
}
