// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "glowcast/app/cli.hpp"
#include "glowcast/app/pipeline.hpp"
#include "glowcast/model/seq2seq.hpp"

using namespace glowcast;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Fresh scratch area with GLOWCAST_RUN_DIR pointing inside it.
struct Scratch {
  fs::path root;
  explicit Scratch(const std::string& name) : root(fs::temp_directory_path() / ("glowcast_cli_" + name)) {
    fs::remove_all(root);
    fs::create_directories(root);
    setenv("GLOWCAST_RUN_DIR", (root / "runs").c_str(), 1);
  }
  ~Scratch() { fs::remove_all(root); }

  std::vector<fs::path> runs() const {
    std::vector<fs::path> out;
    if (fs::exists(root / "runs"))
      for (const auto& e : fs::directory_iterator(root / "runs")) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
  }
  fs::path newest_with(const std::string& file) const {
    fs::path best;
    for (const fs::path& r : runs())
      if (fs::exists(r / file) && (best.empty() || fs::last_write_time(r / file) >= fs::last_write_time(best / file)))
        best = r;
    REQUIRE(!best.empty());
    return best / file;
  }
};

const std::vector<std::string> kTinyModel = {"--hidden", "4", "--heads", "2", "--embed", "3",
                                             "--epochs", "2", "--patience", "1", "--seed", "5"};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("synth writes deterministic panel and graph files") {
  Scratch s("synth");
  const auto a = run({"synth", "--n", "8", "--days", "2000", "--seed", "7", "--out", (s.root / "a").string()});
  const auto b = run({"synth", "--n", "8", "--days", "2000", "--seed", "7", "--out", (s.root / "b").string()});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(slurp(s.root / "a/panel.csv") == slurp(s.root / "b/panel.csv"));
  CHECK(slurp(s.root / "a/graph.csv") == slurp(s.root / "b/graph.csv"));

  std::ifstream graph(s.root / "a/graph.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(graph, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 7);
    ++rows;
  }
  CHECK(rows == 8);
  std::ifstream panel(s.root / "a/panel.csv");
  std::getline(panel, line);
  CHECK(line == "date,S0,S1,S2,S3,S4,S5,S6,S7");

  SUBCASE("default output goes to a fresh run directory") {
    REQUIRE(run({"synth", "--n", "2", "--days", "50", "--seed", "3"}).code == 0);
    REQUIRE(s.runs().size() == 1);
    CHECK(s.runs()[0].filename().string().ends_with("_seed3"));
    CHECK(fs::exists(s.runs()[0] / "panel.csv"));
  }
}

TEST_CASE("usage errors exit nonzero") {
  Scratch s("usage");
  CHECK(run({"synth", "--n", "0"}).code != 0);
  CHECK(run({}).code != 0);
  CHECK(run({"frobnicate"}).code != 0);
  CHECK(run({"evaluate", "--checkpoint", (s.root / "missing.bin").string()}).code != 0);
  CHECK(run({"predict", "--checkpoint", (s.root / "missing.bin").string()}).code != 0);
  CHECK(run({"train", "--hidden", "4"}).code == kExitFailure);  // no data
  CHECK(run({"synth", "--help"}).code == 0);
}

TEST_CASE("report-params matches count_parameters") {
  Scratch s("params");
  const auto r = run({"report-params", "--hidden", "1", "--heads", "1", "--embed", "1"});
  REQUIRE(r.code == 0);
  ModelConfig micro;
  micro.hidden_width = micro.heads = micro.embed_width = 1;
  const std::string expect = "total " + std::to_string(count_parameters(Seq2SeqModel::init(micro))) + "\n";
  CHECK(r.out.ends_with(expect));

  const auto big = run({"report-params", "--stations", "186"});
  ModelConfig paper;
  paper.stations = 186;
  CHECK(big.out.ends_with("total " + std::to_string(count_parameters(Seq2SeqModel::init(paper))) + "\n"));
}

TEST_CASE("train, evaluate, predict and report-graph on synthetic data") {
  Scratch s("e2e");
  const std::string data = (s.root / "d/panel.csv").string();
  REQUIRE(run({"synth", "--n", "3", "--days", "300", "--seed", "2", "--out", (s.root / "d").string()}).code == 0);

  const auto t = run(concat({"train", "--data", data}, kTinyModel));
  REQUIRE(t.code == 0);
  const fs::path ckpt = s.newest_with("checkpoint.bin");
  const json echoed = json::parse(slurp(ckpt.parent_path() / "config.json"));
  CHECK(echoed.at("model").at("hidden_width") == 4);
  CHECK(echoed.at("seed") == 5);
  CHECK(fs::exists(ckpt.parent_path() / "history.csv"));

  const fs::path dump = s.root / "pred.csv";
  const auto e = run({"evaluate", "--checkpoint", ckpt.string(), "--dump-predictions", dump.string()});
  REQUIRE(e.code == 0);
  const json metrics = json::parse(slurp(s.newest_with("metrics.json")));
  REQUIRE(metrics.at("reports").size() == 3);
  CHECK(metrics.at("reports")[0].at("method") == "TransGlow");
  CHECK(metrics.at("reports")[1].at("method") == "HA");
  CHECK(metrics.at("reports")[2].at("method") == "VAR");
  for (const auto& r : metrics.at("reports")) CHECK(r.at("horizons").size() == 3);
  const std::string csv = slurp(dump);
  CHECK(csv.starts_with("issued,step,date,station,truth,prediction\n"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') ==
        1 + static_cast<long>(metrics.at("test_windows").get<std::size_t>() * 12 * 3));

  SUBCASE("predict emits one row per station and step") {
    const fs::path out = s.root / "fc.csv";
    REQUIRE(run({"predict", "--checkpoint", ckpt.string(), "--horizon", "12", "--out", out.string()}).code == 0);
    std::ifstream in(out);
    std::string line;
    std::getline(in, line);
    CHECK(line == "station,date,step,prediction");
    std::map<std::string, int> per_station;
    while (std::getline(in, line)) ++per_station[line.substr(0, line.find(','))];
    CHECK(per_station == std::map<std::string, int>{{"S0", 12}, {"S1", 12}, {"S2", 12}});
    CHECK(run({"predict", "--checkpoint", ckpt.string(), "--horizon", "13"}).code == kExitFailure);
  }
  SUBCASE("report-graph prints a row-stochastic matrix") {
    const auto g = run({"report-graph", "--checkpoint", ckpt.string()});
    REQUIRE(g.code == 0);
    std::istringstream in(g.out);
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
      double sum = 0;
      std::istringstream cells(line);
      std::string cell;
      while (std::getline(cells, cell, ',')) sum += std::stod(cell);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      ++rows;
    }
    CHECK(rows == 3);
  }
  SUBCASE("the echoed config reproduces the run") {
    const std::string first = slurp(ckpt);
    REQUIRE(run({"train", "--config", (ckpt.parent_path() / "config.json").string()}).code == 0);
    const fs::path again = s.newest_with("checkpoint.bin");
    REQUIRE(again != ckpt);
    CHECK(slurp(again) == first);
  }
}

TEST_CASE("flags override the JSON config") {
  Scratch s("override");
  REQUIRE(run({"synth", "--n", "2", "--days", "200", "--seed", "4", "--out", (s.root / "d").string()}).code == 0);
  const fs::path cfg = s.root / "cfg.json";
  std::ofstream(cfg) << R"({"model": {"hidden_width": 6, "heads": 3, "embed_width": 2},
                            "train": {"max_epochs": 1, "patience": 0}, "seed": 1,
                            "data": ")" << (s.root / "d/panel.csv").string() << R"("})";
  REQUIRE(run({"train", "--config", cfg.string(), "--hidden", "9", "--seed", "8"}).code == 0);
  const json echoed = json::parse(slurp(s.newest_with("config.json")));
  CHECK(echoed.at("model").at("hidden_width") == 9);
  CHECK(echoed.at("model").at("heads") == 3);
  CHECK(echoed.at("seed") == 8);
  CHECK(echoed.at("train").at("seed") == 8);

  std::ofstream(s.root / "bad.json") << R"({"model": {"hidden": 6}})";
  CHECK(run({"train", "--config", (s.root / "bad.json").string()}).code == kExitFailure);
}

TEST_CASE("divergent training exits with code 2") {
  Scratch s("nan");
  REQUIRE(run({"synth", "--n", "2", "--days", "200", "--seed", "4", "--out", (s.root / "d").string()}).code == 0);
  const auto r = run({"train", "--data", (s.root / "d/panel.csv").string(), "--hidden", "4", "--heads", "2",
                      "--epochs", "3", "--patience", "2", "--lr", "1e300", "--clip", "0"});
  CHECK(r.code == kExitNumeric);
  CHECK(r.err.find("non-finite") != std::string::npos);
}
