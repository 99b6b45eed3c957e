#include "affectmod/cli.h"
#include "affectmod/dataset.h"
#include "affectmod/lma_features.h"
#include "affectmod/synthetic.h"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

using namespace affectmod;
namespace fs = std::filesystem;

namespace {

fs::path scratchDir(const std::string& name) {
  fs::path dir = fs::path(AFFECTMOD_TEST_TMP) / "cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome runCli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  Outcome o;
  o.code = cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

/// Synthetic suite written once per process.
const fs::path& suiteManifest() {
  static const fs::path manifest = [] {
    const auto dir = scratchDir("suite");
    writeDataset(makeSyntheticSuite({.perClass = 3, .seed = 4}), dir);
    return dir / "manifest.json";
  }();
  return manifest;
}

size_t countLines(const std::string& text) {
  return static_cast<size_t>(std::count(text.begin(), text.end(), '\n'));
}

size_t countColumns(const std::string& line) {
  return static_cast<size_t>(std::count(line.begin(), line.end(), ',')) + 1;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with 1") {
  CHECK(runCli({}).code == cli::kExitUsage);
  CHECK(runCli({"teleport"}).code == cli::kExitUsage);
  CHECK(runCli({"features", "--manifest", "x.json"}).code == cli::kExitUsage);
  CHECK(runCli({"generate", "--states", "many"}).code == cli::kExitUsage);
  CHECK(runCli({"select", "--out", "m.json"}).code == cli::kExitUsage);
  const auto help = runCli({"--help"});
  CHECK(help.code == cli::kExitOk);
  CHECK(help.out.find("features") != std::string::npos);
}

TEST_CASE("features command") {
  const auto dir = scratchDir("features");
  auto ds = makeSyntheticSuite({.perClass = 1, .seed = 1});
  ds.movements.resize(2);
  ds.labelSet = {"anger", "fear"};
  writeDataset(ds, dir / "two");
  const auto csvPath = (dir / "features.csv").string();
  const auto run = runCli({"features", "--manifest", (dir / "two" / "manifest.json").string(), "--out", csvPath});
  REQUIRE(run.code == cli::kExitOk);
  const auto text = readFile(csvPath);
  CHECK(countLines(text) == 3);
  CHECK(countColumns(text.substr(0, text.find('\n'))) == 29);
  CHECK(fs::exists(dir / "features.run.json"));

  const auto again = runCli({"features", "--manifest", (dir / "two" / "manifest.json").string(), "--out", csvPath});
  REQUIRE(again.code == cli::kExitOk);
  CHECK(readFile(csvPath) == text);

  const auto missing = (dir / "nowhere" / "manifest.json").string();
  const auto bad = runCli({"features", "--manifest", missing, "--out", csvPath});
  CHECK(bad.code == cli::kExitRuntime);
  CHECK(bad.err.find(missing) != std::string::npos);
}

TEST_CASE("select command") {
  const auto dir = scratchDir("select");
  const auto csvPath = (dir / "features.csv").string();
  REQUIRE(runCli({"features", "--manifest", suiteManifest().string(), "--out", csvPath}).code == cli::kExitOk);

  const auto modelPath = (dir / "zero.json").string();
  const auto zero =
      runCli({"select", "--features", csvPath, "--out", modelPath, "--alpha", "1", "--lambda", "1e9", "--folds", "3"});
  REQUIRE(zero.code == cli::kExitOk);
  const auto model = Json::parse(readFile(modelPath));
  for (const auto& row : model.at("theta")) {
    for (size_t j = 1; j < row.size(); ++j) {
      CHECK(row[j].get<double>() == 0.0);
    }
  }
  CHECK(model.at("config").at("command") == "select");
  CHECK(fs::exists(dir / "zero.regpath.csv"));

  const auto fitted = runCli(
      {"select", "--features", csvPath, "--out", (dir / "fit.json").string(), "--alpha", "1", "--lambda", "0.5",
       "--folds", "3"});
  REQUIRE(fitted.code == cli::kExitOk);
  CHECK(fitted.out.find("nonzero=0") == std::string::npos);

  std::string text = readFile(csvPath);
  text.replace(text.find(",TimeAll"), 8, ",TimeAlll");
  writeFile(dir / "broken.csv", text);
  const auto broken = runCli({"select", "--features", (dir / "broken.csv").string(), "--out", modelPath});
  CHECK(broken.code == cli::kExitRuntime);
  CHECK(broken.err.find("TimeAll") != std::string::npos);

  std::string single = "source_id,label";
  for (const auto& n : lmaComponentNames()) {
    single += "," + n;
  }
  single += "\n";
  for (int r = 0; r < 3; ++r) {
    single += "m" + std::to_string(r) + ",sad";
    for (size_t j = 0; j < kNumLmaComponents; ++j) {
      single += "," + std::to_string(r + j);
    }
    single += "\n";
  }
  writeFile(dir / "single.csv", single);
  CHECK(runCli({"select", "--features", (dir / "single.csv").string(), "--out", modelPath}).code == cli::kExitRuntime);
}

TEST_CASE("generate command") {
  const auto dir = scratchDir("generate");
  const auto modelPath = (dir / "model.json").string();
  REQUIRE(
      runCli({"select", "--manifest", suiteManifest().string(), "--out", modelPath, "--alpha", "1", "--lambda", "0.5"})
          .code == cli::kExitOk);
  const std::vector<std::string> base = {
      "generate", "--manifest", suiteManifest().string(), "--model", modelPath, "--source-id", "anger_01",
      "--states", "4", "--cutoff-hz", "3", "--cov-floor", "1e-4"};

  auto args = base;
  args.insert(args.end(), {"--target", "sad", "--out", (dir / "a").string()});
  const auto ok = runCli(args);
  REQUIRE(ok.code == cli::kExitOk);
  const auto sidecar = Json::parse(readFile(dir / "a" / "anger_01_to_sad.json"));
  const auto source = loadDataset(suiteManifest());
  const auto idx = *source.findMovement("anger_01");
  CHECK(sidecar.at("output_frames") == source.movements[idx].numFrames());
  CHECK(sidecar.at("config").at("generation").at("n_states") == 4);
  const auto output =
      parseTrajectoryCsv(readFile(dir / "a" / "anger_01_to_sad.csv"), source.markerSet, 120.0, "out");
  CHECK(output.numFrames() == source.movements[idx].numFrames());

  // Same command, same bytes.
  auto again = base;
  again.insert(again.end(), {"--target", "sad", "--out", (dir / "b").string()});
  REQUIRE(runCli(again).code == cli::kExitOk);
  CHECK(readFile(dir / "a" / "anger_01_to_sad.csv") == readFile(dir / "b" / "anger_01_to_sad.csv"));

  auto unknown = base;
  unknown.insert(unknown.end(), {"--target", "bored", "--out", (dir / "c").string()});
  const auto bad = runCli(unknown);
  CHECK(bad.code == cli::kExitRuntime);
  CHECK(bad.err.find("config") != std::string::npos);
}

TEST_CASE("evaluate command") {
  const auto dir = scratchDir("evaluate");
  const auto run = runCli(
      {"evaluate", "--manifest", suiteManifest().string(), "--alpha", "1", "--lambda", "0.5", "--folds", "3",
       "--states", "4", "--cutoff-hz", "3", "--cov-floor", "1e-4", "--out", dir.string()});
  REQUIRE(run.code == cli::kExitOk);
  const auto confusion = readFile(dir / "confusion.csv");
  CHECK(countLines(confusion) == 5);
  CHECK(countColumns(confusion.substr(0, confusion.find('\n'))) == 5);
  const auto summary = readFile(dir / "summary.csv");
  CHECK(summary.find("target_accuracy,") != std::string::npos);
  CHECK(summary.find("attempted,36\n") != std::string::npos);
  CHECK(fs::exists(dir / "exemplars.json"));
  CHECK(Json::parse(readFile(dir / "run_config.json")).at("folds") == 3);

  CHECK(
      runCli({"evaluate", "--manifest", suiteManifest().string(), "--out", (dir / "x").string()}).code ==
      cli::kExitRuntime);
}

TEST_CASE("bench and synth commands") {
  const auto dir = scratchDir("bench");
  const auto modelPath = (dir / "model.json").string();
  REQUIRE(
      runCli({"select", "--manifest", suiteManifest().string(), "--out", modelPath, "--alpha", "1", "--lambda", "0.5"})
          .code == cli::kExitOk);
  const auto bench = runCli(
      {"bench", "--manifest", suiteManifest().string(), "--model", modelPath, "--out", (dir / "b").string(),
       "--bench-methods", "lma_subspace", "--queries", "4"});
  REQUIRE(bench.code == cli::kExitOk);
  CHECK(countLines(readFile(dir / "b" / "bench_timing.csv")) == 2);
  CHECK(countLines(readFile(dir / "b" / "bench_retrieved.csv")) == 5);
  CHECK(
      runCli({"bench", "--manifest", suiteManifest().string(), "--model", modelPath, "--out", (dir / "c").string(),
              "--bench-methods", "psychic"})
          .code == cli::kExitRuntime);

  const auto synth = runCli({"synth", "--out", (dir / "s").string(), "--per-class", "2", "--seed", "9"});
  REQUIRE(synth.code == cli::kExitOk);
  CHECK(loadDataset(dir / "s" / "manifest.json").size() == 8);
}

} // TEST_SUITE
