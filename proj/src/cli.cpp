#include "affectmod/cli.h"

#include "affectmod/dataset.h"
#include "affectmod/errors.h"
#include "affectmod/evaluation.h"
#include "affectmod/lma_features.h"
#include "affectmod/rmlr.h"
#include "affectmod/synthetic.h"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <ostream>
#include <set>
#include <sstream>

namespace affectmod::cli {

namespace fs = std::filesystem;

Json toJson(const RunConfig& c) {
  Json j;
  j["command"] = c.command;
  j["manifest"] = c.manifest;
  j["out"] = c.out;
  j["features"] = c.features;
  j["model"] = c.model;
  j["source_id"] = c.sourceId;
  j["target"] = c.target;
  j["seed"] = c.seed;
  j["generation"] = toJson(c.generation);
  j["folds"] = c.folds;
  j["alpha_grid"] = c.alphaGrid;
  j["n_lambda"] = c.numLambda;
  j["alpha"] = c.alpha;
  j["lambda"] = c.lambda;
  j["self_convert"] = c.selfConvert;
  j["bench_methods"] = c.benchMethods;
  j["bench_queries"] = c.benchQueries;
  j["bench_states"] = c.benchStates;
  j["per_class"] = c.perClass;
  j["noise"] = c.noise;
  return j;
}

namespace {

std::string dump(const Json& j) {
  return j.dump(2) + "\n";
}

PreparedDataset loadPrepared(const RunConfig& c) {
  return PreparedDataset::build(loadDataset(c.manifest), c.generation.features);
}

RmlrModel loadModel(const std::string& path) {
  const auto text = readFile(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw LoadError(fmt::format("'{}' is not valid JSON: {}", path, e.what()));
  }
  return rmlrModelFromJson(j);
}

std::string sibling(const std::string& path, std::string_view suffix) {
  fs::path p(path);
  const auto stem = p.stem().string();
  return (p.parent_path() / (stem + std::string(suffix))).string();
}

int cmdFeatures(const RunConfig& c, std::ostream& out) {
  const auto dataset = loadDataset(c.manifest);
  std::vector<std::string> ids;
  std::vector<std::string> labels;
  Eigen::MatrixXd features(static_cast<Eigen::Index>(dataset.size()), static_cast<Eigen::Index>(kNumLmaComponents));
  for (size_t i = 0; i < dataset.size(); ++i) {
    const auto& m = dataset.movements[i];
    try {
      const auto normalized = normalizeScale(m, dataset.markerSet);
      features.row(static_cast<Eigen::Index>(i)) =
          lmaVector(normalized, dataset.markerSet, c.generation.features).asVector().transpose();
    } catch (const Error& e) {
      throw StageError("features", fmt::format("movement '{}': {}", m.sourceId, e.what()));
    }
    ids.push_back(m.sourceId);
    labels.push_back(m.label.value_or(std::string{}));
  }
  writeFile(c.out, featureCsv(ids, labels, features));
  writeFile(sibling(c.out, ".run.json"), dump(toJson(c)));
  out << fmt::format("wrote {} feature rows to {}\n", dataset.size(), c.out);
  return kExitOk;
}

double fixedPairCvError(
    const FeatureTable& table,
    double alpha,
    double lambda,
    size_t folds,
    uint64_t seed,
    const std::vector<std::string>& labelOrder) {
  const auto split = kfoldSplit(table.labels, folds, seed);
  size_t wrong = 0;
  for (const auto& f : split) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(f.train.size()), table.features.cols());
    std::vector<std::string> y;
    for (size_t i = 0; i < f.train.size(); ++i) {
      x.row(static_cast<Eigen::Index>(i)) = table.features.row(static_cast<Eigen::Index>(f.train[i]));
      y.push_back(table.labels[f.train[i]]);
    }
    const auto model = fitRmlr(x, y, table.featureNames, alpha, lambda, {}, labelOrder);
    for (size_t idx : f.test) {
      const Eigen::VectorXd row = table.features.row(static_cast<Eigen::Index>(idx)).transpose();
      wrong += model.predict(row) != table.labels[idx] ? 1 : 0;
    }
  }
  return static_cast<double>(wrong) / static_cast<double>(table.labels.size());
}

int cmdSelect(RunConfig c, std::ostream& out) {
  FeatureTable table;
  if (!c.features.empty()) {
    table = parseFeatureCsv(readFile(c.features));
  } else {
    const auto prepared = loadPrepared(c);
    table.sourceIds.clear();
    for (const auto& m : prepared.dataset.movements) {
      table.sourceIds.push_back(m.sourceId);
    }
    table.labels = prepared.dataset.labels();
    table.featureNames = lmaComponentNames();
    table.features = prepared.features;
  }
  const std::set<std::string> distinct(table.labels.begin(), table.labels.end());
  if (distinct.size() < 2) {
    throw InvalidArgument("feature selection needs at least two classes");
  }
  const std::vector<std::string> labelOrder(distinct.begin(), distinct.end());

  std::string pathCsv;
  if (c.alpha >= 0.0 && c.lambda >= 0.0) {
    const double err = fixedPairCvError(table, c.alpha, c.lambda, c.folds, c.seed, labelOrder);
    pathCsv = fmt::format("alpha,lambda,cv_error\n{},{},{}\n", c.alpha, c.lambda, err);
  } else {
    if (c.alpha >= 0.0) {
      c.alphaGrid = {c.alpha};
    }
    const auto path = crossValidateRmlr(table.features, table.labels, c.alphaGrid, c.numLambda, c.folds, c.seed);
    for (const auto& w : path.warnings) {
      out << "warning: " << w << "\n";
    }
    c.alpha = path.bestAlpha;
    c.lambda = path.bestLambda;
    pathCsv = regPathCsv(path);
  }
  const auto model = fitRmlr(table.features, table.labels, table.featureNames, c.alpha, c.lambda, {}, labelOrder);
  Json j = toJson(model);
  j["config"] = toJson(c);
  writeFile(c.out, dump(j));
  writeFile(sibling(c.out, ".regpath.csv"), pathCsv);
  size_t nonzero = 0;
  for (Eigen::Index k = 0; k < model.theta.rows(); ++k) {
    for (Eigen::Index p = 1; p < model.theta.cols(); ++p) {
      nonzero += model.theta(k, p) != 0.0 ? 1 : 0;
    }
  }
  out << fmt::format("alpha={} lambda={} nonzero={} -> {}\n", c.alpha, c.lambda, nonzero, c.out);
  return kExitOk;
}

int cmdGenerate(const RunConfig& c, std::ostream& out) {
  const auto prepared = loadPrepared(c);
  const auto model = loadModel(c.model);
  const auto idx = prepared.dataset.findMovement(c.sourceId);
  if (!idx) {
    throw InvalidArgument(fmt::format("unknown source id '{}'", c.sourceId));
  }
  const Movement& desired = prepared.dataset.movements[*idx];
  const auto result = generate(desired, c.target, prepared, model, c.generation);

  Movement scaled = result.output;
  scaled.frames *= desired.appliedScale;
  scaled.appliedScale = 1.0;
  const std::string base = fmt::format("{}_to_{}", c.sourceId, c.target);
  const fs::path dir(c.out);
  writeFile(dir / (base + ".csv"), serializeTrajectoryCsv(scaled, prepared.dataset.markerSet));
  writeFile(dir / (base + ".json"), dump(generationSidecar(result, toJson(c))));
  for (const auto& w : result.warnings) {
    out << "warning: " << w << "\n";
  }
  out << fmt::format(
      "{} -> {}: {} neighbors, output distance {}\n",
      result.originalEmotion,
      result.targetEmotion,
      result.neighbors.size(),
      result.outputDistance);
  return kExitOk;
}

int cmdEvaluate(RunConfig c, std::ostream& out) {
  const auto prepared = loadPrepared(c);
  if (!c.model.empty()) {
    const auto model = loadModel(c.model);
    if (c.alpha < 0.0) {
      c.alpha = model.fit.alpha;
    }
    if (c.lambda < 0.0) {
      c.lambda = model.fit.lambda;
    }
  }
  if (c.alpha < 0.0 || c.lambda < 0.0) {
    throw InvalidArgument("evaluate needs --model or both --alpha and --lambda");
  }
  EvaluationOptions options;
  options.folds = c.folds;
  options.seed = c.seed;
  options.selfConvert = c.selfConvert;
  options.alpha = c.alpha;
  options.lambda = c.lambda;
  options.generation = c.generation;
  const auto report = evaluateConversions(prepared, options);

  const fs::path dir(c.out);
  writeFile(dir / "confusion.csv", report.confusion.csv());
  if (c.selfConvert) {
    writeFile(dir / "self_confusion.csv", report.selfConfusion.csv());
  }
  writeFile(dir / "conversions.csv", report.conversionsCsv());
  writeFile(dir / "summary.csv", report.summaryCsv());
  Json ex = Json::array();
  for (const auto& e : report.exemplars) {
    ex.push_back({
        {"original", e.original},
        {"target", e.target},
        {"source_id", e.sourceId},
        {"k", e.k},
        {"goc", e.goc},
        {"medoid", e.medoid},
    });
  }
  Json diag;
  diag["exemplars"] = std::move(ex);
  diag["warnings"] = report.warnings;
  diag["config"] = toJson(c);
  writeFile(dir / "exemplars.json", dump(diag));
  writeFile(dir / "run_config.json", dump(toJson(c)));
  out << fmt::format(
      "{} conversions attempted; target accuracy {}; self accuracy {}\n",
      report.attempted(),
      report.targetAccuracy,
      report.selfAccuracy);
  return kExitOk;
}

int cmdBench(RunConfig c, std::ostream& out) {
  const auto prepared = loadPrepared(c);
  const auto model = loadModel(c.model);
  BenchmarkOptions options;
  options.seed = c.seed;
  options.numStates = c.benchStates;
  options.training = c.generation.training;
  options.alpha = model.fit.alpha;
  options.methods.clear();
  if (c.benchMethods.empty()) {
    c.benchMethods = {"lma_subspace", "hmm_kl", "hmm_rmlr"};
  }
  for (const auto& name : c.benchMethods) {
    options.methods.push_back(searchMethodFromName(name));
  }
  std::vector<SearchQuery> queries;
  const auto& labelSet = prepared.dataset.labelSet;
  const size_t count = c.benchQueries == 0 ? prepared.dataset.size() : std::min(c.benchQueries, prepared.dataset.size());
  for (size_t i = 0; i < count; ++i) {
    const auto own = *prepared.dataset.labelIndex(*prepared.dataset.movements[i].label);
    queries.push_back({i, labelSet[(own + 1) % labelSet.size()]});
  }
  HmmSearchCache cache;
  const bool needCache = std::any_of(
      options.methods.begin(), options.methods.end(), [](SearchMethod m) { return m != SearchMethod::LmaSubspace; });
  if (needCache) {
    cache = buildHmmSearchCache(prepared, options);
  }
  const auto timings = benchmarkNnSearch(prepared, model, queries, options, needCache ? &cache : nullptr);
  const fs::path dir(c.out);
  writeFile(dir / "bench_timing.csv", benchmarkTimingCsv(timings));
  writeFile(dir / "bench_retrieved.csv", benchmarkRetrievalCsv(prepared, timings, queries));
  writeFile(dir / "run_config.json", dump(toJson(c)));
  for (const auto& t : timings) {
    out << fmt::format(
        "{}: {:.6f} +- {:.6f} s per query\n", searchMethodName(t.method), t.meanSeconds, t.sdSeconds);
  }
  return kExitOk;
}

int cmdSynth(const RunConfig& c, std::ostream& out) {
  SyntheticOptions options;
  options.seed = c.seed;
  options.perClass = c.perClass;
  options.noise = c.noise;
  const auto dataset = makeSyntheticSuite(options);
  writeDataset(dataset, c.out);
  writeFile(fs::path(c.out) / "run_config.json", dump(toJson(c)));
  out << fmt::format("wrote {} movements to {}\n", dataset.size(), c.out);
  return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Affective movement modulation toolkit", "affectmod"};
  app.require_subcommand(1);

  RunConfig c;
  c.alphaGrid = defaultAlphaGrid();
  double cutoffHz = c.generation.smoothing.cutoffHz;
  double featureCutoffHz = c.generation.features.filter.cutoffHz;
  bool physicalUnits = false;
  bool hullShapeFlow = false;

  auto addSeed = [&](CLI::App* sub) { sub->add_option("--seed", c.seed, "Seed for every random choice"); };
  auto addFeatureFlags = [&](CLI::App* sub) {
    sub->add_option("--feature-cutoff-hz", featureCutoffHz, "Derivative low-pass cutoff; 0 disables filtering");
    sub->add_flag("--physical-units", physicalUnits, "Differentiate per second instead of per frame");
    sub->add_flag("--hull-shape-flow", hullShapeFlow, "Use the convex hull volume for ShapeFlow");
  };
  auto addGenerationFlags = [&](CLI::App* sub) {
    sub->add_option("--states", c.generation.numStates, "HMM states");
    sub->add_option("--n-d", c.generation.desiredCopies, "Copies of the desired path added to HMM training");
    sub->add_option("--epsilon", c.generation.epsilonFraction, "Neighborhood radius fraction");
    sub->add_option("--cutoff-hz", cutoffHz, "Output smoothing cutoff");
    sub->add_option("--cov-floor", c.generation.training.covarianceFloor, "Covariance floor added in every M-step");
    addFeatureFlags(sub);
  };

  auto* features = app.add_subcommand("features", "Compute the LMA feature table");
  features->add_option("--manifest", c.manifest, "Dataset manifest")->required();
  features->add_option("--out", c.out, "Output CSV")->required();
  addSeed(features);
  addFeatureFlags(features);

  auto* select = app.add_subcommand("select", "Fit the RMLR component-selection model");
  auto* featIn = select->add_option("--features", c.features, "Feature CSV");
  select->add_option("--manifest", c.manifest, "Dataset manifest (features are computed)")->excludes(featIn);
  select->add_option("--out", c.out, "Output model JSON")->required();
  select->add_option("--alpha", c.alpha, "Fixed elastic-net mixing weight");
  select->add_option("--lambda", c.lambda, "Fixed penalty (requires --alpha)");
  select->add_option("--folds", c.folds, "Cross-validation folds");
  select->add_option("--n-lambda", c.numLambda, "Lambda values per alpha");
  addSeed(select);
  addFeatureFlags(select);

  auto* gen = app.add_subcommand("generate", "Convert one movement to a target emotion");
  gen->add_option("--manifest", c.manifest, "Dataset manifest")->required();
  gen->add_option("--model", c.model, "RMLR model JSON")->required();
  gen->add_option("--source-id", c.sourceId, "Desired movement")->required();
  gen->add_option("--target", c.target, "Target emotion")->required();
  gen->add_option("--out", c.out, "Output directory")->required();
  addSeed(gen);
  addGenerationFlags(gen);

  auto* eval = app.add_subcommand("evaluate", "Fold-wise conversion and recognition");
  eval->add_option("--manifest", c.manifest, "Dataset manifest")->required();
  eval->add_option("--model", c.model, "RMLR model JSON supplying alpha and lambda");
  eval->add_option("--alpha", c.alpha, "Elastic-net mixing weight");
  eval->add_option("--lambda", c.lambda, "Penalty");
  eval->add_option("--folds", c.folds, "Folds");
  eval->add_flag("--self-convert", c.selfConvert, "Also convert each movement to its own emotion");
  eval->add_option("--out", c.out, "Output directory")->required();
  addSeed(eval);
  addGenerationFlags(eval);

  auto* bench = app.add_subcommand("bench", "Time nearest-neighbor search methods");
  bench->add_option("--manifest", c.manifest, "Dataset manifest")->required();
  bench->add_option("--model", c.model, "RMLR model JSON")->required();
  bench->add_option("--out", c.out, "Output directory")->required();
  bench->add_option("--bench-methods", c.benchMethods, "lma_subspace, hmm_kl, hmm_rmlr")->delimiter(',');
  bench->add_option("--queries", c.benchQueries, "Number of queries (0 = every movement)");
  bench->add_option("--bench-states", c.benchStates, "States of the per-movement HMMs");
  addSeed(bench);
  addFeatureFlags(bench);

  auto* synth = app.add_subcommand("synth", "Write the synthetic four-class suite");
  synth->add_option("--out", c.out, "Output directory")->required();
  synth->add_option("--per-class", c.perClass, "Movements per class");
  synth->add_option("--noise", c.noise, "Marker noise standard deviation (m)");
  addSeed(synth);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    if (select->parsed()) {
      if (c.features.empty() && c.manifest.empty()) {
        throw CLI::RequiredError("--features or --manifest");
      }
      if (c.lambda >= 0.0 && c.alpha < 0.0) {
        throw CLI::ValidationError("--lambda", "requires --alpha");
      }
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* active = app.get_subcommands().front();
  c.command = active->get_name();
  c.generation.seed = c.seed;
  c.generation.smoothing = FilterParams::butterworth(cutoffHz);
  c.generation.features.filter =
      featureCutoffHz > 0.0 ? FilterParams::butterworth(featureCutoffHz) : FilterParams::disabled();
  c.generation.features.perFrameUnits = !physicalUnits;
  c.generation.features.shapeFlow = hullShapeFlow ? ShapeFlowMode::ConvexHull : ShapeFlowMode::BoundingBox;

  try {
    c.generation.validate();
    if (c.command == "features") {
      return cmdFeatures(c, out);
    }
    if (c.command == "select") {
      return cmdSelect(c, out);
    }
    if (c.command == "generate") {
      return cmdGenerate(c, out);
    }
    if (c.command == "evaluate") {
      return cmdEvaluate(c, out);
    }
    if (c.command == "bench") {
      return cmdBench(c, out);
    }
    return cmdSynth(c, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

} // namespace affectmod::cli
