#include "affectmod/evaluation.h"

#include "affectmod/errors.h"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

namespace affectmod {

Eigen::MatrixXd ConfusionMatrix::rowPercent() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(counts.rows(), counts.cols());
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    const double rowTotal = counts.row(i).cast<double>().sum();
    if (rowTotal > 0) {
      out.row(i) = 100.0 * counts.row(i).cast<double>() / rowTotal;
    }
  }
  return out;
}

size_t ConfusionMatrix::total() const {
  return static_cast<size_t>(counts.sum());
}

double ConfusionMatrix::accuracy() const {
  const size_t n = total();
  return n == 0 ? 0.0 : static_cast<double>(counts.trace()) / static_cast<double>(n);
}

std::string ConfusionMatrix::csv() const {
  std::string out = "target";
  for (const auto& l : labels) {
    out += "," + l;
  }
  out += "\n";
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    out += labels[static_cast<size_t>(i)];
    for (Eigen::Index j = 0; j < counts.cols(); ++j) {
      out += fmt::format(",{}", counts(i, j));
    }
    out += "\n";
  }
  return out;
}

ConfusionMatrix confusionMatrix(
    const std::vector<std::string>& trueLabels,
    const std::vector<std::string>& predictedLabels,
    const std::vector<std::string>& labelOrder) {
  if (trueLabels.size() != predictedLabels.size()) {
    throw InvalidArgument("true and predicted label lists differ in length");
  }
  const auto k = static_cast<Eigen::Index>(labelOrder.size());
  auto indexOf = [&](const std::string& label) {
    const auto it = std::find(labelOrder.begin(), labelOrder.end(), label);
    if (it == labelOrder.end()) {
      throw InvalidArgument(fmt::format("unknown label '{}'", label));
    }
    return static_cast<Eigen::Index>(it - labelOrder.begin());
  };
  ConfusionMatrix cm;
  cm.labels = labelOrder;
  cm.counts = Eigen::MatrixXi::Zero(k, k);
  for (size_t i = 0; i < trueLabels.size(); ++i) {
    ++cm.counts(indexOf(trueLabels[i]), indexOf(predictedLabels[i]));
  }
  return cm;
}

namespace {

double squaredDistance(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

struct LloydRun {
  std::vector<size_t> assignments;
  Eigen::MatrixXd centers;
  std::vector<double> history;
  double wcss = 0.0;
};

Eigen::MatrixXd plusPlusSeeds(const Eigen::MatrixXd& x, size_t k, std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd centers(static_cast<Eigen::Index>(k), x.cols());
  std::uniform_int_distribution<Eigen::Index> pickAny(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  centers.row(0) = x.row(pickAny(rng));
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d2(i) = squaredDistance(x, i, centers, 0);
  }
  for (size_t c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index chosen = 0;
    if (total <= 0.0) {
      chosen = pickAny(rng);
    } else {
      const double r = unit(rng) * total;
      double acc = 0.0;
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (r < acc) {
          chosen = i;
          break;
        }
      }
    }
    centers.row(static_cast<Eigen::Index>(c)) = x.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2(i) = std::min(d2(i), squaredDistance(x, i, centers, static_cast<Eigen::Index>(c)));
    }
  }
  return centers;
}

LloydRun lloyd(const Eigen::MatrixXd& x, Eigen::MatrixXd centers, size_t maxIter = 300) {
  const Eigen::Index n = x.rows();
  const auto k = static_cast<size_t>(centers.rows());
  LloydRun run;
  run.assignments.assign(static_cast<size_t>(n), 0);
  std::vector<size_t> previous;
  for (size_t iter = 0; iter < maxIter; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      size_t best = 0;
      double bestD = squaredDistance(x, i, centers, 0);
      for (size_t c = 1; c < k; ++c) {
        const double d = squaredDistance(x, i, centers, static_cast<Eigen::Index>(c));
        if (d < bestD) {
          bestD = d;
          best = c;
        }
      }
      run.assignments[static_cast<size_t>(i)] = best;
    }

    // Repair empty clusters with the point furthest from its own center.
    std::vector<size_t> sizes(k, 0);
    for (size_t a : run.assignments) {
      ++sizes[a];
    }
    for (size_t c = 0; c < k; ++c) {
      if (sizes[c] > 0) {
        continue;
      }
      Eigen::Index far = -1;
      double farD = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const size_t a = run.assignments[static_cast<size_t>(i)];
        if (sizes[a] < 2) {
          continue;
        }
        const double d = squaredDistance(x, i, centers, static_cast<Eigen::Index>(a));
        if (d > farD) {
          farD = d;
          far = i;
        }
      }
      if (far < 0) {
        break;
      }
      --sizes[run.assignments[static_cast<size_t>(far)]];
      run.assignments[static_cast<size_t>(far)] = c;
      sizes[c] = 1;
    }

    centers.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      centers.row(static_cast<Eigen::Index>(run.assignments[static_cast<size_t>(i)])) += x.row(i);
    }
    for (size_t c = 0; c < k; ++c) {
      if (sizes[c] > 0) {
        centers.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(sizes[c]);
      }
    }
    double wcss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      wcss += squaredDistance(x, i, centers, static_cast<Eigen::Index>(run.assignments[static_cast<size_t>(i)]));
    }
    run.history.push_back(wcss);
    run.wcss = wcss;
    if (run.assignments == previous) {
      break;
    }
    previous = run.assignments;
  }
  run.centers = std::move(centers);
  return run;
}

} // namespace

ClusteringResult kmeans(const Eigen::MatrixXd& points, size_t k, uint64_t seed, size_t restarts) {
  if (k < 1) {
    throw InvalidArgument("k-means needs k >= 1");
  }
  if (k > static_cast<size_t>(points.rows())) {
    throw InvalidArgument(fmt::format("k = {} exceeds the {} points", k, points.rows()));
  }
  std::mt19937_64 rng(seed);
  LloydRun best;
  bool haveBest = false;
  for (size_t r = 0; r < std::max<size_t>(restarts, 1); ++r) {
    auto run = lloyd(points, plusPlusSeeds(points, k, rng));
    if (!haveBest || run.wcss < best.wcss) {
      best = std::move(run);
      haveBest = true;
    }
  }
  ClusteringResult result;
  result.assignments = std::move(best.assignments);
  result.centers = std::move(best.centers);
  result.k = k;
  result.wcss = best.wcss;
  result.wcssHistory = std::move(best.history);
  if (k >= 2) {
    result.goc = goodnessOfClustering(points, result.assignments);
  }
  return result;
}

double goodnessOfClustering(const Eigen::MatrixXd& points, const std::vector<size_t>& assignments) {
  if (assignments.size() != static_cast<size_t>(points.rows())) {
    throw InvalidArgument("assignments and points differ in length");
  }
  if (assignments.empty()) {
    throw InvalidArgument("goodness of clustering of an empty set");
  }
  const size_t numClusters = *std::max_element(assignments.begin(), assignments.end()) + 1;
  std::vector<std::vector<Eigen::Index>> members(numClusters);
  for (size_t i = 0; i < assignments.size(); ++i) {
    members[assignments[i]].push_back(static_cast<Eigen::Index>(i));
  }
  members.erase(
      std::remove_if(members.begin(), members.end(), [](const auto& m) { return m.empty(); }),
      members.end());
  if (members.size() < 2) {
    throw InvalidArgument("goodness of clustering needs at least two clusters");
  }

  const size_t k = members.size();
  const auto n = static_cast<double>(assignments.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (size_t i = 0; i < k; ++i) {
    const auto& a = members[i];
    if (a.size() > 1) {
      double sum = 0.0;
      for (size_t u = 0; u < a.size(); ++u) {
        for (size_t v = u + 1; v < a.size(); ++v) {
          sum += (points.row(a[u]) - points.row(a[v])).norm();
        }
      }
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) =
          sum / (0.5 * static_cast<double>(a.size() * (a.size() - 1)));
    }
    for (size_t j = i + 1; j < k; ++j) {
      const auto& b = members[j];
      double sum = 0.0;
      for (auto u : a) {
        for (auto v : b) {
          sum += (points.row(u) - points.row(v)).norm();
        }
      }
      const double mean = sum / static_cast<double>(a.size() * b.size());
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = mean;
      d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = mean;
    }
  }

  double numerator = 0.0;
  double denominator = 0.0;
  for (size_t i = 0; i < k; ++i) {
    const auto ni = static_cast<double>(members[i].size());
    double between = 0.0;
    for (size_t j = 0; j < k; ++j) {
      if (j != i) {
        between += ni / (n - ni) * d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
    numerator += ni * between;
    denominator += ni * d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
  }
  return numerator / std::max(2.0 * denominator, 1e-12);
}

ExemplarSelection selectExemplar(const Eigen::MatrixXd& features, uint64_t seed, const std::vector<size_t>& kRange) {
  const Eigen::Index n = features.rows();
  if (n < 2) {
    throw InvalidArgument("exemplar selection needs at least two movements");
  }
  ExemplarSelection out;

  bool allIdentical = true;
  for (Eigen::Index i = 1; i < n && allIdentical; ++i) {
    allIdentical = features.row(i) == features.row(0);
  }
  if (allIdentical) {
    out.index = 0;
    out.k = 1;
    return out;
  }

  if (n < 5) {
    Eigen::Index best = 0;
    double bestSum = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      double sum = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        sum += (features.row(i) - features.row(j)).norm();
      }
      if (sum < bestSum) {
        bestSum = sum;
        best = i;
      }
    }
    out.index = static_cast<size_t>(best);
    out.medoid = true;
    out.warnings.push_back(fmt::format("only {} movements; returning the medoid", n));
    return out;
  }

  ClusteringResult best;
  bool have = false;
  for (size_t k : kRange) {
    if (k < 2 || k > static_cast<size_t>(n)) {
      out.warnings.push_back(fmt::format("k = {} skipped for {} movements", k, n));
      continue;
    }
    auto c = kmeans(features, k, seed);
    if (!have || c.goc > best.goc) {
      best = std::move(c);
      have = true;
    }
  }
  if (!have) {
    throw InvalidArgument("no usable cluster count in the k range");
  }

  std::vector<size_t> sizes(best.k, 0);
  for (size_t a : best.assignments) {
    ++sizes[a];
  }
  const size_t popular = static_cast<size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  double bestD = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (best.assignments[static_cast<size_t>(i)] != popular) {
      continue;
    }
    const double d = (features.row(i) - best.centers.row(static_cast<Eigen::Index>(popular))).squaredNorm();
    if (d < bestD) {
      bestD = d;
      out.index = static_cast<size_t>(i);
    }
  }
  out.k = best.k;
  out.goc = best.goc;
  return out;
}

std::vector<std::string> knnClassify(
    const Eigen::MatrixXd& trainFeatures,
    const std::vector<std::string>& trainLabels,
    const Eigen::MatrixXd& testFeatures,
    size_t k) {
  if (trainFeatures.rows() == 0) {
    throw InvalidArgument("kNN needs a non-empty training set");
  }
  if (trainLabels.size() != static_cast<size_t>(trainFeatures.rows())) {
    throw InvalidArgument("training labels and features differ in length");
  }
  if (testFeatures.cols() != trainFeatures.cols()) {
    throw InvalidArgument("test and training feature dimensions differ");
  }
  if (k < 1) {
    throw InvalidArgument("kNN needs k >= 1");
  }
  const auto scaler = FeatureScaler::fit(trainFeatures);
  const Eigen::MatrixXd train = scaler.applyRows(trainFeatures);
  const Eigen::MatrixXd test = scaler.applyRows(testFeatures);
  const size_t n = trainLabels.size();
  const size_t kk = std::min(k, n);

  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(test.rows()));
  std::vector<size_t> order(n);
  std::vector<double> dist(n);
  for (Eigen::Index t = 0; t < test.rows(); ++t) {
    for (size_t i = 0; i < n; ++i) {
      dist[i] = (train.row(static_cast<Eigen::Index>(i)) - test.row(t)).squaredNorm();
    }
    std::iota(order.begin(), order.end(), size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk), order.end(), [&](size_t a, size_t b) {
      return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
    });
    std::map<std::string, size_t> votes;
    size_t top = 0;
    for (size_t r = 0; r < kk; ++r) {
      top = std::max(top, ++votes[trainLabels[order[r]]]);
    }
    for (size_t r = 0; r < kk; ++r) {
      if (votes[trainLabels[order[r]]] == top) {
        out.push_back(trainLabels[order[r]]);
        break;
      }
    }
  }
  return out;
}

std::string EvaluationReport::conversionsCsv() const {
  std::string out = "fold,source_id,original,target,recognized,status,neighbors,output_distance,note\n";
  for (const auto& c : conversions) {
    std::string note = c.note;
    std::replace(note.begin(), note.end(), ',', ';');
    std::replace(note.begin(), note.end(), '\n', ' ');
    out += fmt::format(
        "{},{},{},{},{},{},{},{},{}\n",
        c.fold,
        c.sourceId,
        c.original,
        c.target,
        c.recognized,
        c.skipped ? "skipped" : "ok",
        c.neighborCount,
        c.outputDistance,
        note);
  }
  return out;
}

std::string EvaluationReport::summaryCsv() const {
  size_t skipped = 0;
  for (const auto& c : conversions) {
    skipped += c.skipped ? 1 : 0;
  }
  std::string out = "metric,value\n";
  out += fmt::format("attempted,{}\n", conversions.size());
  out += fmt::format("skipped,{}\n", skipped);
  out += fmt::format("target_conversions,{}\n", confusion.total());
  out += fmt::format("target_accuracy,{}\n", targetAccuracy);
  out += fmt::format("self_conversions,{}\n", selfConfusion.total());
  out += fmt::format("self_accuracy,{}\n", selfAccuracy);
  const Eigen::MatrixXd pct = confusion.rowPercent();
  for (size_t i = 0; i < confusion.labels.size(); ++i) {
    out += fmt::format(
        "recognized_percent_{},{}\n", confusion.labels[i], pct(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
  }
  return out;
}

EvaluationReport evaluateConversions(const PreparedDataset& prepared, const EvaluationOptions& options) {
  options.generation.validate();
  const auto& dataset = prepared.dataset;
  if (dataset.labelSet.size() < 2) {
    throw InvalidArgument("evaluation needs at least two emotion classes");
  }
  const auto labels = dataset.labels();
  const auto folds = kfoldSplit(labels, options.folds, options.seed);

  EvaluationReport report;
  for (size_t f = 0; f < folds.size(); ++f) {
    const auto& fold = folds[f];
    const PreparedDataset train = prepared.subset(fold.train);
    const auto trainLabels = train.dataset.labels();
    std::vector<std::string> present;
    for (const auto& l : dataset.labelSet) {
      if (std::find(trainLabels.begin(), trainLabels.end(), l) != trainLabels.end()) {
        present.push_back(l);
      }
    }

    RmlrModel model;
    bool haveModel = present.size() >= 2;
    if (haveModel) {
      model = fitRmlr(
          train.features, trainLabels, lmaComponentNames(), options.alpha, options.lambda, {}, present);
    } else {
      report.warnings.push_back(fmt::format("fold {}: fewer than two classes in training", f));
    }

    for (size_t idx : fold.test) {
      const Movement& m = dataset.movements[idx];
      const std::string original = m.label.value_or(std::string{});
      for (const auto& target : dataset.labelSet) {
        if (target == original && !options.selfConvert) {
          continue;
        }
        ConversionRecord rec;
        rec.fold = f;
        rec.sourceId = m.sourceId;
        rec.original = original;
        rec.target = target;
        const bool targetPresent = std::find(present.begin(), present.end(), target) != present.end();
        const bool originalPresent = std::find(present.begin(), present.end(), original) != present.end();
        if (!haveModel || !targetPresent || !originalPresent) {
          rec.skipped = true;
          rec.note = "class absent from the training folds";
          report.warnings.push_back(
              fmt::format("fold {}: {} -> {} for '{}' skipped: {}", f, original, target, m.sourceId, rec.note));
          report.conversions.push_back(std::move(rec));
          continue;
        }
        try {
          const auto result = generate(m, target, train, model, options.generation);
          rec.outputFeatures = lmaVector(result.output, dataset.markerSet, train.featureOptions).asVector();
          rec.recognized =
              knnClassify(train.features, trainLabels, rec.outputFeatures.transpose(), options.generation.classifierK)
                  .front();
          rec.outputDistance = result.outputDistance;
          rec.neighborCount = result.neighbors.size();
          for (const auto& w : result.warnings) {
            rec.note += (rec.note.empty() ? "" : "; ") + w;
          }
        } catch (const Error& e) {
          rec.skipped = true;
          rec.note = e.what();
          report.warnings.push_back(
              fmt::format("fold {}: {} -> {} for '{}' failed: {}", f, original, target, m.sourceId, e.what()));
        }
        report.conversions.push_back(std::move(rec));
      }
    }
  }

  std::vector<std::string> trueT, predT, trueS, predS;
  for (const auto& c : report.conversions) {
    if (c.skipped) {
      continue;
    }
    if (c.target == c.original) {
      trueS.push_back(c.target);
      predS.push_back(c.recognized);
    } else {
      trueT.push_back(c.target);
      predT.push_back(c.recognized);
    }
  }
  report.confusion = confusionMatrix(trueT, predT, dataset.labelSet);
  report.selfConfusion = confusionMatrix(trueS, predS, dataset.labelSet);
  report.targetAccuracy = report.confusion.accuracy();
  report.selfAccuracy = report.selfConfusion.accuracy();

  // One exemplar per conversion class, clustered in the standardized LMA space.
  for (const auto& from : dataset.labelSet) {
    for (const auto& to : dataset.labelSet) {
      std::vector<const ConversionRecord*> group;
      for (const auto& c : report.conversions) {
        if (!c.skipped && c.original == from && c.target == to) {
          group.push_back(&c);
        }
      }
      if (group.empty()) {
        continue;
      }
      if (group.size() < 2) {
        report.warnings.push_back(fmt::format("{} -> {}: one generated movement, no exemplar clustering", from, to));
        continue;
      }
      Eigen::MatrixXd feats(static_cast<Eigen::Index>(group.size()), static_cast<Eigen::Index>(kNumLmaComponents));
      for (size_t i = 0; i < group.size(); ++i) {
        feats.row(static_cast<Eigen::Index>(i)) = prepared.scaler.apply(group[i]->outputFeatures).transpose();
      }
      const auto sel = selectExemplar(feats, options.seed);
      report.exemplars.push_back({from, to, group[sel.index]->sourceId, sel.k, sel.goc, sel.medoid});
      for (const auto& w : sel.warnings) {
        report.warnings.push_back(fmt::format("{} -> {}: {}", from, to, w));
      }
    }
  }
  return report;
}

std::string_view searchMethodName(SearchMethod method) {
  switch (method) {
    case SearchMethod::LmaSubspace:
      return "lma_subspace";
    case SearchMethod::HmmKl:
      return "hmm_kl";
    case SearchMethod::HmmRmlr:
      return "hmm_rmlr";
  }
  return "unknown";
}

SearchMethod searchMethodFromName(std::string_view name) {
  for (auto m : {SearchMethod::LmaSubspace, SearchMethod::HmmKl, SearchMethod::HmmRmlr}) {
    if (searchMethodName(m) == name) {
      return m;
    }
  }
  throw InvalidArgument(fmt::format("unknown search method '{}'", name));
}

Eigen::VectorXd flattenHmm(const GaussianHmm& hmm) {
  const Eigen::Index n = static_cast<Eigen::Index>(hmm.numStates());
  const Eigen::Index d = hmm.dim();
  Eigen::VectorXd out(2 * n * d + n * n);
  Eigen::Index pos = 0;
  for (Eigen::Index s = 0; s < n; ++s) {
    out.segment(pos, d) = hmm.means.row(s).transpose();
    pos += d;
  }
  for (Eigen::Index s = 0; s < n; ++s) {
    out.segment(pos, d) = hmm.covariances[static_cast<size_t>(s)].diagonal();
    pos += d;
  }
  for (Eigen::Index s = 0; s < n; ++s) {
    out.segment(pos, n) = hmm.transitions.row(s).transpose();
    pos += n;
  }
  return out;
}

namespace {

GaussianHmm trainSingle(const Eigen::MatrixXd& frames, const BenchmarkOptions& options) {
  const std::vector<Eigen::MatrixXd> seq{frames};
  return baumWelch(seq, initSegmental(seq, options.numStates, options.training.covarianceFloor), options.training)
      .first;
}

std::vector<size_t> toClassIndices(const std::vector<std::string>& labels, const std::vector<std::string>& order) {
  std::vector<size_t> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    out.push_back(static_cast<size_t>(std::find(order.begin(), order.end(), l) - order.begin()));
  }
  return out;
}

} // namespace

HmmSearchCache buildHmmSearchCache(const PreparedDataset& prepared, const BenchmarkOptions& options) {
  HmmSearchCache cache;
  const auto& movements = prepared.dataset.movements;
  for (const auto& m : movements) {
    try {
      cache.models.push_back(trainSingle(m.frames, options));
    } catch (const Error& e) {
      throw StageError("bench", fmt::format("HMM for '{}': {}", m.sourceId, e.what()));
    }
  }
  if (cache.models.empty()) {
    throw InvalidArgument("empty dataset");
  }
  const Eigen::Index dim = flattenHmm(cache.models.front()).size();
  cache.parameters.resize(static_cast<Eigen::Index>(movements.size()), dim);
  for (size_t i = 0; i < movements.size(); ++i) {
    cache.parameters.row(static_cast<Eigen::Index>(i)) = flattenHmm(cache.models[i]).transpose();
  }

  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < dim; ++j) {
    names.push_back(fmt::format("p{}", j));
  }
  const auto labels = prepared.dataset.labels();
  const auto& order = prepared.dataset.labelSet;
  const auto scaler = FeatureScaler::fit(cache.parameters);
  const double lambdaMax =
      rmlrLambdaMax(scaler.applyRows(cache.parameters), toClassIndices(labels, order), order.size(), options.alpha);
  cache.parameterModel =
      fitRmlr(cache.parameters, labels, names, options.alpha, options.lambdaFraction * lambdaMax, {}, order);
  return cache;
}

std::vector<MethodTiming> benchmarkNnSearch(
    const PreparedDataset& prepared,
    const RmlrModel& model,
    const std::vector<SearchQuery>& queries,
    const BenchmarkOptions& options,
    const HmmSearchCache* cache) {
  using Clock = std::chrono::steady_clock;
  const auto& dataset = prepared.dataset;
  const auto labels = dataset.labels();
  for (const auto& q : queries) {
    if (q.index >= dataset.size()) {
      throw InvalidArgument(fmt::format("query index {} out of range", q.index));
    }
    if (!dataset.labelIndex(q.target)) {
      throw InvalidArgument(fmt::format("unknown target emotion '{}'", q.target));
    }
  }

  Eigen::MatrixXd standardizedParams;
  for (auto method : options.methods) {
    if (method != SearchMethod::LmaSubspace && (cache == nullptr || cache->models.size() != dataset.size())) {
      throw InvalidArgument(fmt::format("method {} needs the HMM cache", searchMethodName(method)));
    }
  }
  if (cache != nullptr && cache->parameters.rows() > 0) {
    standardizedParams.resize(cache->parameters.rows(), cache->parameters.cols());
    for (Eigen::Index i = 0; i < cache->parameters.rows(); ++i) {
      standardizedParams.row(i) =
          cache->parameterModel.standardize(Eigen::VectorXd(cache->parameters.row(i).transpose())).transpose();
    }
  }

  auto nearest = [&](const SearchQuery& q, auto&& distanceTo) {
    size_t best = dataset.size();
    double bestD = std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < dataset.size(); ++c) {
      if (c == q.index || labels[c] != q.target) {
        continue;
      }
      const double d = distanceTo(c);
      if (best == dataset.size() || d < bestD) {
        bestD = d;
        best = c;
      }
    }
    if (best == dataset.size()) {
      throw InvalidArgument(fmt::format("no '{}' candidate for query {}", q.target, q.index));
    }
    return best;
  };

  auto subspaceColumns = [](const RmlrModel& m, const std::string& from, const std::string& to) {
    const auto names = selectSubspace(m, from, to, m.featureOrder);
    std::vector<Eigen::Index> cols;
    for (const auto& name : names) {
      cols.push_back(static_cast<Eigen::Index>(
          std::find(m.featureOrder.begin(), m.featureOrder.end(), name) - m.featureOrder.begin()));
    }
    return cols;
  };

  std::vector<MethodTiming> out;
  for (auto method : options.methods) {
    MethodTiming timing;
    timing.method = method;
    for (const auto& q : queries) {
      const Movement& m = dataset.movements[q.index];
      const std::string original = labels[q.index];
      const auto start = Clock::now();
      size_t hit = 0;
      switch (method) {
        case SearchMethod::LmaSubspace: {
          const Eigen::VectorXd z =
              prepared.scaler.apply(lmaVector(m, dataset.markerSet, prepared.featureOptions).asVector());
          const auto cols = subspaceColumns(model, original, q.target);
          hit = nearest(q, [&](size_t c) {
            double s = 0.0;
            for (auto j : cols) {
              const double diff = prepared.standardized(static_cast<Eigen::Index>(c), j) - z(j);
              s += diff * diff;
            }
            return s;
          });
          break;
        }
        case SearchMethod::HmmKl: {
          const GaussianHmm qm = trainSingle(m.frames, options);
          const size_t horizon = options.klHorizon > 0 ? options.klHorizon : static_cast<size_t>(m.numFrames());
          hit = nearest(q, [&](size_t c) {
            return klDistance(qm, cache->models[c], options.klSamples, horizon, options.seed);
          });
          break;
        }
        case SearchMethod::HmmRmlr: {
          const GaussianHmm qm = trainSingle(m.frames, options);
          const Eigen::VectorXd z = cache->parameterModel.standardize(flattenHmm(qm));
          const auto cols = subspaceColumns(cache->parameterModel, original, q.target);
          hit = nearest(q, [&](size_t c) {
            double s = 0.0;
            for (auto j : cols) {
              const double diff = standardizedParams(static_cast<Eigen::Index>(c), j) - z(j);
              s += diff * diff;
            }
            return s;
          });
          break;
        }
      }
      timing.seconds.push_back(std::chrono::duration<double>(Clock::now() - start).count());
      timing.retrieved.push_back(hit);
    }
    if (!timing.seconds.empty()) {
      const double n = static_cast<double>(timing.seconds.size());
      timing.meanSeconds = std::accumulate(timing.seconds.begin(), timing.seconds.end(), 0.0) / n;
      double ss = 0.0;
      for (double s : timing.seconds) {
        ss += (s - timing.meanSeconds) * (s - timing.meanSeconds);
      }
      timing.sdSeconds = timing.seconds.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    }
    out.push_back(std::move(timing));
  }
  return out;
}

std::string benchmarkTimingCsv(const std::vector<MethodTiming>& timings) {
  std::string out = "method,mean_seconds,sd_seconds,queries\n";
  for (const auto& t : timings) {
    out += fmt::format("{},{},{},{}\n", searchMethodName(t.method), t.meanSeconds, t.sdSeconds, t.seconds.size());
  }
  return out;
}

std::string benchmarkRetrievalCsv(
    const PreparedDataset& prepared,
    const std::vector<MethodTiming>& timings,
    const std::vector<SearchQuery>& queries) {
  std::string out = "query,source_id,target";
  for (const auto& t : timings) {
    out += fmt::format(",{}", searchMethodName(t.method));
  }
  out += "\n";
  for (size_t q = 0; q < queries.size(); ++q) {
    out += fmt::format("{},{},{}", q, prepared.dataset.movements[queries[q].index].sourceId, queries[q].target);
    for (const auto& t : timings) {
      out += "," + prepared.dataset.movements[t.retrieved[q]].sourceId;
    }
    out += "\n";
  }
  return out;
}

} // namespace affectmod
