#include "affectmod/errors.h"
#include "affectmod/evaluation.h"
#include "affectmod/synthetic.h"
#include "oracles.h"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace affectmod;

namespace {

Eigen::MatrixXd column(std::initializer_list<double> values) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) {
    x(i++, 0) = v;
  }
  return x;
}

GenerationConfig quickGeneration() {
  GenerationConfig c;
  c.numStates = 4;
  c.smoothing = FilterParams::butterworth(3.0);
  c.training.covarianceFloor = 1e-4;
  c.training.maxIter = 15;
  return c;
}

} // namespace

TEST_SUITE("evaluation") {

TEST_CASE("confusion matrix examples") {
  const std::vector<std::string> order = {"a", "b", "c", "d"};
  const auto perfect = confusionMatrix({"a", "b", "c", "d"}, {"a", "b", "c", "d"}, order);
  CHECK(perfect.counts == Eigen::MatrixXi::Identity(4, 4));
  CHECK(perfect.accuracy() == 1.0);

  const auto oneColumn = confusionMatrix({"a", "b", "c", "d", "d"}, {"a", "a", "a", "a", "a"}, order);
  CHECK(oneColumn.counts.col(0).sum() == 5);
  CHECK(oneColumn.counts.rightCols(3).sum() == 0);
  CHECK(oneColumn.accuracy() == doctest::Approx(0.2));

  const auto partial = confusionMatrix({"a", "a", "a", "a"}, {"a", "a", "a", "b"}, order);
  const auto pct = partial.rowPercent();
  CHECK(pct(0, 0) == 75.0);
  CHECK(pct(0, 1) == 25.0);
  CHECK(pct(0, 2) == 0.0);
  CHECK(pct(0, 3) == 0.0);
  CHECK(pct.row(1).sum() == 0.0);
  CHECK(partial.counts.row(0).sum() == 4);

  CHECK(partial.csv() == "target,a,b,c,d\na,3,1,0,0\nb,0,0,0,0\nc,0,0,0,0\nd,0,0,0,0\n");
  CHECK_THROWS_AS((void)confusionMatrix({"a"}, {"z"}, order), InvalidArgument);
  CHECK_THROWS_AS((void)confusionMatrix({"a"}, {}, order), InvalidArgument);
}

TEST_CASE("k-means on separated blobs") {
  const auto x = column({0, 1, 10, 11});
  const auto c = kmeans(x, 2, 3);
  CHECK(c.assignments[0] == c.assignments[1]);
  CHECK(c.assignments[2] == c.assignments[3]);
  CHECK(c.assignments[0] != c.assignments[2]);
  CHECK(c.wcss == doctest::Approx(1.0));
  CHECK(c.goc == doctest::Approx(5.0));

  const auto one = kmeans(x, 1, 3);
  CHECK(one.centers(0, 0) == doctest::Approx(5.5));
  CHECK_THROWS_AS((void)kmeans(x, 5, 3), InvalidArgument);
}

TEST_CASE("k-means is deterministic and its objective never rises") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd x(60, 3);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) {
      x(i, j) = g(rng) + 4.0 * static_cast<double>(i % 3 == j);
    }
  }
  for (size_t k : {2, 3, 5}) {
    const auto a = kmeans(x, k, 17);
    const auto b = kmeans(x, k, 17);
    CHECK(a.assignments == b.assignments);
    CHECK(a.centers == b.centers);
    for (size_t i = 1; i < a.wcssHistory.size(); ++i) {
      CHECK(a.wcssHistory[i] <= a.wcssHistory[i - 1] + 1e-12);
    }
    std::vector<size_t> sizes(k, 0);
    for (size_t v : a.assignments) {
      ++sizes[v];
    }
    CHECK(*std::min_element(sizes.begin(), sizes.end()) > 0);
  }
}

TEST_CASE("goodness of clustering examples") {
  const auto x = column({0, 1, 10, 11});
  const std::vector<size_t> split = {0, 0, 1, 1};
  CHECK(goodnessOfClustering(x, split) == 5.0);
  CHECK(oracle::pairwiseGoc(x, split) == doctest::Approx(5.0));

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<size_t> labels = split;
    do {
      std::shuffle(labels.begin(), labels.end(), rng);
    } while (labels == split || labels == std::vector<size_t>{1, 1, 0, 0});
    CHECK(goodnessOfClustering(x, labels) < 5.0);
  }

  const auto same = column({2, 2, 2, 2});
  CHECK(goodnessOfClustering(same, split) == 0.0);
  CHECK_THROWS_AS((void)goodnessOfClustering(x, {0, 0, 0, 0}), InvalidArgument);
}

TEST_CASE("goodness of clustering grows with cluster spacing") {
  double previous = 0.0;
  for (double gap : {2.0, 4.0, 8.0, 16.0, 32.0}) {
    const auto x = column({0, 1, 0.5, gap, gap + 1, gap + 0.25});
    const double v = goodnessOfClustering(x, {0, 0, 0, 1, 1, 1});
    CHECK(v > previous);
    previous = v;
  }
}

TEST_CASE("goodness of clustering agrees with the pairwise oracle") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<size_t> pick(0, 3);
  for (int trial = 0; trial < 40; ++trial) {
    Eigen::MatrixXd x(15, 2);
    std::vector<size_t> a(15);
    for (Eigen::Index i = 0; i < 15; ++i) {
      x(i, 0) = g(rng);
      x(i, 1) = g(rng);
      a[static_cast<size_t>(i)] = static_cast<size_t>(i) < 4 ? static_cast<size_t>(i) : pick(rng);
    }
    CHECK(goodnessOfClustering(x, a) == doctest::Approx(oracle::pairwiseGoc(x, a)).epsilon(1e-12));
  }
}

TEST_CASE("exemplar selection") {
  Eigen::MatrixXd blobs(6, 2);
  blobs << 10, 10, 0, 0, 10.2, 10, 0.1, 0, 0, 0.2, 0.1, 0.1;
  const auto sel = selectExemplar(blobs, 0);
  CHECK(sel.index != 0);
  CHECK(sel.index != 2);
  CHECK_FALSE(sel.medoid);
  for (size_t k : {2, 3, 4, 5}) {
    const auto c = kmeans(blobs, k, 0);
    CHECK(c.goc <= sel.goc);
    if (k == sel.k) {
      CHECK(c.goc == sel.goc);
    }
  }

  const Eigen::MatrixXd same = Eigen::MatrixXd::Ones(6, 3);
  CHECK(selectExemplar(same, 0).index == 0);

  const auto onlyTwo = selectExemplar(blobs, 0, {2});
  CHECK(onlyTwo.k == 2);

  Eigen::MatrixXd few(3, 1);
  few << 0, 1, 5;
  const auto medoid = selectExemplar(few, 0);
  CHECK(medoid.medoid);
  CHECK(medoid.index == 1);
  CHECK_FALSE(medoid.warnings.empty());
  CHECK_THROWS_AS((void)selectExemplar(Eigen::MatrixXd::Zero(1, 2), 0), InvalidArgument);
}

TEST_CASE("nearest neighbor classification") {
  const auto train = column({0, 10});
  CHECK(knnClassify(train, {"A", "B"}, column({1}), 1) == std::vector<std::string>{"A"});
  CHECK(knnClassify(train, {"A", "B"}, column({10}), 1) == std::vector<std::string>{"B"});
  const auto three = column({0, 1, 2, 50});
  CHECK(knnClassify(three, {"A", "A", "B", "B"}, column({0.9}), 3) == std::vector<std::string>{"A"});
  // A 1-1 split goes to the nearest neighbor's label.
  CHECK(knnClassify(column({0, 3}), {"B", "A"}, column({1}), 2) == std::vector<std::string>{"B"});
  CHECK_THROWS_AS((void)knnClassify(Eigen::MatrixXd(0, 1), {}, column({1}), 1), InvalidArgument);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd pts(30, 4);
  std::vector<std::string> labels;
  for (Eigen::Index i = 0; i < 30; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) {
      pts(i, j) = g(rng);
    }
    labels.push_back("c" + std::to_string(i % 5));
  }
  CHECK(knnClassify(pts, labels, pts, 1) == labels);
}

TEST_CASE("evaluation protocol counts") {
  auto ds = makeSyntheticSuite({.perClass = 2, .seed = 8});
  const auto prepared = PreparedDataset::build(ds, FeatureOptions{});
  EvaluationOptions options;
  options.folds = 2;
  options.alpha = 1.0;
  options.lambda = 0.5;
  options.generation = quickGeneration();
  const auto report = evaluateConversions(prepared, options);
  CHECK(report.attempted() == 24);
  for (const auto& c : report.conversions) {
    CHECK(c.target != c.original);
  }
  CHECK(report.confusion.counts.rows() == 4);
  CHECK(report.confusion.counts.cols() == 4);
  CHECK(report.targetAccuracy >= 0.0);
  CHECK(report.targetAccuracy <= 1.0);
  CHECK(report.selfConfusion.total() == 0);

  const auto again = evaluateConversions(prepared, options);
  CHECK(again.conversionsCsv() == report.conversionsCsv());
  CHECK(again.summaryCsv() == report.summaryCsv());

  options.selfConvert = true;
  const auto withSelf = evaluateConversions(prepared, options);
  CHECK(withSelf.attempted() == 32);
}

TEST_CASE("search methods and their names") {
  for (auto m : {SearchMethod::LmaSubspace, SearchMethod::HmmKl, SearchMethod::HmmRmlr}) {
    CHECK(searchMethodFromName(searchMethodName(m)) == m);
  }
  CHECK_THROWS_AS((void)searchMethodFromName("grep"), InvalidArgument);
}

TEST_CASE("benchmark retrieval is deterministic") {
  const auto prepared = PreparedDataset::build(makeSyntheticSuite({.perClass = 3, .seed = 2}), FeatureOptions{});
  const auto model = fitRmlr(prepared.features, prepared.dataset.labels(), lmaComponentNames(), 1.0, 1.0);
  BenchmarkOptions options;
  options.numStates = 3;
  options.klSamples = 2;
  options.klHorizon = 40;
  options.training.maxIter = 10;
  const auto cache = buildHmmSearchCache(prepared, options);
  const std::vector<SearchQuery> queries = {{0, "sad"}, {4, "anger"}, {10, "fear"}};
  const auto a = benchmarkNnSearch(prepared, model, queries, options, &cache);
  const auto b = benchmarkNnSearch(prepared, model, queries, options, &cache);
  REQUIRE(a.size() == 3);
  for (size_t m = 0; m < a.size(); ++m) {
    CHECK(a[m].retrieved == b[m].retrieved);
    REQUIRE(a[m].retrieved.size() == queries.size());
    for (size_t q = 0; q < queries.size(); ++q) {
      CHECK(*prepared.dataset.movements[a[m].retrieved[q]].label == queries[q].target);
      CHECK(a[m].retrieved[q] != queries[q].index);
    }
  }
  CHECK(benchmarkRetrievalCsv(prepared, a, queries) == benchmarkRetrievalCsv(prepared, b, queries));
  CHECK_THROWS_AS((void)benchmarkNnSearch(prepared, model, queries, options, nullptr), InvalidArgument);
}

} // TEST_SUITE
