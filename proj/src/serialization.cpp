#include "affectmod/serialization.h"

#include "affectmod/errors.h"

#include <fmt/format.h>

namespace affectmod {

namespace {

Json matrixJson(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      row.push_back(m(i, j));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vectorJson(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back(v(i));
  }
  return out;
}

Eigen::MatrixXd matrixFromJson(const Json& j, std::string_view what) {
  if (!j.is_array()) {
    throw InvalidArgument(fmt::format("'{}' must be an array of rows", what));
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw InvalidArgument(fmt::format("'{}' has ragged rows", what));
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(i, c) = row[static_cast<size_t>(c)].get<double>();
    }
  }
  return m;
}

Eigen::VectorXd vectorFromJson(const Json& j, std::string_view what) {
  if (!j.is_array()) {
    throw InvalidArgument(fmt::format("'{}' must be an array", what));
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

template <typename Fn>
auto parsing(std::string_view what, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Json::exception& e) {
    throw InvalidArgument(fmt::format("malformed {} JSON: {}", what, e.what()));
  }
}

} // namespace

Json toJson(const RmlrModel& model) {
  Json j;
  j["type"] = "rmlr";
  j["label_order"] = model.labelOrder;
  j["feature_order"] = model.featureOrder;
  j["alpha"] = model.fit.alpha;
  j["lambda"] = model.fit.lambda;
  j["objective"] = model.fit.objective;
  j["iterations"] = model.fit.iterations;
  j["converged"] = model.fit.converged;
  j["mean"] = vectorJson(model.mean);
  j["scale"] = vectorJson(model.scale);
  j["theta"] = matrixJson(model.theta);
  Json salient = Json::object();
  for (const auto& label : model.labelOrder) {
    salient[label] = salientComponents(model, label);
  }
  j["salient"] = std::move(salient);
  return j;
}

RmlrModel rmlrModelFromJson(const Json& j) {
  return parsing("model", [&] {
    RmlrModel m;
    m.labelOrder = j.at("label_order").get<std::vector<std::string>>();
    m.featureOrder = j.at("feature_order").get<std::vector<std::string>>();
    m.fit.alpha = j.at("alpha").get<double>();
    m.fit.lambda = j.at("lambda").get<double>();
    m.fit.objective = j.value("objective", 0.0);
    m.fit.iterations = j.value("iterations", size_t{0});
    m.fit.converged = j.value("converged", false);
    m.mean = vectorFromJson(j.at("mean"), "mean");
    m.scale = vectorFromJson(j.at("scale"), "scale");
    m.theta = matrixFromJson(j.at("theta"), "theta");
    m.validate();
    return m;
  });
}

Json toJson(const GaussianHmm& hmm, const TrainReport* report) {
  Json j;
  j["n_states"] = hmm.numStates();
  j["d"] = hmm.dim();
  j["priors"] = vectorJson(hmm.priors);
  j["transitions"] = matrixJson(hmm.transitions);
  j["means"] = matrixJson(hmm.means);
  Json covs = Json::array();
  for (const auto& c : hmm.covariances) {
    covs.push_back(matrixJson(c));
  }
  j["covariances"] = std::move(covs);
  if (report != nullptr) {
    j["train"] = {
        {"iterations", report->iterations},
        {"converged", report->converged},
        {"log_likelihood", report->logLikelihoodPerIter},
    };
  }
  return j;
}

GaussianHmm gaussianHmmFromJson(const Json& j) {
  return parsing("HMM", [&] {
    GaussianHmm h;
    h.priors = vectorFromJson(j.at("priors"), "priors");
    h.transitions = matrixFromJson(j.at("transitions"), "transitions");
    h.means = matrixFromJson(j.at("means"), "means");
    for (const auto& c : j.at("covariances")) {
      h.covariances.push_back(matrixFromJson(c, "covariances"));
    }
    h.validate();
    return h;
  });
}

Json toJson(const FilterParams& params) {
  Json j;
  if (params.kind == FilterKind::Butterworth2) {
    j["kind"] = "butterworth2";
    j["cutoff_hz"] = params.cutoffHz;
  } else {
    j["kind"] = "moving_average";
    j["window_frames"] = params.windowFrames;
  }
  j["zero_phase"] = params.zeroPhase;
  return j;
}

FilterParams filterParamsFromJson(const Json& j) {
  return parsing("filter", [&] {
    const auto kind = j.at("kind").get<std::string>();
    const bool zp = j.value("zero_phase", true);
    if (kind == "butterworth2") {
      return FilterParams::butterworth(j.at("cutoff_hz").get<double>(), zp);
    }
    if (kind == "moving_average") {
      return FilterParams::movingAverage(j.at("window_frames").get<int>(), zp);
    }
    throw InvalidArgument(fmt::format("unknown filter kind '{}'", kind));
  });
}

Json toJson(const GenerationConfig& config) {
  Json j;
  j["n_states"] = config.numStates;
  j["n_d"] = config.desiredCopies;
  j["epsilon_fraction"] = config.epsilonFraction;
  j["smoothing"] = toJson(config.smoothing);
  j["distance_metric"] = "euclidean";
  j["seed"] = config.seed;
  j["classifier_k"] = config.classifierK;
  j["training"] = {
      {"max_iter", config.training.maxIter},
      {"tolerance", config.training.tolerance},
      {"covariance_floor", config.training.covarianceFloor},
  };
  j["features"] = {
      {"filter", toJson(config.features.filter)},
      {"per_frame_units", config.features.perFrameUnits},
      {"shape_flow", config.features.shapeFlow == ShapeFlowMode::BoundingBox ? "bounding_box" : "convex_hull"},
  };
  return j;
}

Json generationSidecar(const GenerationResult& result, const Json& runConfig) {
  Json j;
  j["source_id"] = result.output.sourceId;
  j["original_emotion"] = result.originalEmotion;
  j["target_emotion"] = result.targetEmotion;
  j["output_frames"] = result.output.numFrames();
  j["frame_rate"] = result.output.frameRate;
  j["state_sequence"] = result.stateSequence;
  j["neighbors"] = result.neighbors;
  j["neighbor_distances"] = result.neighborDistances;
  j["subspace"] = result.subspace;
  j["radius"] = result.radius;
  j["fallback"] = result.fallback;
  j["reconstruction_error"] = result.reconstructionError;
  j["output_distance"] = result.outputDistance;
  j["training"] = {
      {"iterations", result.training.iterations},
      {"converged", result.training.converged},
      {"log_likelihood", result.training.logLikelihoodPerIter},
  };
  j["warnings"] = result.warnings;
  j["config"] = runConfig;
  return j;
}

} // namespace affectmod
