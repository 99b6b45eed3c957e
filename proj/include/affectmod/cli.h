#pragma once

#include "affectmod/generation.h"
#include "affectmod/serialization.h"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace affectmod::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Every resolved setting of one invocation; echoed into each output.
struct RunConfig {
  std::string command;
  std::string manifest;
  std::string out;
  std::string features;
  std::string model;
  std::string sourceId;
  std::string target;
  uint64_t seed = 0;
  GenerationConfig generation;
  size_t folds = 10;
  std::vector<double> alphaGrid;
  size_t numLambda = 100;
  /// Fixed hyperparameters; negative means "choose by cross-validation" or
  /// "take from the model".
  double alpha = -1.0;
  double lambda = -1.0;
  bool selfConvert = false;
  std::vector<std::string> benchMethods;
  size_t benchQueries = 0;
  size_t benchStates = 6;
  size_t perClass = 20;
  double noise = 0.0005;
};

Json toJson(const RunConfig& config);

/// Runs the command line `args` (without the program name). Returns the exit
/// code: 0 success, 1 usage error, 2 runtime or data error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace affectmod::cli
