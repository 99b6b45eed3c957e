#pragma once

#include "affectmod/filter.h"
#include "affectmod/generation.h"
#include "affectmod/hmm.h"
#include "affectmod/rmlr.h"

#include <json.hpp>

namespace affectmod {

using Json = nlohmann::ordered_json;

Json toJson(const RmlrModel& model);
RmlrModel rmlrModelFromJson(const Json& j);

Json toJson(const GaussianHmm& hmm, const TrainReport* report = nullptr);
GaussianHmm gaussianHmmFromJson(const Json& j);

Json toJson(const FilterParams& params);
FilterParams filterParamsFromJson(const Json& j);

Json toJson(const GenerationConfig& config);

/// Diagnostics written next to a generated trajectory. `runConfig` is echoed
/// verbatim under "config".
Json generationSidecar(const GenerationResult& result, const Json& runConfig);

} // namespace affectmod
