#pragma once

#include <json.hpp>

#include "sde/enhance.hpp"
#include "sde/gradcheck.hpp"
#include "sde/harness.hpp"
#include "sde/losses.hpp"
#include "sde/spectral.hpp"

namespace sde {

using Json = nlohmann::json;

Json delta_spec_to_json(const DeltaSpec& d);
DeltaSpec delta_spec_from_json(const Json& j);

Json loss_report_to_json(const LossReport& r);
Json step_record_to_json(const StepRecord& s);

/// Partition + report document for the analyze command. Indices are
/// 1-based to match the sigma_1 >= sigma_2 >= ... convention.
Json partition_report_to_json(const SubspacePartition& part, const SpectralReport& rep);

Json grad_summary_to_json(const GradcheckSummary& s);

Json train_config_to_json(const TrainConfig& cfg);
Json task_config_to_json(const SyntheticTaskConfig& cfg);

/// Strict parsers: unknown or mistyped keys throw ConfigError naming the key.
TrainConfig train_config_from_json(const Json& j);
SyntheticTaskConfig task_config_from_json(const Json& j);

}  // namespace sde
