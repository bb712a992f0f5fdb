#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "clair/synthetic.hpp"
#include "clair/trainer.hpp"

namespace clair {

inline constexpr const char* kToolVersion = "0.1.0";

std::vector<std::string> preset_names();

/// "claira", "ablation", "clairb", or "synthetic" (the tuned desk-scale setup).
TrainConfig preset(const std::string& name);

nlohmann::json to_json(const TrainConfig& cfg);
/// Overlays the keys present in j; unknown keys raise ConfigError.
void apply_json(TrainConfig& cfg, const nlohmann::json& j);

nlohmann::json to_json(const SyntheticConfig& cfg);

nlohmann::json to_json(const EpochRecord& rec);
nlohmann::json to_json(const LossComponents& c);

} // namespace clair
