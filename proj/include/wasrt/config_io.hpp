#pragma once

#include <nlohmann/json.hpp>

#include "wasrt/evaluation.hpp"
#include "wasrt/network.hpp"
#include "wasrt/training.hpp"

namespace wasrt {

// JSON forms of the configuration records. Missing keys keep their defaults;
// unknown keys are rejected so typos surface as ConfigError.

void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const EvalConfig& c);
void from_json(const nlohmann::json& j, EvalConfig& c);

/// Reads a JSON document; IoError if unreadable, ConfigError if malformed.
nlohmann::json read_json_file(const fs::path& path);

}  // namespace wasrt
