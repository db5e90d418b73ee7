#pragma once

#include <string>

#include "oid/simulate.hpp"

namespace oid {

/// Parse an experiment config document (JSON; every field optional, with
/// the defaults from ExperimentConfig). Unknown keys are rejected so typos
/// fail loudly.
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& config);

}  // namespace oid
