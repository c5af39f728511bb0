#pragma once

#include <optional>
#include <string>

#include "json.hpp"

#include "sommab/core.hpp"
#include "sommab/harness.hpp"
#include "sommab/ssnl.hpp"

namespace sommab {

/// A parsed run configuration. Exactly one of `instance` / `ssnl` is set.
struct RunConfig {
  std::optional<SommabInstance> instance;
  std::optional<SsnlProblem> ssnl;
  ExperimentConfig experiment;
  std::string output_directory = ".";
  std::string hash;  ///< FNV-1a 64 of the canonical document, hex
};

/// Parses and validates a JSON document. Errors carry the JSON pointer of
/// the offending field.
RunConfig parse_config(const nlohmann::json& document);
RunConfig load_config(const std::string& path);

/// Reads a file as JSON; comments are rejected. Throws ConfigError.
nlohmann::json read_json_file(const std::string& path);

/// Hash of the canonical serialization (sorted keys, no whitespace).
std::string canonical_hash(const nlohmann::json& document);

RewardModel parse_reward_model(const nlohmann::json& node, const std::string& path);
nlohmann::json to_json(const RewardModel& model);

/// Explicit `instance` section equivalent to a built instance.
nlohmann::json instance_to_json(const SommabInstance& instance);

}  // namespace sommab
