#pragma once

#include "cuplab/campaign.hpp"
#include "cuplab/env_spec.hpp"
#include "cuplab/trainer.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace cuplab {

/**
 * Experiment document:
 *
 *   {"env": <environment spec>,
 *    "cup": {<CupConfig fields>},
 *    "campaign": {"n_cmdps": 100, "pairs_per_cmdp": 5, "lambdas": [0, 0.5, 0.95],
 *                 "state_range": [2, 6], "action_range": [2, 3]},
 *    "seed": 0, "output_path": "", "baseline": false}
 *
 * "env" is required by train and describe. cup.gamma and cup.cost_limit default to
 * the environment's values and must match them when given. Unknown keys are rejected.
 */
struct ExperimentConfig {
    std::optional<nlohmann::json> env;  ///< resolved environment spec
    CupConfig cup;
    CampaignConfig campaign;
    std::uint64_t seed = 0;
    std::string output_path;
    bool baseline = false;
};

/// Throws ConfigError naming the offending key.
ExperimentConfig parse_experiment(const nlohmann::json& document);

/// Fully resolved document; parsing it again yields the same document.
nlohmann::json to_json(const ExperimentConfig& config);

ExperimentConfig load_experiment(const std::string& path);

struct CommandOptions {
    std::string config_path;
    std::optional<std::string> output_path;
    std::optional<std::string> dump_dp_path;
    std::optional<std::string> dump_batch_path;
    bool stamp = true;  ///< emit the leading "#" comment line with a timestamp
};

enum ExitCode : int { exit_ok = 0, exit_violation = 1, exit_config = 2 };

/// Runs verify-bounds, train or describe. CSV goes to the output path or, when none is set, to `out`.
int run_command(const std::string& command, const CommandOptions& options, std::ostream& out, std::ostream& err);

}  // namespace cuplab
