#pragma once

#include "cuplab/bounds.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <utility>
#include <vector>

namespace cuplab {

/// Randomized bound campaign over random CMDPs and independent N(0,1)-logit policy pairs.
struct CampaignConfig {
    std::size_t n_cmdps = 100;
    std::size_t pairs_per_cmdp = 5;
    std::vector<double> lambdas{0.0, 0.5, 0.95};
    std::pair<std::size_t, std::size_t> state_range{2, 6};   ///< inclusive
    std::pair<std::size_t, std::size_t> action_range{2, 3};  ///< inclusive
    std::uint64_t seed = 0;
};

struct CampaignRow {
    std::uint64_t cmdp_seed = 0;
    std::size_t cmdp_index = 0;
    std::size_t pair_index = 0;
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    double lambda = 0.0;
    BoundReport report;
    double cpo_relative_gap = 0.0;  ///< only meaningful at lambda = 0
    bool pass_cpo = true;
};

struct LambdaSummary {
    std::size_t rows = 0;
    std::size_t theorem1_violations = 0;
    std::size_t prop1_violations = 0;
    std::size_t prop2_violations = 0;
    std::size_t kl_order_violations = 0;
    std::size_t cpo_violations = 0;
    std::size_t identity_violations = 0;
    std::size_t on_path_violations = 0;
    std::size_t denom_flags = 0;
    std::size_t lemma1_holds = 0;
    double max_classic_gap = 0.0;
    double max_identity_gap = 0.0;
    double max_cpo_gap = 0.0;
    double worst_theorem1_margin = 0.0;
    double worst_prop1_margin = 0.0;
    double worst_prop2_margin = 0.0;

    std::size_t hard_violations() const {
        return theorem1_violations + prop1_violations + prop2_violations + kl_order_violations + cpo_violations +
               identity_violations;
    }
};

inline constexpr double identity_tolerance = 1e-8;
inline constexpr double cpo_tolerance = 1e-10;

/// Pure in the config; rows ordered by (cmdp, pair, lambda).
std::vector<CampaignRow> run_bound_campaign(const CampaignConfig& config);

std::map<double, LambdaSummary> summarize(const std::vector<CampaignRow>& rows);

void write_campaign_csv(std::ostream& out, const std::vector<CampaignRow>& rows);
void write_campaign_summary(std::ostream& out, const std::map<double, LambdaSummary>& summary);

}  // namespace cuplab
