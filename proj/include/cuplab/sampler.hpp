#pragma once

#include "cuplab/cmdp.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace cuplab {

/// One fixed-length rollout. states has horizon + 1 entries; the rest have horizon.
struct Episode {
    std::vector<std::size_t> states;
    std::vector<std::size_t> actions;
    std::vector<double> rewards;  ///< rewards[t] = r(s_{t+1} | s_t, a_t)
    std::vector<double> costs;    ///< costs[t] = c(s_t, a_t)
    double reward_return = 0.0;   ///< sum_t gamma^t rewards[t]
    double cost_return = 0.0;     ///< sum_t gamma^t costs[t]
    std::uint64_t stream_seed = 0;
};

struct TrajectoryBatch {
    std::vector<Episode> episodes;
    std::size_t horizon = 0;
    double gamma = 0.0;
    std::uint64_t seed = 0;

    std::size_t size() const { return episodes.size(); }
    double mean_reward_return() const;
    double mean_cost_return() const;
};

/// Episode i draws from its own stream derive_seed(seed, i); no early termination.
TrajectoryBatch sample_trajectories(const Cmdp& cmdp, const SoftmaxPolicy& policy, std::size_t horizon,
                                    std::size_t episodes, std::uint64_t seed);

/// Per-step tables, episodes x horizon.
struct GaeTables {
    Eigen::MatrixXd td;
    Eigen::MatrixXd td_cost;
    Eigen::MatrixXd adv;
    Eigen::MatrixXd adv_cost;
    Eigen::MatrixXd v_target;
    Eigen::MatrixXd v_target_cost;
};

/// TD errors r_{t+1} + gamma v(s_{t+1}) - v(s_t) (cost: c in place of r), GAE by backward
/// recursion truncated at the horizon, targets adv + v(s_t).
GaeTables compute_gae(const TrajectoryBatch& batch, const Eigen::VectorXd& v_table,
                      const Eigen::VectorXd& v_cost_table, double gamma, double lambda);

/// Reference double sum adv_t = sum_{j >= t} (gamma lambda)^{j-t} td_j, row by row.
Eigen::MatrixXd direct_gae(const Eigen::MatrixXd& td, double gamma, double lambda);

/// One JSON object per episode and line.
void write_batch_jsonl(std::ostream& out, const TrajectoryBatch& batch);

}  // namespace cuplab
