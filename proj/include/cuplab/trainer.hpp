#pragma once

#include "cuplab/bounds.hpp"
#include "cuplab/sampler.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cuplab {

struct CupConfig {
    double gamma = 0.99;  ///< must equal the environment's discount
    double lambda_gae = 0.95;
    std::size_t horizon_T = 200;
    std::size_t episodes_M = 25;
    double alpha = 0.15;  ///< KL penalty of the improvement step
    double beta = 0.15;   ///< only used by the update-bound checker
    double nu_init = 0.0;
    double nu_max = 2.0;
    double nu_lr = 0.01;
    double policy_lr = 3e-4;
    std::size_t optimization_epochs = 10;
    std::size_t minibatch = 64;
    std::size_t iterations = 100;
    double cost_limit = 5.0;  ///< must equal the environment's limit
    std::uint64_t seed = 0;
    std::optional<Eigen::MatrixXd> initial_logits;  ///< uniform policy when absent
};

/// Throws PreconditionError naming the first broken field.
void validate_config(const CupConfig& config, const Cmdp& cmdp);

/// One visited (state, action) with the behaviour probability and both advantages.
struct Sample {
    std::size_t state = 0;
    std::size_t action = 0;
    double behaviour_prob = 0.0;
    double adv = 0.0;
    double adv_cost = 0.0;
};

std::vector<Sample> flatten_batch(const TrajectoryBatch& batch, const GaeTables& gae, const SoftmaxPolicy& behaviour);

/// Mean over the batch's visited states (t < horizon) of KL(pi_a(.|s) || pi_b(.|s)).
double empirical_kl(const SoftmaxPolicy& pi_a, const SoftmaxPolicy& pi_b, const TrajectoryBatch& batch);

/// A scalar surrogate and its gradient with respect to the logits.
struct Surrogate {
    double value = 0.0;
    Eigen::MatrixXd grad;
};

/// mean[ratio adv] - alpha sqrt(mean KL(pi_ref, pi_theta) + 1e-12) over the samples.
Surrogate improvement_objective(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& pi_ref,
                                const std::vector<Sample>& samples, double alpha);

/// mean KL(pi_target, pi_theta) + cost_weight mean[ratio adv_cost] over the samples.
Surrogate projection_objective(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& pi_target,
                               const std::vector<Sample>& samples, double cost_weight);

/// mean[ratio (adv - nu adv_cost)] - alpha sqrt(mean KL(pi_ref, pi_theta) + 1e-12).
Surrogate lagrangian_objective(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& pi_ref,
                               const std::vector<Sample>& samples, double alpha, double nu);

struct StepResult {
    SoftmaxPolicy policy;
    bool fallback = false;
    std::string warning;
};

/// Minibatch gradient ascent on the improvement surrogate. Falls back to pi_k when the
/// full-batch surrogate decreases or turns non-finite. `stream` seeds the shuffle.
StepResult improvement_step(const SoftmaxPolicy& pi_k, const TrajectoryBatch& batch, const GaeTables& gae,
                            const CupConfig& config, std::uint64_t stream = 0);

double nu_update(double nu_k, double jc_hat, const CupConfig& config);

struct ProjectionResult {
    SoftmaxPolicy policy;
    double nu = 0.0;
    bool fallback = false;
    std::string warning;
};

ProjectionResult projection_step(const SoftmaxPolicy& pi_k, const SoftmaxPolicy& pi_k_half,
                                 const TrajectoryBatch& batch, const GaeTables& gae, double jc_hat, double nu_k,
                                 const CupConfig& config, std::uint64_t stream = 0);

/// Tabular least squares: per-state mean of the targets; unvisited states keep the previous value.
std::pair<Eigen::VectorXd, Eigen::VectorXd> fit_critics(const TrajectoryBatch& batch, const GaeTables& gae,
                                                        const Eigen::VectorXd& v_prev, const Eigen::VectorXd& vc_prev);

struct TrainRow {
    std::size_t iteration = 0;
    double j_hat = 0.0;
    double jc_hat = 0.0;
    double j_exact = 0.0;   ///< NaN when exact logging is off
    double jc_exact = 0.0;
    double nu = 0.0;
    double empirical_kl_step1 = 0.0;
    double empirical_kl_step2 = 0.0;
    double chi_k = 0.0;
    bool theorem2_improvement = false;
    bool theorem2_cost = false;
    bool denom_flag = false;
    bool fallback = false;
    double improvement_floor = 0.0;
    double cost_ceiling = 0.0;
};

struct TrainLog {
    std::vector<TrainRow> rows;
    std::vector<std::string> warnings;
    bool exact = false;
    double j_initial = 0.0;   ///< exact values of the starting policy (NaN when exact logging is off)
    double jc_initial = 0.0;
    SoftmaxPolicy final_policy{Eigen::MatrixXd()};
};

/// Exact logging threshold on |S| |A|.
inline constexpr std::size_t exact_logging_limit = 4096;

TrainLog train_cup(const Cmdp& cmdp, const CupConfig& config);
TrainLog train_lagrangian_baseline(const Cmdp& cmdp, const CupConfig& config);

void write_train_csv(std::ostream& out, const TrainLog& log);

}  // namespace cuplab
