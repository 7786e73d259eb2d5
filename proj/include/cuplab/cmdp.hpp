#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cuplab {

/// Raised when an operation is called outside its documented domain.
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Which per-step signal a value computation is about.
enum class Signal { reward, cost };

/**
 * A single-constraint CMDP over finite state and action sets.
 *
 * Reward is observed on transitions, r(s'|s,a), while the cost is a
 * state-action function c(s,a). Transition and reward tensors are stored as
 * one |S|x|S| matrix per action, indexed (s, s').
 */
struct Cmdp {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<Eigen::MatrixXd> transition;  ///< transition[a](s, s') = P(s'|s,a)
    std::vector<Eigen::MatrixXd> reward;      ///< reward[a](s, s') = r(s'|s,a)
    Eigen::MatrixXd cost;                     ///< cost(s, a) = c(s,a)
    Eigen::VectorXd rho0;
    double gamma = 0.9;
    double cost_limit = 0.0;

    double p(std::size_t s, std::size_t a, std::size_t next) const { return transition[a](s, next); }
    double r(std::size_t s, std::size_t a, std::size_t next) const { return reward[a](s, next); }
    double c(std::size_t s, std::size_t a) const { return cost(s, a); }

    /// E_{s'}[r(s'|s,a)] as an |S|x|A| table.
    Eigen::MatrixXd expected_reward() const;

    bool operator==(const Cmdp& other) const;
};

/// List of violated invariants; empty means the instance is valid.
struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

ValidationReport validate_cmdp(const Cmdp& cmdp);

/// Two states {s0, s1}, actions {stay, flip}; reward 1 on landing in s1,
/// cost 1 for every flip, start in s0.
Cmdp build_two_state(double gamma, double cost_limit);

struct Cell {
    int x = 0;
    int y = 0;
    auto operator<=>(const Cell&) const = default;
};

/// Slippery gridworld with actions N, E, S, W. The intended move happens with
/// probability 0.9, each perpendicular move with 0.05; moves off the grid
/// leave the agent in place. Landing on a hazard costs 1 (in expectation over
/// the slip), reaching the goal pays 1 and the goal is absorbing. Start cell
/// is (0, 0); state index is y * width + x.
Cmdp build_gridworld(std::size_t width, std::size_t height, const std::vector<Cell>& hazards, Cell goal,
                     double gamma, double cost_limit);

/// Random dense CMDP. Transition rows are normalized uniform positives,
/// rewards and costs uniform in [0, 1), rho0 uniform. Pure in its arguments.
Cmdp build_random_cmdp(std::size_t n_states, std::size_t n_actions, std::uint64_t seed, double gamma = 0.9,
                       double cost_limit = 5.0);

/// Tabular softmax policy, pi(a|s) proportional to exp(logits(s, a)).
class SoftmaxPolicy {
public:
    explicit SoftmaxPolicy(Eigen::MatrixXd logits);

    static SoftmaxPolicy uniform(std::size_t n_states, std::size_t n_actions);
    /// Logits = log(probs); every entry must be strictly positive.
    static SoftmaxPolicy from_probabilities(const Eigen::MatrixXd& probs);

    const Eigen::MatrixXd& logits() const { return logits_; }
    std::size_t n_states() const { return static_cast<std::size_t>(logits_.rows()); }
    std::size_t n_actions() const { return static_cast<std::size_t>(logits_.cols()); }

    /// Row-stochastic |S|x|A| table.
    Eigen::MatrixXd distribution() const;

private:
    Eigen::MatrixXd logits_;
};

Eigen::MatrixXd policy_distribution(const SoftmaxPolicy& policy);

/// Numerically stable softmax of one row of logits.
Eigen::RowVectorXd softmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& logits);

/// KL(p || q) for two strictly positive distributions on the same support.
double kl_divergence(const Eigen::Ref<const Eigen::RowVectorXd>& p, const Eigen::Ref<const Eigen::RowVectorXd>& q);

}  // namespace cuplab
