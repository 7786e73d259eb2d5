#pragma once

#include "cuplab/cmdp.hpp"

#include <json.hpp>

#include <stdexcept>
#include <vector>

namespace cuplab {

/// A dense solve whose residual check failed.
class LinearSolveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Solves A x = b by partial-pivot LU and checks ||Ax - b||_inf < 1e-10 (1 + ||b||_inf).
Eigen::VectorXd checked_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);
Eigen::MatrixXd checked_solve(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// Exact quantities of one (cmdp, policy, signal, lambda) tuple.
struct DpSolution {
    Signal signal = Signal::reward;
    double lambda = 0.0;
    double tilde_gamma = 0.0;
    Eigen::MatrixXd P_pi;      ///< one-step state kernel under the policy
    Eigen::VectorXd r_pi;
    Eigen::VectorXd c_pi;
    Eigen::VectorXd V;         ///< values of the selected signal
    Eigen::MatrixXd Q;
    Eigen::MatrixXd A;
    Eigen::VectorXd d_rho0;    ///< normalized discounted visitation
    Eigen::MatrixXd P_lambda;  ///< lambda-mixed multi-step kernel
    Eigen::VectorXd d_lambda;  ///< visitation under P_lambda with discount tilde_gamma
    Eigen::VectorXd r_lambda;  ///< lambda-return signal, (I - gamma lambda P_pi)^-1 signal_pi
    Eigen::MatrixXd A_gae;     ///< exact GAE table with phi = V
};

double tilde_gamma(double gamma, double lambda);

/// Per-(s,a) expected one-step signal: E_{s'}[r(s'|s,a)] or c(s,a).
Eigen::MatrixXd signal_table(const Cmdp& cmdp, Signal signal);

/// Sum_a pi(a|s) P(s'|s,a).
Eigen::MatrixXd policy_transition(const Cmdp& cmdp, const Eigen::MatrixXd& pi);

/// Row-wise expectation of a |S|x|A| table under pi.
Eigen::VectorXd policy_average(const Eigen::MatrixXd& table, const Eigen::MatrixXd& pi);

/// Expected one-step TD error, signal + gamma E[phi(s')] - phi(s), per (s,a).
Eigen::MatrixXd td_table(const Cmdp& cmdp, const Eigen::VectorXd& phi, Signal signal);

/// Expected absolute one-step TD error per (s,a); the expectation runs over s'.
Eigen::MatrixXd abs_td_table(const Cmdp& cmdp, const Eigen::VectorXd& phi, Signal signal);

/// Values of `signal` under the policy table pi.
Eigen::VectorXd state_values(const Cmdp& cmdp, const Eigen::MatrixXd& pi, Signal signal);

/// Exact GAE table for an arbitrary state function phi.
Eigen::MatrixXd exact_gae(const Cmdp& cmdp, const Eigen::MatrixXd& pi, const Eigen::VectorXd& phi, double lambda,
                          Signal signal);

/// lambda in [0, 1]; lambda = 1 takes the closed form with tilde_gamma = 0.
DpSolution solve_policy(const Cmdp& cmdp, const Eigen::MatrixXd& pi, Signal signal, double lambda);
DpSolution solve_policy(const Cmdp& cmdp, const SoftmaxPolicy& policy, Signal signal, double lambda);

double objective_j(const Cmdp& cmdp, const Eigen::MatrixXd& pi, Signal signal);
double objective_j(const Cmdp& cmdp, const SoftmaxPolicy& policy, Signal signal);

/// delta_t = P_pi^t delta_0 for t = 0..t_max inclusive.
std::vector<Eigen::VectorXd> expected_td_error_vectors(const Cmdp& cmdp, const SoftmaxPolicy& policy,
                                                       const Eigen::VectorXd& phi, std::size_t t_max,
                                                       Signal signal = Signal::reward);

/// Smallest t >= 1 with rate^t * scale / (1 - rate) < tol. rate must lie in [0, 1).
std::size_t required_t_max(double rate, double scale, double tol = 1e-10);

struct IdentityCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    double gap = 0.0;
    double tail_bound = 0.0;
};

/// J(pi) against E_rho0[phi] + 1/(1 - tilde_gamma) E_{d_lambda}[sum_t (gamma lambda)^t delta_t].
/// Throws PreconditionError when t_max leaves a tail above 1e-10.
IdentityCheck prop4_identity_check(const Cmdp& cmdp, const SoftmaxPolicy& policy, const Eigen::VectorXd& phi,
                                   double lambda, std::size_t t_max);

nlohmann::json to_json(const DpSolution& solution);

}  // namespace cuplab
