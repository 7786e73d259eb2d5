#include "cuplab/exact_dp.hpp"

#include <cmath>
#include <string>

namespace cuplab {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Index as_index(std::size_t n) { return static_cast<Index>(n); }

void require_lambda(double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw PreconditionError("lambda must lie in [0,1]");
}

void require_policy_shape(const Cmdp& cmdp, const MatrixXd& pi) {
    if (pi.rows() != as_index(cmdp.n_states) || pi.cols() != as_index(cmdp.n_actions)) {
        throw PreconditionError("policy table shape does not match the cmdp");
    }
}

void require_phi(const Cmdp& cmdp, const VectorXd& phi) {
    if (phi.size() != as_index(cmdp.n_states)) throw PreconditionError("state function length does not match |S|");
}

/// Sum_{s'} P(s'|s,a) v(s') as an |S|x|A| table.
MatrixXd expected_next(const Cmdp& cmdp, const VectorXd& v) {
    MatrixXd out(as_index(cmdp.n_states), as_index(cmdp.n_actions));
    for (std::size_t a = 0; a < cmdp.n_actions; ++a) out.col(as_index(a)) = cmdp.transition[a] * v;
    return out;
}

MatrixXd identity(const Cmdp& cmdp) { return MatrixXd::Identity(as_index(cmdp.n_states), as_index(cmdp.n_states)); }

nlohmann::json vector_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json matrix_json(const MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
    return rows;
}

}  // namespace

Eigen::VectorXd checked_solve(const MatrixXd& A, const VectorXd& b) {
    const VectorXd x = A.partialPivLu().solve(b);
    const double residual = (A * x - b).lpNorm<Eigen::Infinity>();
    const double scale = 1.0 + b.lpNorm<Eigen::Infinity>();
    if (!x.allFinite() || !(residual < 1e-10 * scale)) {
        throw LinearSolveError("linear solve residual " + std::to_string(residual) + " exceeds tolerance");
    }
    return x;
}

Eigen::MatrixXd checked_solve(const MatrixXd& A, const MatrixXd& B) {
    const MatrixXd X = A.partialPivLu().solve(B);
    for (Index j = 0; j < B.cols(); ++j) {
        const double residual = (A * X.col(j) - B.col(j)).lpNorm<Eigen::Infinity>();
        if (!X.col(j).allFinite() || !(residual < 1e-10 * (1.0 + B.col(j).lpNorm<Eigen::Infinity>()))) {
            throw LinearSolveError("linear solve residual " + std::to_string(residual) + " exceeds tolerance");
        }
    }
    return X;
}

double tilde_gamma(double gamma, double lambda) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw PreconditionError("gamma must lie in (0,1)");
    require_lambda(lambda);
    return gamma * (1.0 - lambda) / (1.0 - gamma * lambda);
}

Eigen::MatrixXd signal_table(const Cmdp& cmdp, Signal signal) {
    return signal == Signal::reward ? cmdp.expected_reward() : cmdp.cost;
}

Eigen::MatrixXd policy_transition(const Cmdp& cmdp, const MatrixXd& pi) {
    require_policy_shape(cmdp, pi);
    MatrixXd P = MatrixXd::Zero(as_index(cmdp.n_states), as_index(cmdp.n_states));
    for (std::size_t a = 0; a < cmdp.n_actions; ++a) P += pi.col(as_index(a)).asDiagonal() * cmdp.transition[a];
    return P;
}

Eigen::VectorXd policy_average(const MatrixXd& table, const MatrixXd& pi) {
    return table.cwiseProduct(pi).rowwise().sum();
}

Eigen::MatrixXd td_table(const Cmdp& cmdp, const VectorXd& phi, Signal signal) {
    require_phi(cmdp, phi);
    MatrixXd out = signal_table(cmdp, signal) + cmdp.gamma * expected_next(cmdp, phi);
    out.colwise() -= phi;
    return out;
}

Eigen::MatrixXd abs_td_table(const Cmdp& cmdp, const VectorXd& phi, Signal signal) {
    require_phi(cmdp, phi);
    const Index ns = as_index(cmdp.n_states);
    MatrixXd out(ns, as_index(cmdp.n_actions));
    for (std::size_t a = 0; a < cmdp.n_actions; ++a) {
        for (Index s = 0; s < ns; ++s) {
            double acc = 0.0;
            for (Index next = 0; next < ns; ++next) {
                const double step = signal == Signal::reward ? cmdp.reward[a](s, next) : cmdp.cost(s, as_index(a));
                acc += cmdp.transition[a](s, next) * std::abs(step + cmdp.gamma * phi(next) - phi(s));
            }
            out(s, as_index(a)) = acc;
        }
    }
    return out;
}

Eigen::VectorXd state_values(const Cmdp& cmdp, const MatrixXd& pi, Signal signal) {
    const MatrixXd P = policy_transition(cmdp, pi);
    return checked_solve(identity(cmdp) - cmdp.gamma * P, policy_average(signal_table(cmdp, signal), pi));
}

Eigen::MatrixXd exact_gae(const Cmdp& cmdp, const MatrixXd& pi, const VectorXd& phi, double lambda, Signal signal) {
    require_lambda(lambda);
    const MatrixXd P = policy_transition(cmdp, pi);
    const MatrixXd delta = td_table(cmdp, phi, signal);
    const double gl = cmdp.gamma * lambda;
    // Later TD errors are on-policy; only the first one is action-conditioned.
    const VectorXd tail = checked_solve(identity(cmdp) - gl * P, policy_average(delta, pi));
    return delta + gl * expected_next(cmdp, tail);
}

DpSolution solve_policy(const Cmdp& cmdp, const MatrixXd& pi, Signal signal, double lambda) {
    require_lambda(lambda);
    require_policy_shape(cmdp, pi);
    const double g = cmdp.gamma;
    const MatrixXd I = identity(cmdp);

    DpSolution out;
    out.signal = signal;
    out.lambda = lambda;
    out.tilde_gamma = tilde_gamma(g, lambda);
    out.P_pi = policy_transition(cmdp, pi);
    out.r_pi = policy_average(cmdp.expected_reward(), pi);
    out.c_pi = policy_average(cmdp.cost, pi);
    const VectorXd& sig_pi = signal == Signal::reward ? out.r_pi : out.c_pi;

    out.V = checked_solve(I - g * out.P_pi, sig_pi);
    out.Q = signal_table(cmdp, signal) + g * expected_next(cmdp, out.V);
    out.A = out.Q.colwise() - out.V;
    out.d_rho0 = (1.0 - g) * checked_solve(MatrixXd(I - g * out.P_pi.transpose()), cmdp.rho0);

    const double gl = g * lambda;
    const MatrixXd resolvent = checked_solve(MatrixXd(I - gl * out.P_pi), I);
    out.P_lambda = (1.0 - gl) * out.P_pi * resolvent;
    out.d_lambda = (1.0 - out.tilde_gamma) *
                   checked_solve(MatrixXd(I - out.tilde_gamma * out.P_lambda.transpose()), cmdp.rho0);
    out.r_lambda = checked_solve(MatrixXd(I - gl * out.P_pi), sig_pi);
    out.A_gae = exact_gae(cmdp, pi, out.V, lambda, signal);
    return out;
}

DpSolution solve_policy(const Cmdp& cmdp, const SoftmaxPolicy& policy, Signal signal, double lambda) {
    return solve_policy(cmdp, policy.distribution(), signal, lambda);
}

double objective_j(const Cmdp& cmdp, const MatrixXd& pi, Signal signal) {
    return cmdp.rho0.dot(state_values(cmdp, pi, signal));
}

double objective_j(const Cmdp& cmdp, const SoftmaxPolicy& policy, Signal signal) {
    return objective_j(cmdp, policy.distribution(), signal);
}

std::vector<Eigen::VectorXd> expected_td_error_vectors(const Cmdp& cmdp, const SoftmaxPolicy& policy,
                                                       const VectorXd& phi, std::size_t t_max, Signal signal) {
    if (t_max < 1) throw PreconditionError("t_max must be at least 1");
    const MatrixXd pi = policy.distribution();
    const MatrixXd P = policy_transition(cmdp, pi);
    std::vector<VectorXd> out;
    out.reserve(t_max + 1);
    out.push_back(policy_average(td_table(cmdp, phi, signal), pi));
    for (std::size_t t = 1; t <= t_max; ++t) out.push_back(P * out.back());
    return out;
}

std::size_t required_t_max(double rate, double scale, double tol) {
    if (!(rate >= 0.0 && rate < 1.0)) throw PreconditionError("series rate must lie in [0,1)");
    if (scale <= 0.0 || rate == 0.0) return 1;
    const double needed = std::log(tol * (1.0 - rate) / scale) / std::log(rate);
    auto t = static_cast<std::size_t>(std::max(1.0, std::ceil(needed)));
    while (std::pow(rate, static_cast<double>(t)) * scale / (1.0 - rate) >= tol) ++t;
    return t;
}

IdentityCheck prop4_identity_check(const Cmdp& cmdp, const SoftmaxPolicy& policy, const VectorXd& phi,
                                   double lambda, std::size_t t_max) {
    if (!(lambda >= 0.0 && lambda < 1.0)) throw PreconditionError("identity check needs lambda in [0,1)");
    const DpSolution sol = solve_policy(cmdp, policy, Signal::reward, lambda);
    const std::vector<VectorXd> deltas = expected_td_error_vectors(cmdp, policy, phi, t_max);
    const double rate = cmdp.gamma * lambda;

    IdentityCheck out;
    out.tail_bound = std::pow(rate, static_cast<double>(t_max)) * deltas.front().lpNorm<Eigen::Infinity>() / (1.0 - rate);
    if (!(out.tail_bound < 1e-10)) {
        throw PreconditionError("t_max too small, need t_max >= " +
                                std::to_string(required_t_max(rate, deltas.front().lpNorm<Eigen::Infinity>())));
    }
    double sum = 0.0;
    double weight = 1.0;
    for (const VectorXd& delta : deltas) {
        sum += weight * sol.d_lambda.dot(delta);
        weight *= rate;
    }
    out.lhs = cmdp.rho0.dot(sol.V);
    out.rhs = cmdp.rho0.dot(phi) + sum / (1.0 - sol.tilde_gamma);
    out.gap = std::abs(out.lhs - out.rhs);
    return out;
}

nlohmann::json to_json(const DpSolution& s) {
    return {{"signal", s.signal == Signal::reward ? "reward" : "cost"},
            {"lambda", s.lambda},
            {"tilde_gamma", s.tilde_gamma},
            {"P_pi", matrix_json(s.P_pi)},
            {"r_pi", vector_json(s.r_pi)},
            {"c_pi", vector_json(s.c_pi)},
            {"V", vector_json(s.V)},
            {"Q", matrix_json(s.Q)},
            {"A", matrix_json(s.A)},
            {"d_rho0", vector_json(s.d_rho0)},
            {"P_lambda", matrix_json(s.P_lambda)},
            {"d_lambda", vector_json(s.d_lambda)},
            {"r_lambda", vector_json(s.r_lambda)},
            {"A_gae", matrix_json(s.A_gae)}};
}

}  // namespace cuplab
