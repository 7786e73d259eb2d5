#include "cuplab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cuplab {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Resolves a requested horizon against the certified tail criterion.
std::size_t certified_t_max(double rate, double scale, std::size_t requested) {
    const std::size_t needed = required_t_max(rate, scale);
    if (requested == 0) return needed;
    if (requested < needed) {
        throw PreconditionError("truncation tail above 1e-10, need t_max >= " + std::to_string(needed));
    }
    return requested;
}

double tail_of(double rate, double scale, std::size_t t_max) {
    if (rate == 0.0) return 0.0;
    return std::pow(rate, static_cast<double>(t_max)) * scale / (1.0 - rate);
}

double size_factor(const Cmdp& cmdp, double lambda) {
    return std::abs(1.0 - 2.0 * cmdp.gamma * lambda * static_cast<double>(cmdp.n_states * cmdp.n_actions));
}

double checked_size_factor(const Cmdp& cmdp, double lambda) {
    const double denom = size_factor(cmdp, lambda);
    if (denom < 1e-12) throw PreconditionError("degenerate denominator");
    return denom;
}

/// Reference-side quantities shared by the surrogate bounds of one signal.
struct SignalSide {
    double surrogate = 0.0;  ///< E_{d_lambda_old, pi_new}[A_gae_old]
    double epsilon = 0.0;
};

SignalSide signal_side(const Cmdp& cmdp, const MatrixXd& pi_new, const DpSolution& old_sol, std::size_t t_max) {
    SignalSide out;
    out.surrogate = old_sol.d_lambda.dot(policy_average(old_sol.A_gae, pi_new));
    out.epsilon = epsilon_sup(cmdp, pi_new, old_sol.V, old_sol.signal, t_max);
    return out;
}

std::size_t default_horizon(const Cmdp& cmdp, double lambda, std::size_t requested) {
    // Expected |TD| is bounded by the signal range plus twice the value range; 1e3 covers desk-scale inputs.
    return certified_t_max(cmdp.gamma * lambda, 1e3, requested);
}

SandwichResult sandwich(const Cmdp& cmdp, const SoftmaxPolicy& pi_new, const SoftmaxPolicy& pi_old,
                        const VectorXd& phi, double lambda, std::size_t t_max, HolderPair norms, bool on_path) {
    const MatrixXd p_new = pi_new.distribution();
    const MatrixXd p_old = pi_old.distribution();
    const DpSolution new_sol = solve_policy(cmdp, p_new, Signal::reward, lambda);
    const DpSolution old_sol = solve_policy(cmdp, p_old, Signal::reward, lambda);
    const MatrixXd delta = td_table(cmdp, phi, Signal::reward);
    const VectorXd delta_new = policy_average(delta, p_new);
    const VectorXd gap0 = policy_average(delta, p_new - p_old);
    const VectorXd d_gap = new_sol.d_lambda - old_sol.d_lambda;

    const bool l1 = norms == HolderPair::l1_linf;
    const double d_norm = l1 ? d_gap.lpNorm<1>() : d_gap.norm();
    const double spread = l1 ? 1.0 : std::sqrt(static_cast<double>(cmdp.n_states));
    const double centre0 = on_path ? delta_new.lpNorm<Eigen::Infinity>() : gap0.lpNorm<Eigen::Infinity>();
    const double scale = centre0 + d_norm * spread * delta_new.lpNorm<Eigen::Infinity>();
    const double rate = cmdp.gamma * lambda;

    SandwichResult out;
    out.t_max = certified_t_max(rate, scale, t_max);
    out.tail_bound = tail_of(rate, scale, out.t_max);
    out.j_diff = cmdp.rho0.dot(new_sol.V) - cmdp.rho0.dot(old_sol.V);

    VectorXd td = delta_new;
    VectorXd centre = on_path ? delta_new : gap0;
    const MatrixXd& centre_kernel = on_path ? new_sol.P_pi : old_sol.P_pi;
    double lower = 0.0;
    double upper = 0.0;
    double weight = 1.0;
    for (std::size_t t = 0; t <= out.t_max; ++t) {
        const double eps = d_norm * (l1 ? td.lpNorm<Eigen::Infinity>() : td.norm());
        out.eps.push_back(eps);
        const double mid = old_sol.d_lambda.dot(centre);
        lower += weight * (mid - eps);
        upper += weight * (mid + eps);
        weight *= rate;
        if (weight == 0.0) break;
        td = new_sol.P_pi * td;
        centre = centre_kernel * centre;
    }
    out.l_minus = lower / (1.0 - old_sol.tilde_gamma);
    out.l_plus = upper / (1.0 - old_sol.tilde_gamma);
    out.pass = out.l_minus - bound_tolerance <= out.j_diff && out.j_diff <= out.l_plus + bound_tolerance;
    out.margin = std::min(out.j_diff - out.l_minus, out.l_plus - out.j_diff);
    return out;
}

}  // namespace

DivergenceProfile divergence_profile(const MatrixXd& pi_new, const MatrixXd& pi_old, const VectorXd& weights) {
    if (pi_new.rows() != pi_old.rows() || pi_new.cols() != pi_old.cols() || weights.size() != pi_new.rows()) {
        throw PreconditionError("divergence profile inputs have mismatched shapes");
    }
    DivergenceProfile out;
    const MatrixXd diff = (pi_new - pi_old).cwiseAbs();
    out.tv = 0.5 * diff.rowwise().sum();
    out.kl.resize(pi_new.rows());
    for (Eigen::Index s = 0; s < pi_new.rows(); ++s) out.kl(s) = kl_divergence(pi_old.row(s), pi_new.row(s));
    out.expected_tv = weights.dot(out.tv);
    out.expected_kl = weights.dot(out.kl);
    out.pi_gap_11 = diff.sum();
    return out;
}

DivergenceProfile divergence_profile(const SoftmaxPolicy& pi_new, const SoftmaxPolicy& pi_old,
                                     const VectorXd& d_lambda_old) {
    return divergence_profile(pi_new.distribution(), pi_old.distribution(), d_lambda_old);
}

std::vector<Eigen::VectorXd> delta_gap_vectors(const Cmdp& cmdp, const SoftmaxPolicy& pi_new,
                                               const SoftmaxPolicy& pi_old, const VectorXd& phi, std::size_t t_max) {
    const MatrixXd p_new = pi_new.distribution();
    const MatrixXd p_old = pi_old.distribution();
    const MatrixXd P_old = policy_transition(cmdp, p_old);
    std::vector<VectorXd> out;
    out.reserve(t_max + 1);
    out.push_back(policy_average(td_table(cmdp, phi, Signal::reward), p_new - p_old));
    for (std::size_t t = 1; t <= t_max; ++t) out.push_back(P_old * out.back());
    return out;
}

SandwichResult theorem1_bounds(const Cmdp& cmdp, const SoftmaxPolicy& pi_new, const SoftmaxPolicy& pi_old,
                               const VectorXd& phi, double lambda, std::size_t t_max, HolderPair norms) {
    return sandwich(cmdp, pi_new, pi_old, phi, lambda, t_max, norms, false);
}

SandwichResult on_path_sandwich(const Cmdp& cmdp, const SoftmaxPolicy& pi_new, const SoftmaxPolicy& pi_old,
                                const VectorXd& phi, double lambda, std::size_t t_max) {
    return sandwich(cmdp, pi_new, pi_old, phi, lambda, t_max, HolderPair::l1_linf, true);
}

double epsilon_sup(const Cmdp& cmdp, const MatrixXd& pi_new, const VectorXd& phi, Signal signal, std::size_t t_max) {
    const MatrixXd P = policy_transition(cmdp, pi_new);
    VectorXd magnitude = policy_average(abs_td_table(cmdp, phi, signal), pi_new);
    double best = magnitude.maxCoeff();
    for (std::size_t t = 1; t <= t_max; ++t) {
        magnitude = P * magnitude;
        best = std::max(best, magnitude.maxCoeff());
    }
    return best;
}

double tv_penalty_coefficient(const Cmdp& cmdp, double lambda) {
    const double g = cmdp.gamma;
    return 2.0 * g * (1.0 - lambda) / ((1.0 - g * lambda) * checked_size_factor(cmdp, lambda));
}

double prop1_lower_bound(const Cmdp& cmdp, const SoftmaxPolicy& pi_new, const SoftmaxPolicy& pi_old, double lambda,
                         std::size_t t_max) {
    const double coef = tv_penalty_coefficient(cmdp, lambda);
    const std::size_t horizon = default_horizon(cmdp, lambda, t_max);
    const MatrixXd p_new = pi_new.distribution();
    const DpSolution old_sol = solve_policy(cmdp, pi_old, Signal::reward, lambda);
    const SignalSide side = signal_side(cmdp, p_new, old_sol, horizon);
    const DivergenceProfile div = divergence_profile(p_new, pi_old.distribution(), old_sol.d_lambda);
    return (side.surrogate - coef * side.epsilon * div.expected_tv) / (1.0 - old_sol.tilde_gamma);
}

double prop2_cost_upper_bound(const Cmdp& cmdp, const SoftmaxPolicy& pi_new, const SoftmaxPolicy& pi_old,
                              double lambda, std::size_t t_max) {
    const double coef = tv_penalty_coefficient(cmdp, lambda);
    const std::size_t horizon = default_horizon(cmdp, lambda, t_max);
    const MatrixXd p_new = pi_new.distribution();
    const DpSolution old_sol = solve_policy(cmdp, pi_old, Signal::cost, lambda);
    const SignalSide side = signal_side(cmdp, p_new, old_sol, horizon);
    const DivergenceProfile div = divergence_profile(p_new, pi_old.distribution(), old_sol.d_lambda);
    return (side.surrogate + coef * side.epsilon * div.expected_tv) / (1.0 - old_sol.tilde_gamma);
}

KlBounds kl_substituted_bounds(const Cmdp& cmdp, const SoftmaxPolicy& pi_new, const SoftmaxPolicy& pi_old,
                               double lambda, std::size_t t_max) {
    const double coef = tv_penalty_coefficient(cmdp, lambda);
    const std::size_t horizon = default_horizon(cmdp, lambda, t_max);
    const MatrixXd p_new = pi_new.distribution();
    const DpSolution reward_sol = solve_policy(cmdp, pi_old, Signal::reward, lambda);
    const DpSolution cost_sol = solve_policy(cmdp, pi_old, Signal::cost, lambda);
    const SignalSide reward = signal_side(cmdp, p_new, reward_sol, horizon);
    const SignalSide cost = signal_side(cmdp, p_new, cost_sol, horizon);
    const DivergenceProfile div = divergence_profile(p_new, pi_old.distribution(), reward_sol.d_lambda);
    const double kl_term = std::sqrt(div.expected_kl / 2.0);
    const double norm = 1.0 - reward_sol.tilde_gamma;
    return KlBounds{(reward.surrogate - coef * reward.epsilon * kl_term) / norm,
                    (cost.surrogate + coef * cost.epsilon * kl_term) / norm};
}

CpoComparison cpo_comparison(const Cmdp& cmdp, const SoftmaxPolicy& pi_new, const SoftmaxPolicy& pi_old,
                             std::size_t t_max) {
    const double g = cmdp.gamma;
    const std::size_t horizon = default_horizon(cmdp, 0.0, t_max);
    const MatrixXd p_new = pi_new.distribution();
    const DpSolution old_sol = solve_policy(cmdp, pi_old, Signal::reward, 0.0);
    const SignalSide side = signal_side(cmdp, p_new, old_sol, horizon);

    CpoComparison out;
    out.bound_general = prop1_lower_bound(cmdp, pi_new, pi_old, 0.0, horizon);
    out.penalty_general = side.surrogate / (1.0 - old_sol.tilde_gamma) - out.bound_general;

    const DivergenceProfile div = divergence_profile(p_new, pi_old.distribution(), old_sol.d_rho0);
    const double advantage = old_sol.d_rho0.dot(policy_average(old_sol.A, p_new)) / (1.0 - g);
    out.penalty_direct = 2.0 * g * side.epsilon * div.expected_tv / (1.0 - g);
    out.penalty_cpo = 2.0 * g * side.epsilon / (1.0 - g) * div.expected_tv / (1.0 - g);
    out.bound_cpo = advantage - out.penalty_cpo;
    const double scale = std::max(std::abs(out.penalty_general), 1e-300);
    out.relative_gap = std::abs(out.penalty_general - (1.0 - g) * out.penalty_cpo) / scale;
    return out;
}

VisitationGap lemma1_visitation_gap(const Cmdp& cmdp, const SoftmaxPolicy& pi_new, const SoftmaxPolicy& pi_old,
                                    double lambda) {
    const MatrixXd p_new = pi_new.distribution();
    const MatrixXd p_old = pi_old.distribution();
    const DpSolution new_sol = solve_policy(cmdp, p_new, Signal::reward, lambda);
    const DpSolution old_sol = solve_policy(cmdp, p_old, Signal::reward, lambda);
    const DivergenceProfile div = divergence_profile(p_new, p_old, new_sol.d_lambda);
    const double gl = cmdp.gamma * lambda;

    VisitationGap out;
    out.lhs = (old_sol.d_lambda - new_sol.d_lambda).lpNorm<1>();
    out.rhs = (1.0 / (1.0 - new_sol.tilde_gamma)) * ((1.0 - gl) / size_factor(cmdp, lambda)) * 2.0 * div.expected_tv;
    out.denom_flag = 1.0 - gl * div.pi_gap_11 <= 0.0;
    return out;
}

std::pair<double, double> remark2_update_bounds(double gamma, double alpha_k, double beta_k, double chi_k,
                                                double epsilon_v, double epsilon_c, double cost_limit) {
    const double root = std::sqrt(2.0 * chi_k);
    return {-gamma * alpha_k * root * epsilon_v / (1.0 - gamma),
            cost_limit + gamma * beta_k * root * epsilon_c / (1.0 - gamma)};
}

UpdateBounds theorem2_update_bounds(const Cmdp& cmdp, const SoftmaxPolicy& pi_k, const SoftmaxPolicy& pi_k_half,
                                    const SoftmaxPolicy& pi_k1, double alpha_k, double beta_k, double lambda,
                                    std::size_t t_max) {
    const double g = cmdp.gamma;
    const double denom = checked_size_factor(cmdp, lambda);
    const std::size_t horizon = default_horizon(cmdp, lambda, t_max);
    const MatrixXd p_k = pi_k.distribution();
    const MatrixXd p_k1 = pi_k1.distribution();
    const DpSolution reward_k = solve_policy(cmdp, p_k, Signal::reward, lambda);
    const VectorXd cost_values_k = state_values(cmdp, p_k, Signal::cost);

    UpdateBounds out;
    out.chi_k = divergence_profile(pi_k_half.distribution(), p_k, reward_k.d_lambda).expected_kl;
    out.epsilon_v = epsilon_sup(cmdp, p_k1, reward_k.V, Signal::reward, horizon);
    out.epsilon_c = epsilon_sup(cmdp, p_k1, cost_values_k, Signal::cost, horizon);
    const double root = std::sqrt(2.0 * out.chi_k);
    out.improvement_floor = -g * (1.0 - lambda) * alpha_k * root * out.epsilon_v / ((1.0 - g) * denom);
    out.cost_ceiling = cmdp.cost_limit + g * (1.0 - lambda) * beta_k * root * out.epsilon_c / ((1.0 - g) * denom);
    out.j_delta = objective_j(cmdp, p_k1, Signal::reward) - cmdp.rho0.dot(reward_k.V);
    out.j_cost_new = objective_j(cmdp, p_k1, Signal::cost);
    out.pass_improvement = out.j_delta >= out.improvement_floor - bound_tolerance;
    out.pass_cost = out.j_cost_new <= out.cost_ceiling + bound_tolerance;
    out.denom_flag = 1.0 - g * lambda * divergence_profile(p_k1, p_k, reward_k.d_lambda).pi_gap_11 <= 0.0;
    return out;
}

BoundReport evaluate_pair(const Cmdp& cmdp, const SoftmaxPolicy& pi_new, const SoftmaxPolicy& pi_old, double lambda) {
    const MatrixXd p_new = pi_new.distribution();
    const MatrixXd p_old = pi_old.distribution();
    const double coef = tv_penalty_coefficient(cmdp, lambda);
    const DpSolution old_r = solve_policy(cmdp, p_old, Signal::reward, lambda);
    const DpSolution old_c = solve_policy(cmdp, p_old, Signal::cost, lambda);
    const VectorXd new_r = state_values(cmdp, p_new, Signal::reward);
    const VectorXd new_c = state_values(cmdp, p_new, Signal::cost);

    BoundReport out;
    const SandwichResult sandwich_result = theorem1_bounds(cmdp, pi_new, pi_old, old_r.V, lambda);
    const std::size_t horizon = sandwich_result.t_max;
    out.j_diff = sandwich_result.j_diff;
    out.l_minus = sandwich_result.l_minus;
    out.l_plus = sandwich_result.l_plus;
    out.tail_bound = sandwich_result.tail_bound;
    out.pass_theorem1 = sandwich_result.pass;
    out.margin_theorem1 = sandwich_result.margin;
    out.j_cost_diff = cmdp.rho0.dot(new_c) - cmdp.rho0.dot(old_c.V);

    const SignalSide reward = signal_side(cmdp, p_new, old_r, horizon);
    const SignalSide cost = signal_side(cmdp, p_new, old_c, horizon);
    const DivergenceProfile div = divergence_profile(p_new, p_old, old_r.d_lambda);
    const double norm = 1.0 - old_r.tilde_gamma;
    const double kl_term = std::sqrt(div.expected_kl / 2.0);
    out.epsilon_v = reward.epsilon;
    out.epsilon_c = cost.epsilon;
    out.chi = div.expected_kl;
    out.prop1_lower = (reward.surrogate - coef * reward.epsilon * div.expected_tv) / norm;
    out.prop2_cost_upper = (cost.surrogate + coef * cost.epsilon * div.expected_tv) / norm;
    out.kl_prop1_lower = (reward.surrogate - coef * reward.epsilon * kl_term) / norm;
    out.kl_prop2_upper = (cost.surrogate + coef * cost.epsilon * kl_term) / norm;
    out.margin_prop1 = out.j_diff - out.prop1_lower;
    out.margin_prop2 = out.prop2_cost_upper - out.j_cost_diff;
    out.pass_prop1 = out.margin_prop1 >= -bound_tolerance;
    out.pass_prop2 = out.margin_prop2 >= -bound_tolerance;
    out.pass_kl_order = out.kl_prop1_lower <= out.prop1_lower + bound_tolerance &&
                        out.kl_prop2_upper >= out.prop2_cost_upper - bound_tolerance;

    // Classic identity uses the lambda = 0 visitation of the new policy.
    const DpSolution new_plain = solve_policy(cmdp, p_new, Signal::reward, 0.0);
    const double classic = new_plain.d_rho0.dot(policy_average(old_r.A, p_new)) / (1.0 - cmdp.gamma);
    out.classic_gap = std::abs(out.j_diff - classic);
    const double rate = cmdp.gamma * lambda;
    const double td_scale = policy_average(td_table(cmdp, old_r.V, Signal::reward), p_new).lpNorm<Eigen::Infinity>();
    out.identity_gap = prop4_identity_check(cmdp, pi_new, old_r.V, lambda, required_t_max(rate, td_scale)).gap;

    out.lemma1 = lemma1_visitation_gap(cmdp, pi_new, pi_old, lambda);
    out.denom_flag = out.lemma1.denom_flag;
    out.pass_on_path = on_path_sandwich(cmdp, pi_new, pi_old, old_r.V, lambda).pass;
    return out;
}

}  // namespace cuplab
