#pragma once

#include "cuplab/exact_dp.hpp"

#include <limits>
#include <vector>

namespace cuplab {

// Naming: `pi_new` is the candidate policy, `pi_old` the reference policy whose
// data and value functions the bounds are built from.

inline constexpr double bound_tolerance = 1e-8;

struct DivergenceProfile {
    Eigen::VectorXd tv;  ///< tv[s] = half L1 distance between the action rows
    Eigen::VectorXd kl;  ///< kl[s] = KL(pi_old(.|s) || pi_new(.|s))
    double expected_tv = 0.0;
    double expected_kl = 0.0;
    double pi_gap_11 = 0.0;  ///< sum over (s,a) of |pi_new - pi_old|
};

DivergenceProfile divergence_profile(const Eigen::MatrixXd& pi_new, const Eigen::MatrixXd& pi_old,
                                     const Eigen::VectorXd& weights);
DivergenceProfile divergence_profile(const SoftmaxPolicy& pi_new, const SoftmaxPolicy& pi_old,
                                     const Eigen::VectorXd& d_lambda_old);

/// Exact importance-weighted TD gaps, propagated along the reference policy's kernel, t = 0..t_max.
std::vector<Eigen::VectorXd> delta_gap_vectors(const Cmdp& cmdp, const SoftmaxPolicy& pi_new,
                                               const SoftmaxPolicy& pi_old, const Eigen::VectorXd& phi,
                                               std::size_t t_max);

/// Hoelder pair used for the visitation-gap error term.
enum class HolderPair { l1_linf, l2_l2 };

struct SandwichResult {
    double j_diff = 0.0;
    double l_minus = 0.0;
    double l_plus = 0.0;
    std::vector<double> eps;  ///< error term per t
    double tail_bound = 0.0;
    std::size_t t_max = 0;
    bool pass = false;
    double margin = 0.0;  ///< min(j_diff - l_minus, l_plus - j_diff)
};

/// Sandwich of J(pi_new) - J(pi_old). t_max = 0 picks the smallest certified horizon;
/// an explicit t_max whose tail exceeds 1e-10 raises PreconditionError naming the required value.
SandwichResult theorem1_bounds(const Cmdp& cmdp, const SoftmaxPolicy& pi_new, const SoftmaxPolicy& pi_old,
                               const Eigen::VectorXd& phi, double lambda, std::size_t t_max = 0,
                               HolderPair norms = HolderPair::l1_linf);

/// Same error terms around the on-path centre E_{d_lambda_old}[P_new^t delta_0]. Diagnostic only.
SandwichResult on_path_sandwich(const Cmdp& cmdp, const SoftmaxPolicy& pi_new, const SoftmaxPolicy& pi_old,
                                const Eigen::VectorXd& phi, double lambda, std::size_t t_max = 0);

/// sup over t <= t_max of max_s E|delta_t| under pi_new with the given phi.
double epsilon_sup(const Cmdp& cmdp, const Eigen::MatrixXd& pi_new, const Eigen::VectorXd& phi, Signal signal,
                   std::size_t t_max);

/// 2 gamma (1 - lambda) / ((1 - gamma lambda) |1 - 2 gamma lambda |S||A||). Throws on a degenerate denominator.
double tv_penalty_coefficient(const Cmdp& cmdp, double lambda);

double prop1_lower_bound(const Cmdp& cmdp, const SoftmaxPolicy& pi_new, const SoftmaxPolicy& pi_old, double lambda,
                         std::size_t t_max = 0);
double prop2_cost_upper_bound(const Cmdp& cmdp, const SoftmaxPolicy& pi_new, const SoftmaxPolicy& pi_old,
                              double lambda, std::size_t t_max = 0);

struct KlBounds {
    double prop1_kl = 0.0;
    double prop2_kl = 0.0;
};

KlBounds kl_substituted_bounds(const Cmdp& cmdp, const SoftmaxPolicy& pi_new, const SoftmaxPolicy& pi_old,
                               double lambda, std::size_t t_max = 0);

/// lambda = 0 penalty in two forms: the general bound's and the older 1/(1 - gamma) form.
struct CpoComparison {
    double penalty_general = 0.0;  ///< penalty of the general lower bound at lambda = 0
    double penalty_direct = 0.0;   ///< same penalty evaluated from d_rho0 directly
    double penalty_cpo = 0.0;      ///< penalty with coefficient 2 gamma eps / (1 - gamma)
    double bound_general = 0.0;
    double bound_cpo = 0.0;
    double relative_gap = 0.0;     ///< |penalty_general - (1 - gamma) penalty_cpo| / max(|.|, tiny)
};

CpoComparison cpo_comparison(const Cmdp& cmdp, const SoftmaxPolicy& pi_new, const SoftmaxPolicy& pi_old,
                             std::size_t t_max = 0);

struct VisitationGap {
    double lhs = 0.0;
    double rhs = 0.0;
    bool denom_flag = false;
};

VisitationGap lemma1_visitation_gap(const Cmdp& cmdp, const SoftmaxPolicy& pi_new, const SoftmaxPolicy& pi_old,
                                    double lambda);

struct UpdateBounds {
    double chi_k = 0.0;
    double epsilon_v = 0.0;
    double epsilon_c = 0.0;
    double improvement_floor = 0.0;
    double cost_ceiling = 0.0;
    double j_delta = 0.0;
    double j_cost_new = 0.0;
    bool pass_improvement = false;
    bool pass_cost = false;
    bool denom_flag = false;
};

UpdateBounds theorem2_update_bounds(const Cmdp& cmdp, const SoftmaxPolicy& pi_k, const SoftmaxPolicy& pi_k_half,
                                    const SoftmaxPolicy& pi_k1, double alpha_k, double beta_k, double lambda,
                                    std::size_t t_max = 0);

/// lambda -> 0 limit of the update bounds: (floor, ceiling).
std::pair<double, double> remark2_update_bounds(double gamma, double alpha_k, double beta_k, double chi_k,
                                                double epsilon_v, double epsilon_c, double cost_limit);

/// Everything the campaign records for one (pair, lambda).
struct BoundReport {
    double j_diff = 0.0;
    double j_cost_diff = 0.0;
    double l_minus = 0.0;
    double l_plus = 0.0;
    double prop1_lower = 0.0;
    double prop2_cost_upper = 0.0;
    double kl_prop1_lower = 0.0;
    double kl_prop2_upper = 0.0;
    double epsilon_v = 0.0;
    double epsilon_c = 0.0;
    double chi = 0.0;  ///< E_{d_lambda_old}[KL(pi_old, pi_new)]
    double tail_bound = 0.0;
    bool denom_flag = false;
    bool pass_theorem1 = false;
    bool pass_prop1 = false;
    bool pass_prop2 = false;
    bool pass_kl_order = false;
    double margin_theorem1 = 0.0;
    double margin_prop1 = 0.0;  ///< j_diff - prop1_lower
    double margin_prop2 = 0.0;  ///< prop2_cost_upper - j_cost_diff
    double classic_gap = 0.0;   ///< performance-difference identity residual
    double identity_gap = 0.0;  ///< TD-error objective identity residual, phi = V_old
    VisitationGap lemma1;
    bool pass_on_path = false;  ///< diagnostic on-path sandwich
};

BoundReport evaluate_pair(const Cmdp& cmdp, const SoftmaxPolicy& pi_new, const SoftmaxPolicy& pi_old, double lambda);

}  // namespace cuplab
