#include "cuplab/trainer.hpp"

#include "cuplab/csv.hpp"
#include "cuplab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace cuplab {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

constexpr double kl_smoothing = 1e-12;
constexpr double nan = std::numeric_limits<double>::quiet_NaN();

Index idx(std::size_t i) { return static_cast<Index>(i); }

/// Per-sample accumulation shared by all surrogates.
struct Pieces {
    double ratio_mean = 0.0;  ///< mean ratio * weight
    double kl_mean = 0.0;     ///< mean KL(target, pi_theta)
    MatrixXd ratio_grad;
    MatrixXd kl_grad;
};

template <typename Weight>
Pieces accumulate(const MatrixXd& logits, const MatrixXd& target, const std::vector<Sample>& samples,
                  Weight weight_of) {
    Pieces out;
    out.ratio_grad = MatrixXd::Zero(logits.rows(), logits.cols());
    out.kl_grad = MatrixXd::Zero(logits.rows(), logits.cols());
    if (samples.empty()) return out;
    const MatrixXd pi = SoftmaxPolicy(logits).distribution();
    const double inv_n = 1.0 / static_cast<double>(samples.size());
    for (const Sample& x : samples) {
        const Index s = idx(x.state);
        const Index a = idx(x.action);
        const double ratio = pi(s, a) / x.behaviour_prob;
        const double w = weight_of(x);
        out.ratio_mean += inv_n * ratio * w;
        // d pi(a|s) / d theta[s,.] = pi(a|s) (e_a - pi(.|s))
        out.ratio_grad.row(s) -= (inv_n * ratio * w) * pi.row(s);
        out.ratio_grad(s, a) += inv_n * ratio * w;
        out.kl_mean += inv_n * kl_divergence(target.row(s), pi.row(s));
        out.kl_grad.row(s) += inv_n * (pi.row(s) - target.row(s));
    }
    return out;
}

Surrogate penalized(const Pieces& p, double alpha) {
    const double root = std::sqrt(p.kl_mean + kl_smoothing);
    return Surrogate{p.ratio_mean - alpha * root, p.ratio_grad - (alpha / (2.0 * root)) * p.kl_grad};
}

bool finite(const Surrogate& s) { return std::isfinite(s.value) && s.grad.allFinite(); }

/// Fixed-order minibatch gradient steps; direction +1 ascends, -1 descends.
template <typename Objective>
std::optional<MatrixXd> run_sgd(MatrixXd logits, const std::vector<Sample>& samples, const CupConfig& config,
                                std::uint64_t shuffle_seed, double direction, Objective objective) {
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(shuffle_seed);
    std::vector<Sample> mini;
    mini.reserve(config.minibatch);
    for (std::size_t epoch = 0; epoch < config.optimization_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        for (std::size_t start = 0; start < order.size(); start += config.minibatch) {
            mini.clear();
            const std::size_t stop = std::min(order.size(), start + config.minibatch);
            for (std::size_t j = start; j < stop; ++j) mini.push_back(samples[order[j]]);
            const Surrogate step = objective(logits, mini);
            if (!finite(step)) return std::nullopt;
            logits += (direction * config.policy_lr) * step.grad;
        }
    }
    return logits;
}

void check_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw PreconditionError(std::string(name) + " must be positive");
}

}  // namespace

void validate_config(const CupConfig& c, const Cmdp& cmdp) {
    if (c.gamma != cmdp.gamma) throw PreconditionError("gamma differs from the environment's discount");
    if (c.cost_limit != cmdp.cost_limit) throw PreconditionError("cost_limit differs from the environment's limit");
    if (!(c.lambda_gae >= 0.0 && c.lambda_gae <= 1.0)) throw PreconditionError("lambda_gae must lie in [0,1]");
    if (c.horizon_T < 1) throw PreconditionError("horizon_T must be positive");
    if (c.episodes_M < 1) throw PreconditionError("episodes_M must be positive");
    if (c.minibatch < 1) throw PreconditionError("minibatch must be positive");
    if (!(c.alpha >= 0.0) || !(c.beta >= 0.0)) throw PreconditionError("alpha and beta must be non-negative");
    check_positive(c.nu_lr, "nu_lr");
    check_positive(c.policy_lr, "policy_lr");
    if (!(c.nu_max >= 0.0) || !(c.nu_init >= 0.0 && c.nu_init <= c.nu_max)) {
        throw PreconditionError("nu_init must lie in [0, nu_max]");
    }
    if (c.initial_logits && (c.initial_logits->rows() != idx(cmdp.n_states) ||
                             c.initial_logits->cols() != idx(cmdp.n_actions) || !c.initial_logits->allFinite())) {
        throw PreconditionError("initial_logits must be a finite |S| x |A| table");
    }
}

std::vector<Sample> flatten_batch(const TrajectoryBatch& batch, const GaeTables& gae, const SoftmaxPolicy& behaviour) {
    const MatrixXd pi = behaviour.distribution();
    std::vector<Sample> out;
    out.reserve(batch.size() * batch.horizon);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Episode& ep = batch.episodes[i];
        for (std::size_t t = 0; t < batch.horizon; ++t) {
            const std::size_t s = ep.states[t];
            const std::size_t a = ep.actions[t];
            out.push_back(Sample{s, a, pi(idx(s), idx(a)), gae.adv(idx(i), idx(t)), gae.adv_cost(idx(i), idx(t))});
        }
    }
    return out;
}

double empirical_kl(const SoftmaxPolicy& pi_a, const SoftmaxPolicy& pi_b, const TrajectoryBatch& batch) {
    const MatrixXd a = pi_a.distribution();
    const MatrixXd b = pi_b.distribution();
    Eigen::VectorXd per_state(a.rows());
    for (Index s = 0; s < a.rows(); ++s) per_state(s) = kl_divergence(a.row(s), b.row(s));
    double sum = 0.0;
    std::size_t count = 0;
    for (const Episode& ep : batch.episodes) {
        for (std::size_t t = 0; t < batch.horizon; ++t) sum += per_state(idx(ep.states[t]));
        count += batch.horizon;
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

Surrogate improvement_objective(const MatrixXd& logits, const MatrixXd& pi_ref, const std::vector<Sample>& samples,
                                double alpha) {
    return penalized(accumulate(logits, pi_ref, samples, [](const Sample& x) { return x.adv; }), alpha);
}

Surrogate lagrangian_objective(const MatrixXd& logits, const MatrixXd& pi_ref, const std::vector<Sample>& samples,
                               double alpha, double nu) {
    return penalized(accumulate(logits, pi_ref, samples, [nu](const Sample& x) { return x.adv - nu * x.adv_cost; }),
                     alpha);
}

Surrogate projection_objective(const MatrixXd& logits, const MatrixXd& pi_target, const std::vector<Sample>& samples,
                               double cost_weight) {
    const Pieces p = accumulate(logits, pi_target, samples, [](const Sample& x) { return x.adv_cost; });
    return Surrogate{p.kl_mean + cost_weight * p.ratio_mean, p.kl_grad + cost_weight * p.ratio_grad};
}

StepResult improvement_step(const SoftmaxPolicy& pi_k, const TrajectoryBatch& batch, const GaeTables& gae,
                            const CupConfig& config, std::uint64_t stream) {
    const std::vector<Sample> samples = flatten_batch(batch, gae, pi_k);
    const MatrixXd ref = pi_k.distribution();
    auto objective = [&](const MatrixXd& logits, const std::vector<Sample>& mini) {
        return improvement_objective(logits, ref, mini, config.alpha);
    };
    const std::optional<MatrixXd> logits = run_sgd(pi_k.logits(), samples, config, stream, 1.0, objective);
    if (!logits) return StepResult{pi_k, true, "improvement step: non-finite surrogate, kept pi_k"};
    const double before = objective(pi_k.logits(), samples).value;
    const Surrogate after = objective(*logits, samples);
    if (!std::isfinite(after.value) || !logits->allFinite()) {
        return StepResult{pi_k, true, "improvement step: non-finite surrogate, kept pi_k"};
    }
    if (after.value < before - 1e-12) return StepResult{pi_k, true, "improvement step: surrogate decreased, kept pi_k"};
    return StepResult{SoftmaxPolicy(*logits), false, {}};
}

double nu_update(double nu_k, double jc_hat, const CupConfig& config) {
    return std::clamp(nu_k + config.nu_lr * (jc_hat - config.cost_limit), 0.0, config.nu_max);
}

ProjectionResult projection_step(const SoftmaxPolicy& pi_k, const SoftmaxPolicy& pi_k_half,
                                 const TrajectoryBatch& batch, const GaeTables& gae, double jc_hat, double nu_k,
                                 const CupConfig& config, std::uint64_t stream) {
    const double nu = nu_update(nu_k, jc_hat, config);
    const double cost_weight = nu * (1.0 - config.gamma * config.lambda_gae) / (1.0 - config.gamma);
    const std::vector<Sample> samples = flatten_batch(batch, gae, pi_k);
    const MatrixXd target = pi_k_half.distribution();
    auto objective = [&](const MatrixXd& logits, const std::vector<Sample>& mini) {
        return projection_objective(logits, target, mini, cost_weight);
    };
    const std::optional<MatrixXd> logits = run_sgd(pi_k_half.logits(), samples, config, stream, -1.0, objective);
    if (!logits || !logits->allFinite()) {
        return ProjectionResult{pi_k_half, nu, true, "projection step: non-finite loss, kept pi_k_half"};
    }
    return ProjectionResult{SoftmaxPolicy(*logits), nu, false, {}};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> fit_critics(const TrajectoryBatch& batch, const GaeTables& gae,
                                                        const Eigen::VectorXd& v_prev, const Eigen::VectorXd& vc_prev) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(v_prev.size());
    Eigen::VectorXd sum_cost = Eigen::VectorXd::Zero(v_prev.size());
    Eigen::VectorXd visits = Eigen::VectorXd::Zero(v_prev.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        for (std::size_t t = 0; t < batch.horizon; ++t) {
            const Index s = idx(batch.episodes[i].states[t]);
            sum(s) += gae.v_target(idx(i), idx(t));
            sum_cost(s) += gae.v_target_cost(idx(i), idx(t));
            visits(s) += 1.0;
        }
    }
    Eigen::VectorXd v = v_prev;
    Eigen::VectorXd vc = vc_prev;
    for (Index s = 0; s < v.size(); ++s) {
        if (visits(s) > 0.0) {
            v(s) = sum(s) / visits(s);
            vc(s) = sum_cost(s) / visits(s);
        }
    }
    return {v, vc};
}

namespace {

enum class Method { cup, lagrangian };

TrainLog train(const Cmdp& cmdp, const CupConfig& config, Method method) {
    validate_config(config, cmdp);
    SoftmaxPolicy policy = config.initial_logits ? SoftmaxPolicy(*config.initial_logits)
                                                 : SoftmaxPolicy::uniform(cmdp.n_states, cmdp.n_actions);
    const auto ns = idx(cmdp.n_states);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(ns);
    Eigen::VectorXd vc = Eigen::VectorXd::Zero(ns);
    double nu = config.nu_init;

    TrainLog log;
    log.exact = cmdp.n_states * cmdp.n_actions <= exact_logging_limit;
    log.j_initial = log.exact ? objective_j(cmdp, policy, Signal::reward) : nan;
    log.jc_initial = log.exact ? objective_j(cmdp, policy, Signal::cost) : nan;

    for (std::size_t k = 0; k < config.iterations; ++k) {
        const TrajectoryBatch batch =
            sample_trajectories(cmdp, policy, config.horizon_T, config.episodes_M, derive_seed(config.seed, 3 * k));
        const GaeTables stale = compute_gae(batch, v, vc, config.gamma, config.lambda_gae);
        std::tie(v, vc) = fit_critics(batch, stale, v, vc);
        const GaeTables gae = compute_gae(batch, v, vc, config.gamma, config.lambda_gae);
        const double jc_hat = batch.mean_cost_return();

        TrainRow row;
        row.iteration = k;
        row.j_hat = batch.mean_reward_return();
        row.jc_hat = jc_hat;

        SoftmaxPolicy half = policy;
        SoftmaxPolicy next = policy;
        if (method == Method::cup) {
            StepResult improved = improvement_step(policy, batch, gae, config, derive_seed(config.seed, 3 * k + 1));
            ProjectionResult projected =
                projection_step(policy, improved.policy, batch, gae, jc_hat, nu, config, derive_seed(config.seed, 3 * k + 2));
            row.fallback = improved.fallback || projected.fallback;
            for (const std::string* w : {&improved.warning, &projected.warning}) {
                if (!w->empty()) log.warnings.push_back("iteration " + std::to_string(k) + ": " + *w);
            }
            half = std::move(improved.policy);
            next = std::move(projected.policy);
            nu = projected.nu;
        } else {
            nu = nu_update(nu, jc_hat, config);
            const std::vector<Sample> samples = flatten_batch(batch, gae, policy);
            const MatrixXd ref = policy.distribution();
            auto objective = [&](const MatrixXd& logits, const std::vector<Sample>& mini) {
                return lagrangian_objective(logits, ref, mini, config.alpha, nu);
            };
            const std::optional<MatrixXd> logits =
                run_sgd(policy.logits(), samples, config, derive_seed(config.seed, 3 * k + 1), 1.0, objective);
            if (logits && logits->allFinite()) {
                next = SoftmaxPolicy(*logits);
            } else {
                row.fallback = true;
                log.warnings.push_back("iteration " + std::to_string(k) + ": lagrangian step non-finite, kept pi_k");
            }
            half = next;
        }
        row.nu = nu;
        row.empirical_kl_step1 = empirical_kl(policy, half, batch);
        row.empirical_kl_step2 = method == Method::cup ? empirical_kl(half, next, batch) : 0.0;

        if (log.exact) {
            const UpdateBounds ub =
                theorem2_update_bounds(cmdp, policy, half, next, config.alpha, config.beta, config.lambda_gae);
            row.j_exact = objective_j(cmdp, next, Signal::reward);
            row.jc_exact = ub.j_cost_new;
            row.chi_k = ub.chi_k;
            row.theorem2_improvement = ub.pass_improvement;
            row.theorem2_cost = ub.pass_cost;
            row.denom_flag = ub.denom_flag;
            row.improvement_floor = ub.improvement_floor;
            row.cost_ceiling = ub.cost_ceiling;
        } else {
            row.j_exact = row.jc_exact = row.chi_k = row.improvement_floor = row.cost_ceiling = nan;
        }
        log.rows.push_back(row);
        policy = std::move(next);
    }
    log.final_policy = policy;
    return log;
}

}  // namespace

TrainLog train_cup(const Cmdp& cmdp, const CupConfig& config) { return train(cmdp, config, Method::cup); }

TrainLog train_lagrangian_baseline(const Cmdp& cmdp, const CupConfig& config) {
    return train(cmdp, config, Method::lagrangian);
}

void write_train_csv(std::ostream& out, const TrainLog& log) {
    out << "iteration,J_hat,Jc_hat,J_exact,Jc_exact,nu,empirical_kl_step1,empirical_kl_step2,chi_k,"
           "theorem2_improvement,theorem2_cost,denom_flag,fallback,improvement_floor,cost_ceiling\n";
    using csv::flag;
    using csv::real;
    for (const TrainRow& r : log.rows) {
        out << csv::join({std::to_string(r.iteration), real(r.j_hat), real(r.jc_hat), real(r.j_exact),
                          real(r.jc_exact), real(r.nu), real(r.empirical_kl_step1), real(r.empirical_kl_step2),
                          real(r.chi_k), flag(r.theorem2_improvement), flag(r.theorem2_cost), flag(r.denom_flag),
                          flag(r.fallback), real(r.improvement_floor), real(r.cost_ceiling)})
            << '\n';
    }
}

}  // namespace cuplab
