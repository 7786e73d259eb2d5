#include "cuplab/sampler.hpp"

#include "cuplab/rng.hpp"

#include <json.hpp>

#include <ostream>

namespace cuplab {

namespace {

using Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

}  // namespace

double TrajectoryBatch::mean_reward_return() const {
    if (episodes.empty()) return 0.0;
    double sum = 0.0;
    for (const Episode& e : episodes) sum += e.reward_return;
    return sum / static_cast<double>(episodes.size());
}

double TrajectoryBatch::mean_cost_return() const {
    if (episodes.empty()) return 0.0;
    double sum = 0.0;
    for (const Episode& e : episodes) sum += e.cost_return;
    return sum / static_cast<double>(episodes.size());
}

TrajectoryBatch sample_trajectories(const Cmdp& cmdp, const SoftmaxPolicy& policy, std::size_t horizon,
                                    std::size_t episodes, std::uint64_t seed) {
    if (horizon < 1 || episodes < 1) throw PreconditionError("horizon and episode count must be positive");
    if (policy.n_states() != cmdp.n_states || policy.n_actions() != cmdp.n_actions) {
        throw PreconditionError("policy shape does not match the cmdp");
    }
    const Eigen::MatrixXd pi = policy.distribution();
    const Eigen::RowVectorXd rho0 = cmdp.rho0.transpose();

    TrajectoryBatch batch;
    batch.horizon = horizon;
    batch.gamma = cmdp.gamma;
    batch.seed = seed;
    batch.episodes.resize(episodes);
    for (std::size_t i = 0; i < episodes; ++i) {
        Episode& ep = batch.episodes[i];
        ep.stream_seed = derive_seed(seed, i);
        Rng rng(ep.stream_seed);
        ep.states.reserve(horizon + 1);
        ep.actions.reserve(horizon);
        ep.rewards.reserve(horizon);
        ep.costs.reserve(horizon);

        std::size_t s = rng.categorical(rho0);
        ep.states.push_back(s);
        double discount = 1.0;
        for (std::size_t t = 0; t < horizon; ++t) {
            const std::size_t a = rng.categorical(pi.row(idx(s)));
            const std::size_t next = rng.categorical(cmdp.transition[a].row(idx(s)));
            const double r = cmdp.r(s, a, next);
            const double c = cmdp.c(s, a);
            ep.actions.push_back(a);
            ep.rewards.push_back(r);
            ep.costs.push_back(c);
            ep.states.push_back(next);
            ep.reward_return += discount * r;
            ep.cost_return += discount * c;
            discount *= cmdp.gamma;
            s = next;
        }
    }
    return batch;
}

GaeTables compute_gae(const TrajectoryBatch& batch, const Eigen::VectorXd& v_table,
                      const Eigen::VectorXd& v_cost_table, double gamma, double lambda) {
    if (v_table.size() != v_cost_table.size()) throw PreconditionError("critic tables differ in length");
    const Index m = idx(batch.size());
    const Index horizon = idx(batch.horizon);
    GaeTables out;
    out.td.resize(m, horizon);
    out.td_cost.resize(m, horizon);
    out.adv.resize(m, horizon);
    out.adv_cost.resize(m, horizon);
    out.v_target.resize(m, horizon);
    out.v_target_cost.resize(m, horizon);
    const double decay = gamma * lambda;

    for (Index i = 0; i < m; ++i) {
        const Episode& ep = batch.episodes[static_cast<std::size_t>(i)];
        for (std::size_t s : ep.states) {
            if (idx(s) >= v_table.size()) throw PreconditionError("critic table does not cover a visited state");
        }
        for (Index t = 0; t < horizon; ++t) {
            const std::size_t k = static_cast<std::size_t>(t);
            const Index s = idx(ep.states[k]);
            const Index next = idx(ep.states[k + 1]);
            out.td(i, t) = ep.rewards[k] + gamma * v_table(next) - v_table(s);
            out.td_cost(i, t) = ep.costs[k] + gamma * v_cost_table(next) - v_cost_table(s);
        }
        double acc = 0.0;
        double acc_cost = 0.0;
        for (Index t = horizon - 1; t >= 0; --t) {
            acc = out.td(i, t) + decay * acc;
            acc_cost = out.td_cost(i, t) + decay * acc_cost;
            out.adv(i, t) = acc;
            out.adv_cost(i, t) = acc_cost;
            const Index s = idx(ep.states[static_cast<std::size_t>(t)]);
            out.v_target(i, t) = acc + v_table(s);
            out.v_target_cost(i, t) = acc_cost + v_cost_table(s);
        }
    }
    return out;
}

Eigen::MatrixXd direct_gae(const Eigen::MatrixXd& td, double gamma, double lambda) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(td.rows(), td.cols());
    const double decay = gamma * lambda;
    for (Index i = 0; i < td.rows(); ++i) {
        for (Index t = 0; t < td.cols(); ++t) {
            double weight = 1.0;
            for (Index j = t; j < td.cols(); ++j) {
                out(i, t) += weight * td(i, j);
                weight *= decay;
            }
        }
    }
    return out;
}

void write_batch_jsonl(std::ostream& out, const TrajectoryBatch& batch) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Episode& ep = batch.episodes[i];
        const nlohmann::json line = {{"episode", i},
                                     {"stream_seed", ep.stream_seed},
                                     {"states", ep.states},
                                     {"actions", ep.actions},
                                     {"rewards", ep.rewards},
                                     {"costs", ep.costs},
                                     {"reward_return", ep.reward_return},
                                     {"cost_return", ep.cost_return}};
        out << line.dump() << '\n';
    }
}

}  // namespace cuplab
