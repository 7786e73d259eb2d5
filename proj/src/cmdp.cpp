#include "cuplab/cmdp.hpp"

#include "cuplab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace cuplab {

namespace {

std::string format_number(double v) {
    std::ostringstream out;
    out.precision(12);
    out << v;
    return out.str();
}

void require_gamma(double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw PreconditionError("gamma must lie in (0,1), got " + format_number(gamma));
}

void require_limit(double b) {
    if (!(b >= 0.0) || !std::isfinite(b)) throw PreconditionError("cost limit must be finite and >= 0");
}

Cmdp empty_cmdp(std::size_t n_states, std::size_t n_actions, double gamma, double b) {
    Cmdp m;
    m.n_states = n_states;
    m.n_actions = n_actions;
    const auto ns = static_cast<Eigen::Index>(n_states);
    m.transition.assign(n_actions, Eigen::MatrixXd::Zero(ns, ns));
    m.reward.assign(n_actions, Eigen::MatrixXd::Zero(ns, ns));
    m.cost = Eigen::MatrixXd::Zero(ns, static_cast<Eigen::Index>(n_actions));
    m.rho0 = Eigen::VectorXd::Zero(ns);
    m.gamma = gamma;
    m.cost_limit = b;
    return m;
}

}  // namespace

Eigen::MatrixXd Cmdp::expected_reward() const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions));
    for (std::size_t a = 0; a < n_actions; ++a) {
        out.col(static_cast<Eigen::Index>(a)) = transition[a].cwiseProduct(reward[a]).rowwise().sum();
    }
    return out;
}

bool Cmdp::operator==(const Cmdp& other) const {
    return n_states == other.n_states && n_actions == other.n_actions && transition == other.transition &&
           reward == other.reward && cost == other.cost && rho0 == other.rho0 && gamma == other.gamma &&
           cost_limit == other.cost_limit;
}

ValidationReport validate_cmdp(const Cmdp& m) {
    ValidationReport report;
    auto& v = report.violations;
    const auto ns = static_cast<Eigen::Index>(m.n_states);
    const auto na = static_cast<Eigen::Index>(m.n_actions);

    if (m.n_states == 0) v.push_back("no states");
    if (m.n_actions == 0) v.push_back("no actions");
    if (m.transition.size() != m.n_actions || m.reward.size() != m.n_actions) {
        v.push_back("tensor count does not match n_actions");
        return report;
    }
    if (m.cost.rows() != ns || m.cost.cols() != na) v.push_back("cost table shape mismatch");
    if (m.rho0.size() != ns) v.push_back("rho0 length mismatch");
    if (!v.empty()) return report;

    for (std::size_t a = 0; a < m.n_actions; ++a) {
        const auto& P = m.transition[a];
        const auto& R = m.reward[a];
        if (P.rows() != ns || P.cols() != ns || R.rows() != ns || R.cols() != ns) {
            v.push_back("transition/reward shape mismatch for action a" + std::to_string(a));
            continue;
        }
        for (Eigen::Index s = 0; s < ns; ++s) {
            const std::string where = "(s" + std::to_string(s) + ",a" + std::to_string(a) + ")";
            if ((P.row(s).array() < 0.0).any() || !P.row(s).allFinite()) {
                v.push_back("negative or non-finite probability at " + where);
            }
            const double sum = P.row(s).sum();
            if (std::abs(sum - 1.0) > 1e-12) v.push_back("row sum " + format_number(sum) + " at " + where);
            if (!R.row(s).allFinite()) v.push_back("non-finite reward at " + where);
            if (!std::isfinite(m.cost(s, static_cast<Eigen::Index>(a)))) v.push_back("non-finite cost at " + where);
        }
    }
    if ((m.rho0.array() < 0.0).any() || !m.rho0.allFinite()) v.push_back("negative or non-finite rho0 entry");
    if (std::abs(m.rho0.sum() - 1.0) > 1e-12) v.push_back("rho0 sum " + format_number(m.rho0.sum()));
    if (!(m.gamma > 0.0 && m.gamma < 1.0)) v.push_back("gamma out of (0,1)");
    if (!(m.cost_limit >= 0.0) || !std::isfinite(m.cost_limit)) v.push_back("cost limit negative or non-finite");
    return report;
}

Cmdp build_two_state(double gamma, double cost_limit) {
    require_gamma(gamma);
    require_limit(cost_limit);
    Cmdp m = empty_cmdp(2, 2, gamma, cost_limit);
    constexpr std::size_t stay = 0;
    constexpr std::size_t flip = 1;
    for (Eigen::Index s = 0; s < 2; ++s) {
        m.transition[stay](s, s) = 1.0;
        m.transition[flip](s, 1 - s) = 1.0;
        for (std::size_t a = 0; a < 2; ++a) m.reward[a](s, 1) = 1.0;
        m.cost(s, static_cast<Eigen::Index>(flip)) = 1.0;
    }
    m.rho0(0) = 1.0;
    return m;
}

Cmdp build_gridworld(std::size_t width, std::size_t height, const std::vector<Cell>& hazards, Cell goal,
                     double gamma, double cost_limit) {
    require_gamma(gamma);
    require_limit(cost_limit);
    if (width == 0 || height == 0) throw PreconditionError("grid dimensions must be positive");
    const int w = static_cast<int>(width);
    const int h = static_cast<int>(height);
    auto inside = [&](Cell c) { return c.x >= 0 && c.y >= 0 && c.x < w && c.y < h; };
    if (!inside(goal)) throw PreconditionError("goal outside grid");
    std::set<Cell> hazard_set;
    for (const Cell& c : hazards) {
        if (!inside(c)) throw PreconditionError("hazard outside grid");
        if (c == goal) throw PreconditionError("goal overlaps a hazard");
        hazard_set.insert(c);
    }

    Cmdp m = empty_cmdp(width * height, 4, gamma, cost_limit);
    auto index = [&](Cell c) { return static_cast<Eigen::Index>(c.y * w + c.x); };
    // N, E, S, W
    constexpr int dx[4] = {0, 1, 0, -1};
    constexpr int dy[4] = {1, 0, -1, 0};
    const Eigen::Index goal_index = index(goal);

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Cell here{x, y};
            const Eigen::Index s = index(here);
            for (std::size_t a = 0; a < 4; ++a) {
                if (here == goal) {
                    m.transition[a](s, s) = 1.0;
                    continue;
                }
                const std::pair<std::size_t, double> moves[3] = {{a, 0.9}, {(a + 1) % 4, 0.05}, {(a + 3) % 4, 0.05}};
                for (const auto& [dir, prob] : moves) {
                    Cell next{x + dx[dir], y + dy[dir]};
                    if (!inside(next)) next = here;
                    m.transition[a](s, index(next)) += prob;
                    if (hazard_set.contains(next)) m.cost(s, static_cast<Eigen::Index>(a)) += prob;
                }
                m.reward[a](s, goal_index) = 1.0;
            }
        }
    }
    m.rho0(index(Cell{0, 0})) = 1.0;
    return m;
}

Cmdp build_random_cmdp(std::size_t n_states, std::size_t n_actions, std::uint64_t seed, double gamma,
                       double cost_limit) {
    if (n_states == 0 || n_actions == 0) throw PreconditionError("random cmdp needs at least one state and action");
    require_gamma(gamma);
    require_limit(cost_limit);
    Cmdp m = empty_cmdp(n_states, n_actions, gamma, cost_limit);
    Rng rng(derive_seed(seed, 0));
    const auto ns = static_cast<Eigen::Index>(n_states);
    for (std::size_t a = 0; a < n_actions; ++a) {
        for (Eigen::Index s = 0; s < ns; ++s) {
            for (Eigen::Index t = 0; t < ns; ++t) m.transition[a](s, t) = rng.uniform_positive();
            m.transition[a].row(s) /= m.transition[a].row(s).sum();
            for (Eigen::Index t = 0; t < ns; ++t) m.reward[a](s, t) = rng.uniform();
            m.cost(s, static_cast<Eigen::Index>(a)) = rng.uniform();
        }
    }
    m.rho0.setConstant(1.0 / static_cast<double>(n_states));
    return m;
}

SoftmaxPolicy::SoftmaxPolicy(Eigen::MatrixXd logits) : logits_(std::move(logits)) {
    if (!logits_.allFinite()) throw PreconditionError("policy logits must be finite");
}

SoftmaxPolicy SoftmaxPolicy::uniform(std::size_t n_states, std::size_t n_actions) {
    return SoftmaxPolicy(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions)));
}

SoftmaxPolicy SoftmaxPolicy::from_probabilities(const Eigen::MatrixXd& probs) {
    if ((probs.array() <= 0.0).any()) throw PreconditionError("softmax policy needs strictly positive probabilities");
    return SoftmaxPolicy(probs.array().log().matrix());
}

Eigen::RowVectorXd softmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& logits) {
    const double top = logits.maxCoeff();
    Eigen::RowVectorXd e = (logits.array() - top).exp().matrix();
    return e / e.sum();
}

Eigen::MatrixXd SoftmaxPolicy::distribution() const {
    Eigen::MatrixXd out(logits_.rows(), logits_.cols());
    for (Eigen::Index s = 0; s < logits_.rows(); ++s) out.row(s) = softmax_row(logits_.row(s));
    return out;
}

Eigen::MatrixXd policy_distribution(const SoftmaxPolicy& policy) { return policy.distribution(); }

double kl_divergence(const Eigen::Ref<const Eigen::RowVectorXd>& p, const Eigen::Ref<const Eigen::RowVectorXd>& q) {
    double kl = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p(i) > 0.0) kl += p(i) * (std::log(p(i)) - std::log(q(i)));
    }
    return std::max(kl, 0.0);
}

}  // namespace cuplab
