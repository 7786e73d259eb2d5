#include "cuplab/bounds.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>

using namespace cuplab;
using namespace cuplab::testing;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Pair {
    Cmdp cmdp;
    SoftmaxPolicy pi_new;
    SoftmaxPolicy pi_old;
};

Pair random_pair(Rng& rng, std::uint64_t seed) {
    Cmdp m = random_instance(rng, seed);
    SoftmaxPolicy pi_old = random_policy(rng, m.n_states, m.n_actions);
    SoftmaxPolicy pi_new = random_policy(rng, m.n_states, m.n_actions);
    return {std::move(m), std::move(pi_new), std::move(pi_old)};
}

VectorXd old_values(const Pair& p, Signal signal = Signal::reward) {
    return solve_policy(p.cmdp, p.pi_old, signal, 0.0).V;
}

}  // namespace

TEST_CASE("divergence profile examples") {
    Rng rng(1);
    const SoftmaxPolicy pi = random_policy(rng, 4, 3);
    const DivergenceProfile same = divergence_profile(pi, pi, VectorXd::Constant(4, 0.25));
    CHECK(same.tv.cwiseAbs().maxCoeff() == 0.0);
    CHECK(same.kl.cwiseAbs().maxCoeff() == 0.0);
    CHECK(same.pi_gap_11 == 0.0);

    MatrixXd old_rows(3, 2);
    old_rows << 0.75, 0.25, 0.75, 0.25, 0.75, 0.25;
    const MatrixXd new_rows = MatrixXd::Constant(3, 2, 0.5);
    const DivergenceProfile d = divergence_profile(new_rows, old_rows, VectorXd::Constant(3, 1.0 / 3.0));
    for (Eigen::Index s = 0; s < 3; ++s) {
        CHECK(d.tv(s) == doctest::Approx(0.25).epsilon(1e-14));
        CHECK(d.kl(s) == doctest::Approx(0.75 * std::log(1.5) + 0.25 * std::log(0.5)).epsilon(1e-14));
        CHECK(d.kl(s) == doctest::Approx(0.130812).epsilon(1e-5));
    }
    CHECK(d.expected_tv == doctest::Approx(0.25));
    CHECK(d.pi_gap_11 == doctest::Approx(1.5));
}

TEST_CASE("Pinsker holds row by row") {
    Rng rng(2);
    for (int k = 0; k < 1000; ++k) {
        const std::size_t na = 2 + rng.below(4);
        const MatrixXd a = random_policy(rng, 1, na, 3.0).distribution();
        const MatrixXd b = random_policy(rng, 1, na, 3.0).distribution();
        const DivergenceProfile d = divergence_profile(a, b, VectorXd::Ones(1));
        CHECK(d.tv(0) >= 0.0);
        CHECK(d.tv(0) <= 1.0);
        CHECK(2.0 * d.tv(0) == doctest::Approx((a - b).cwiseAbs().sum()));
        CHECK(d.tv(0) <= std::sqrt(d.kl(0) / 2.0) + 1e-12);
        CHECK(d.pi_gap_11 <= 2.0 * static_cast<double>(na));
    }
}

TEST_CASE("delta gap vectors") {
    Rng rng(3);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Pair p = random_pair(rng, seed);
        const VectorXd v = old_values(p);
        for (const VectorXd& gap : delta_gap_vectors(p.cmdp, p.pi_old, p.pi_old, v, 5)) CHECK(gap.norm() == 0.0);
        const std::vector<VectorXd> gaps = delta_gap_vectors(p.cmdp, p.pi_new, p.pi_old, v, 5);
        REQUIRE(gaps.size() == 6);
        const DpSolution old_sol = solve_policy(p.cmdp, p.pi_old, Signal::reward, 0.0);
        const VectorXd expected = policy_average(old_sol.A, p.pi_new.distribution());
        CHECK((gaps[0] - expected).lpNorm<Eigen::Infinity>() < 1e-10);
    }
}

TEST_CASE("delta gap agrees with the importance-ratio estimator") {
    const Cmdp m = build_two_state(0.9, 0.5);
    const SoftmaxPolicy uniform = SoftmaxPolicy::uniform(2, 2);
    const SoftmaxPolicy flip = always_softmax(1);
    const VectorXd exact = delta_gap_vectors(m, flip, uniform, VectorXd::Zero(2), 0).front();
    const MatrixXd p_new = flip.distribution();
    const MatrixXd p_old = uniform.distribution();
    Rng rng(4);
    constexpr int n = 100000;
    for (Eigen::Index s = 0; s < 2; ++s) {
        double sum = 0.0;
        double sum_sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const auto a = static_cast<Eigen::Index>(rng.categorical(p_old.row(s)));
            const auto next = static_cast<Eigen::Index>(rng.categorical(m.transition[static_cast<std::size_t>(a)].row(s)));
            const double td = m.reward[static_cast<std::size_t>(a)](s, next);
            const double x = (p_new(s, a) / p_old(s, a) - 1.0) * td;
            sum += x;
            sum_sq += x * x;
        }
        const double mean = sum / n;
        const double se = std::sqrt((sum_sq / n - mean * mean) / n);
        CHECK(std::abs(mean - exact(s)) <= 3.0 * se);
    }
    CHECK(exact(0) == doctest::Approx(0.5));
    CHECK(exact(1) == doctest::Approx(-0.5));
}

TEST_CASE("sandwich collapses for identical policies") {
    Rng rng(5);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Pair p = random_pair(rng, seed);
        for (double lambda : {0.0, 0.5, 0.95}) {
            const SandwichResult r = theorem1_bounds(p.cmdp, p.pi_old, p.pi_old, old_values(p), lambda);
            CHECK(r.j_diff == 0.0);
            CHECK(std::abs(r.l_minus) < 1e-12);
            CHECK(std::abs(r.l_plus) < 1e-12);
            CHECK(r.pass);
        }
    }
}

TEST_CASE("sandwich holds at lambda zero") {
    Rng rng(6);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Pair p = random_pair(rng, seed);
        const VectorXd v = old_values(p);
        for (HolderPair norms : {HolderPair::l1_linf, HolderPair::l2_l2}) {
            const SandwichResult r = theorem1_bounds(p.cmdp, p.pi_new, p.pi_old, v, 0.0, 0, norms);
            CHECK(r.pass);
            CHECK(r.l_minus <= r.l_plus);
        }
    }
}

TEST_CASE("sandwich width equals the error sum") {
    Rng rng(7);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Pair p = random_pair(rng, seed);
        const double lambda = 0.5;
        const SandwichResult r = theorem1_bounds(p.cmdp, p.pi_new, p.pi_old, old_values(p), lambda);
        const double gl = p.cmdp.gamma * lambda;
        double sum = 0.0;
        double weight = 1.0;
        for (double e : r.eps) {
            CHECK(e >= 0.0);
            sum += weight * e;
            weight *= gl;
        }
        const double width = 2.0 * sum / (1.0 - tilde_gamma(p.cmdp.gamma, lambda));
        CHECK(r.l_plus - r.l_minus == doctest::Approx(width).epsilon(1e-12));
        CHECK(r.tail_bound < 1e-10);
    }
}

TEST_CASE("two-state sandwich regression values") {
    const Cmdp m = build_two_state(0.9, 0.5);
    const SoftmaxPolicy uniform = SoftmaxPolicy::uniform(2, 2);
    const VectorXd v = solve_policy(m, uniform, Signal::reward, 0.0).V;
    const SandwichResult r = theorem1_bounds(m, always_softmax(1), uniform, v, 0.0);
    CHECK(r.j_diff == doctest::Approx(0.26315789473684514).epsilon(1e-12));
    CHECK(r.l_minus == doctest::Approx(0.26315789473684187).epsilon(1e-12));
    CHECK(r.l_plus == doctest::Approx(0.73684210526315808).epsilon(1e-12));
    CHECK(r.pass);
}

TEST_CASE("explicit horizon below the certified tail is rejected") {
    Rng rng(8);
    const Pair p = random_pair(rng, 1);
    CHECK_THROWS_WITH_AS(theorem1_bounds(p.cmdp, p.pi_new, p.pi_old, old_values(p), 0.9, 3),
                         doctest::Contains("need t_max >="), PreconditionError);
}

TEST_CASE("on-path sandwich holds at every lambda") {
    Rng rng(9);
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        const Pair p = random_pair(rng, seed);
        const VectorXd v = old_values(p);
        for (double lambda : {0.0, 0.5, 0.95}) CHECK(on_path_sandwich(p.cmdp, p.pi_new, p.pi_old, v, lambda).pass);
    }
}

TEST_CASE("reward and cost bounds at lambda zero") {
    Rng rng(10);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Pair p = random_pair(rng, seed);
        const BoundReport r = evaluate_pair(p.cmdp, p.pi_new, p.pi_old, 0.0);
        CHECK(r.pass_prop1);
        CHECK(r.pass_prop2);
        CHECK(r.pass_kl_order);
        CHECK(r.kl_prop1_lower <= r.prop1_lower + 1e-12);
        CHECK(r.kl_prop2_upper >= r.prop2_cost_upper - 1e-12);
        CHECK(r.classic_gap < 1e-8);
        CHECK(r.identity_gap < 1e-8);
    }
}

TEST_CASE("KL ordering holds at every lambda") {
    Rng rng(11);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Pair p = random_pair(rng, seed);
        for (double lambda : {0.5, 0.95}) {
            const BoundReport r = evaluate_pair(p.cmdp, p.pi_new, p.pi_old, lambda);
            CHECK(r.pass_kl_order);
        }
    }
}

TEST_CASE("bounds vanish for identical policies") {
    Rng rng(12);
    const Pair p = random_pair(rng, 3);
    for (double lambda : {0.0, 0.5}) {
        CHECK(std::abs(prop1_lower_bound(p.cmdp, p.pi_old, p.pi_old, lambda)) < 1e-12);
        CHECK(std::abs(prop2_cost_upper_bound(p.cmdp, p.pi_old, p.pi_old, lambda)) < 1e-12);
        const KlBounds kl = kl_substituted_bounds(p.cmdp, p.pi_old, p.pi_old, lambda);
        CHECK(std::abs(kl.prop1_kl) < 1e-12);
        CHECK(std::abs(kl.prop2_kl) < 1e-12);
    }
}

TEST_CASE("zero-cost instance") {
    const Cmdp m = build_gridworld(3, 3, {}, {2, 2}, 0.9, 1.0);
    Rng rng(13);
    const SoftmaxPolicy a = random_policy(rng, 9, 4);
    const SoftmaxPolicy b = random_policy(rng, 9, 4);
    const BoundReport r = evaluate_pair(m, a, b, 0.0);
    CHECK(r.j_cost_diff == 0.0);
    CHECK(r.prop2_cost_upper >= 0.0);
}

TEST_CASE("TV and KL penalties nearly coincide for a small perturbation") {
    const Cmdp m = build_two_state(0.9, 0.5);
    const SoftmaxPolicy uniform = SoftmaxPolicy::uniform(2, 2);
    const double eps = 0.01;
    MatrixXd rows(2, 2);
    rows << (1.0 - eps) * 0.5 + eps, (1.0 - eps) * 0.5, (1.0 - eps) * 0.5 + eps, (1.0 - eps) * 0.5;
    const SoftmaxPolicy perturbed = SoftmaxPolicy::from_probabilities(rows);
    const double penalty_tv = cpo_comparison(m, perturbed, uniform).penalty_general;
    const KlBounds kl = kl_substituted_bounds(m, perturbed, uniform, 0.0);
    const double penalty_kl = penalty_tv + prop1_lower_bound(m, perturbed, uniform, 0.0) - kl.prop1_kl;
    REQUIRE(penalty_kl > 0.0);
    const double relative_gap = (penalty_kl - penalty_tv) / penalty_kl;
    CHECK(relative_gap >= 0.0);
    CHECK(relative_gap < 0.25);
}

TEST_CASE("general penalty is the older penalty scaled by one minus gamma") {
    Rng rng(14);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Pair p = random_pair(rng, seed);
        const CpoComparison c = cpo_comparison(p.cmdp, p.pi_new, p.pi_old);
        CHECK(c.relative_gap < 1e-10);
        CHECK(c.bound_general >= c.bound_cpo - 1e-12);
        CHECK(c.penalty_general == doctest::Approx(c.penalty_direct).epsilon(1e-10));
    }
}

TEST_CASE("visitation gap diagnostics") {
    Rng rng(15);
    const Pair same = random_pair(rng, 0);
    const VisitationGap zero = lemma1_visitation_gap(same.cmdp, same.pi_old, same.pi_old, 0.5);
    CHECK(zero.lhs == 0.0);
    CHECK(zero.rhs == 0.0);

    const Cmdp m = build_two_state(0.9, 0.5);
    const VisitationGap at_zero = lemma1_visitation_gap(m, always_softmax(1), SoftmaxPolicy::uniform(2, 2), 0.0);
    const VectorXd d_flip = solve_policy(m, always(1), Signal::reward, 0.0).d_rho0;
    const VectorXd d_uniform = solve_policy(m, SoftmaxPolicy::uniform(2, 2), Signal::reward, 0.0).d_rho0;
    CHECK(at_zero.lhs == doctest::Approx((d_flip - d_uniform).lpNorm<1>()).epsilon(1e-12));
    CHECK_FALSE(at_zero.denom_flag);

    int holds = 0;
    int flagged = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Pair p = random_pair(rng, seed);
        const VisitationGap g = lemma1_visitation_gap(p.cmdp, p.pi_new, p.pi_old, 0.5);
        CHECK(g.lhs >= 0.0);
        CHECK(g.lhs <= 2.0 + 1e-12);
        CHECK(g.rhs >= 0.0);
        holds += g.lhs <= g.rhs ? 1 : 0;
        flagged += g.denom_flag ? 1 : 0;
    }
    MESSAGE("lambda=0.5 visitation gap: lhs<=rhs in " << holds << "/100, denom_flag in " << flagged << "/100");
}

TEST_CASE("degenerate denominator is reported") {
    const Cmdp single = build_random_cmdp(1, 1, 3, 0.9, 1.0);
    const double lambda = 1.0 / (2.0 * 0.9);
    CHECK_THROWS_WITH_AS(tv_penalty_coefficient(single, lambda), doctest::Contains("degenerate denominator"),
                         PreconditionError);
    const SoftmaxPolicy pi = SoftmaxPolicy::uniform(1, 1);
    CHECK_THROWS_AS(prop1_lower_bound(single, pi, pi, lambda), PreconditionError);
    CHECK_THROWS_AS(theorem2_update_bounds(single, pi, pi, pi, 0.1, 0.1, lambda), PreconditionError);
}

TEST_CASE("null update") {
    const Cmdp grid = build_gridworld(4, 4, {{1, 1}, {2, 2}}, {3, 3}, 0.99, 5.0);
    Rng rng(16);
    const SoftmaxPolicy pi = random_policy(rng, 16, 4);
    const UpdateBounds u = theorem2_update_bounds(grid, pi, pi, pi, 0.15, 0.15, 0.95);
    CHECK(u.chi_k == 0.0);
    CHECK(u.improvement_floor == 0.0);
    CHECK(u.cost_ceiling == 5.0);
    CHECK(u.j_delta == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(u.pass_improvement);
    CHECK(u.pass_cost == (objective_j(grid, pi, Signal::cost) <= 5.0));
}

TEST_CASE("update bounds approach the lambda-free form") {
    Rng rng(17);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Pair p = random_pair(rng, seed);
        const SoftmaxPolicy half = random_policy(rng, p.cmdp.n_states, p.cmdp.n_actions);
        const UpdateBounds u = theorem2_update_bounds(p.cmdp, p.pi_old, half, p.pi_new, 0.3, 0.2, 1e-12);
        const auto [floor, ceiling] =
            remark2_update_bounds(p.cmdp.gamma, 0.3, 0.2, u.chi_k, u.epsilon_v, u.epsilon_c, p.cmdp.cost_limit);
        CHECK(u.improvement_floor == doctest::Approx(floor).epsilon(1e-6));
        CHECK(u.cost_ceiling == doctest::Approx(ceiling).epsilon(1e-6));
    }
}

TEST_CASE("bound evaluation is bitwise deterministic") {
    Rng rng(18);
    const Pair p = random_pair(rng, 9);
    const BoundReport a = evaluate_pair(p.cmdp, p.pi_new, p.pi_old, 0.95);
    const BoundReport b = evaluate_pair(p.cmdp, p.pi_new, p.pi_old, 0.95);
    CHECK(std::memcmp(&a.l_minus, &b.l_minus, sizeof(double)) == 0);
    CHECK(a.l_plus == b.l_plus);
    CHECK(a.prop1_lower == b.prop1_lower);
    CHECK(a.prop2_cost_upper == b.prop2_cost_upper);
    CHECK(a.kl_prop1_lower == b.kl_prop1_lower);
    CHECK(a.epsilon_v == b.epsilon_v);
    CHECK(a.lemma1.rhs == b.lemma1.rhs);
}
