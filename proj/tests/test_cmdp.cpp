#include "cuplab/cmdp.hpp"
#include "cuplab/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace cuplab;

TEST_CASE("two-state instance is valid") { CHECK(validate_cmdp(build_two_state(0.9, 0.5)).ok()); }

TEST_CASE("row-sum violation names the offending pair") {
    Cmdp m = build_two_state(0.9, 0.5);
    m.transition[0](0, 0) = 0.5;
    m.transition[0](0, 1) = 0.4;
    const ValidationReport report = validate_cmdp(m);
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0] == "row sum 0.9 at (s0,a0)");
}

TEST_CASE("discount outside (0,1) is reported") {
    Cmdp m = build_two_state(0.9, 0.5);
    m.gamma = 1.0;
    const ValidationReport report = validate_cmdp(m);
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0] == "gamma out of (0,1)");
}

TEST_CASE("validation reports negative entries and bad rho0") {
    Cmdp m = build_two_state(0.9, 0.5);
    m.transition[1](1, 0) = -0.5;
    m.transition[1](1, 1) = 1.5;
    m.rho0(0) = 0.7;
    const ValidationReport report = validate_cmdp(m);
    CHECK(report.violations.size() == 2);
    CHECK(report.violations[0] == "negative or non-finite probability at (s1,a1)");
    CHECK(report.violations[1].rfind("rho0 sum", 0) == 0);
}

TEST_CASE("two-state dynamics") {
    const Cmdp m = build_two_state(0.9, 0.5);
    CHECK(m.p(0, 0, 0) == 1.0);
    CHECK(m.p(0, 1, 1) == 1.0);
    CHECK(m.p(1, 1, 0) == 1.0);
    CHECK(m.r(0, 1, 1) == 1.0);
    CHECK(m.r(1, 1, 0) == 0.0);
    CHECK(m.c(0, 1) == 1.0);
    CHECK(m.c(1, 0) == 0.0);
    CHECK(m.rho0(0) == 1.0);
    CHECK_THROWS_AS(build_two_state(1.0, 0.5), PreconditionError);
    CHECK_THROWS_AS(build_two_state(0.0, 0.5), PreconditionError);
    CHECK_THROWS_AS(build_two_state(0.9, -1.0), PreconditionError);
}

TEST_CASE("gridworld construction") {
    const Cmdp m = build_gridworld(4, 4, {{1, 1}, {2, 2}}, {3, 3}, 0.99, 5.0);
    CHECK(m.n_states == 16);
    CHECK(m.n_actions == 4);
    CHECK(validate_cmdp(m).ok());
    // North from (1,0) lands on the hazard (1,1) with probability 0.9.
    CHECK(m.c(1, 0) == doctest::Approx(0.9));
    // Goal is absorbing and silent.
    const std::size_t goal = 15;
    for (std::size_t a = 0; a < 4; ++a) {
        CHECK(m.p(goal, a, goal) == 1.0);
        CHECK(m.r(goal, a, goal) == 0.0);
    }
    CHECK(m.r(14, 1, goal) == 1.0);
}

TEST_CASE("gridworld rejects bad cells") {
    CHECK_THROWS_AS(build_gridworld(4, 4, {{3, 3}}, {3, 3}, 0.99, 5.0), PreconditionError);
    CHECK_THROWS_AS(build_gridworld(4, 4, {{4, 0}}, {3, 3}, 0.99, 5.0), PreconditionError);
    CHECK_THROWS_AS(build_gridworld(4, 4, {}, {0, 4}, 0.99, 5.0), PreconditionError);
}

TEST_CASE("single-cell gridworld is one absorbing state") {
    const Cmdp m = build_gridworld(1, 1, {}, {0, 0}, 0.9, 0.0);
    CHECK(m.n_states == 1);
    CHECK(validate_cmdp(m).ok());
    CHECK(m.cost.isZero());
}

TEST_CASE("random cmdp is a pure function of its arguments") {
    const Cmdp a = build_random_cmdp(5, 3, 7);
    const Cmdp b = build_random_cmdp(5, 3, 7);
    CHECK(a == b);
    CHECK(validate_cmdp(a).ok());
    CHECK(a.gamma == 0.9);
    const Cmdp c = build_random_cmdp(5, 3, 8);
    bool differs = false;
    for (std::size_t k = 0; k < 3; ++k) differs = differs || a.transition[k] != c.transition[k];
    CHECK(differs);
    CHECK_THROWS_AS(build_random_cmdp(0, 3, 1), PreconditionError);
}

TEST_CASE("every builder output validates") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        CHECK(validate_cmdp(build_random_cmdp(1 + seed % 6, 1 + seed % 3, seed)).ok());
    }
    for (std::size_t w = 1; w <= 5; ++w) {
        for (std::size_t h = 1; h <= 5; ++h) {
            CHECK(validate_cmdp(build_gridworld(w, h, {}, {static_cast<int>(w) - 1, static_cast<int>(h) - 1}, 0.95, 1.0)).ok());
        }
    }
}

TEST_CASE("softmax distributions") {
    CHECK(SoftmaxPolicy::uniform(3, 2).distribution().isApproxToConstant(0.5));

    Eigen::MatrixXd logits(1, 2);
    logits << std::log(3.0), 0.0;
    const Eigen::MatrixXd pi = policy_distribution(SoftmaxPolicy(logits));
    CHECK(pi(0, 0) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(pi(0, 1) == doctest::Approx(0.25).epsilon(1e-14));

    Eigen::MatrixXd a(1, 2);
    Eigen::MatrixXd b(1, 2);
    a << 10.0, 0.0;
    b << 11.0, 1.0;
    CHECK((SoftmaxPolicy(a).distribution() - SoftmaxPolicy(b).distribution()).cwiseAbs().maxCoeff() <= 1e-12);

    Eigen::MatrixXd bad(1, 2);
    bad << std::nan(""), 0.0;
    CHECK_THROWS_AS(SoftmaxPolicy{bad}, PreconditionError);
}

TEST_CASE("softmax is row-stochastic, positive and shift invariant") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::MatrixXd logits(4, 3);
        for (Eigen::Index i = 0; i < logits.size(); ++i) logits(i) = 5.0 * rng.normal();
        const Eigen::MatrixXd pi = SoftmaxPolicy(logits).distribution();
        CHECK((pi.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
        CHECK((pi.array() > 0.0).all());
        Eigen::MatrixXd shifted = logits;
        shifted.row(2).array() += 7.5 * rng.normal();
        CHECK((SoftmaxPolicy(shifted).distribution() - pi).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("kl divergence") {
    Eigen::RowVectorXd p(2);
    Eigen::RowVectorXd q(2);
    p << 0.75, 0.25;
    q << 0.5, 0.5;
    CHECK(kl_divergence(p, q) == doctest::Approx(0.75 * std::log(1.5) + 0.25 * std::log(0.5)).epsilon(1e-14));
    CHECK(kl_divergence(p, q) == doctest::Approx(0.130812).epsilon(1e-6));
    CHECK(kl_divergence(p, p) == 0.0);
}

TEST_CASE("rng helpers") {
    Rng a(42);
    Rng b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    Eigen::RowVectorXd probs(3);
    probs << 0.0, 1.0, 0.0;
    Rng r(5);
    for (int i = 0; i < 100; ++i) CHECK(r.categorical(probs) == 1);
}
