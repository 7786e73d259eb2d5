#pragma once

#include "cuplab/cmdp.hpp"
#include "cuplab/rng.hpp"

#include <cmath>

namespace cuplab::testing {

/// Two-state tables: action 0 = stay, 1 = flip.
inline Eigen::MatrixXd always(std::size_t action) {
    Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(2, 2);
    pi.col(static_cast<Eigen::Index>(action)).setOnes();
    return pi;
}

/// Softmax stand-in for a deterministic two-state policy; exp(-1000) underflows to zero.
inline SoftmaxPolicy always_softmax(std::size_t action) {
    Eigen::MatrixXd logits = Eigen::MatrixXd::Constant(2, 2, -1000.0);
    logits.col(static_cast<Eigen::Index>(action)).setZero();
    return SoftmaxPolicy(logits);
}

inline SoftmaxPolicy random_policy(Rng& rng, std::size_t n_states, std::size_t n_actions, double scale = 1.0) {
    Eigen::MatrixXd logits(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions));
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits(i) = scale * rng.normal();
    return SoftmaxPolicy(logits);
}

inline Cmdp random_instance(Rng& rng, std::uint64_t seed) {
    const std::size_t ns = 1 + rng.below(6);
    const std::size_t na = 1 + rng.below(3);
    return build_random_cmdp(ns, na, seed);
}

}  // namespace cuplab::testing
