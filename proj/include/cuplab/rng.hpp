#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>

namespace cuplab {

/// SplitMix64 finalizer, used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of the stream owned by `(seed, stream)`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

/**
 * mt19937_64 with hand-rolled variate generation so draws do not depend on
 * the standard library's distribution implementations.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1].
    double uniform_positive() { return 1.0 - uniform(); }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }

    /// Standard normal by Box-Muller.
    double normal() {
        const double u1 = uniform_positive();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    /// Inverse-CDF draw from a probability row.
    std::size_t categorical(const Eigen::Ref<const Eigen::RowVectorXd>& probs) {
        const double u = uniform();
        double acc = 0.0;
        std::size_t last_positive = 0;
        const auto n = static_cast<std::size_t>(probs.size());
        for (std::size_t i = 0; i < n; ++i) {
            const double p = probs(static_cast<Eigen::Index>(i));
            if (p <= 0.0) continue;
            acc += p;
            last_positive = i;
            if (u < acc) return i;
        }
        // Rounding left u above the accumulated mass.
        return last_positive;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace cuplab
