#include "cuplab/campaign.hpp"

#include "cuplab/csv.hpp"
#include "cuplab/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

namespace cuplab {

namespace {

constexpr std::uint64_t shape_stream = 1000;

std::size_t draw_in(Rng& rng, std::pair<std::size_t, std::size_t> range) {
    return range.first + rng.below(range.second - range.first + 1);
}

SoftmaxPolicy normal_policy(Rng& rng, std::size_t n_states, std::size_t n_actions) {
    Eigen::MatrixXd logits(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions));
    for (Eigen::Index s = 0; s < logits.rows(); ++s) {
        for (Eigen::Index a = 0; a < logits.cols(); ++a) logits(s, a) = rng.normal();
    }
    return SoftmaxPolicy(std::move(logits));
}

}  // namespace

std::vector<CampaignRow> run_bound_campaign(const CampaignConfig& config) {
    if (config.lambdas.empty()) throw PreconditionError("empty lambdas");
    if (config.state_range.first < 1 || config.state_range.first > config.state_range.second ||
        config.action_range.first < 1 || config.action_range.first > config.action_range.second) {
        throw PreconditionError("invalid state or action range");
    }
    std::vector<CampaignRow> rows;
    rows.reserve(config.n_cmdps * config.pairs_per_cmdp * config.lambdas.size());
    for (std::size_t c = 0; c < config.n_cmdps; ++c) {
        const std::uint64_t cmdp_seed = derive_seed(config.seed, c);
        Rng shape_rng(derive_seed(cmdp_seed, shape_stream));
        const std::size_t ns = draw_in(shape_rng, config.state_range);
        const std::size_t na = draw_in(shape_rng, config.action_range);
        const Cmdp cmdp = build_random_cmdp(ns, na, cmdp_seed);
        for (std::size_t p = 0; p < config.pairs_per_cmdp; ++p) {
            Rng pair_rng(derive_seed(cmdp_seed, 1 + p));
            const SoftmaxPolicy pi_old = normal_policy(pair_rng, ns, na);
            const SoftmaxPolicy pi_new = normal_policy(pair_rng, ns, na);
            for (double lambda : config.lambdas) {
                CampaignRow row;
                row.cmdp_seed = cmdp_seed;
                row.cmdp_index = c;
                row.pair_index = p;
                row.n_states = ns;
                row.n_actions = na;
                row.lambda = lambda;
                row.report = evaluate_pair(cmdp, pi_new, pi_old, lambda);
                if (lambda == 0.0) {
                    const CpoComparison cmp = cpo_comparison(cmdp, pi_new, pi_old);
                    row.cpo_relative_gap = cmp.relative_gap;
                    row.pass_cpo = cmp.relative_gap <= cpo_tolerance &&
                                   std::abs(cmp.penalty_general - cmp.penalty_direct) <=
                                       cpo_tolerance * std::max(1.0, std::abs(cmp.penalty_direct)) &&
                                   cmp.bound_general >= cmp.bound_cpo - bound_tolerance;
                }
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

std::map<double, LambdaSummary> summarize(const std::vector<CampaignRow>& rows) {
    std::map<double, LambdaSummary> out;
    for (const CampaignRow& row : rows) {
        LambdaSummary& s = out[row.lambda];
        const BoundReport& r = row.report;
        if (s.rows == 0) {
            s.worst_theorem1_margin = r.margin_theorem1;
            s.worst_prop1_margin = r.margin_prop1;
            s.worst_prop2_margin = r.margin_prop2;
        }
        ++s.rows;
        s.theorem1_violations += !r.pass_theorem1;
        s.prop1_violations += !r.pass_prop1;
        s.prop2_violations += !r.pass_prop2;
        s.kl_order_violations += !r.pass_kl_order;
        s.cpo_violations += !row.pass_cpo;
        s.identity_violations += r.classic_gap >= identity_tolerance || r.identity_gap >= identity_tolerance;
        s.on_path_violations += !r.pass_on_path;
        s.denom_flags += r.denom_flag;
        s.lemma1_holds += r.lemma1.lhs <= r.lemma1.rhs;
        s.max_classic_gap = std::max(s.max_classic_gap, r.classic_gap);
        s.max_identity_gap = std::max(s.max_identity_gap, r.identity_gap);
        s.max_cpo_gap = std::max(s.max_cpo_gap, row.cpo_relative_gap);
        s.worst_theorem1_margin = std::min(s.worst_theorem1_margin, r.margin_theorem1);
        s.worst_prop1_margin = std::min(s.worst_prop1_margin, r.margin_prop1);
        s.worst_prop2_margin = std::min(s.worst_prop2_margin, r.margin_prop2);
    }
    return out;
}

void write_campaign_csv(std::ostream& out, const std::vector<CampaignRow>& rows) {
    out << "seed,cmdp,pair,n_states,n_actions,lambda,j_diff,l_minus,l_plus,prop1,prop2,prop1_kl,prop2_kl,chi_k,"
           "pass_theorem1,pass_prop1,pass_prop2,pass_kl_order,pass_cpo,denom_flag,j_cost_diff,epsilon_v,epsilon_c,"
           "classic_gap,identity_gap,cpo_relative_gap,lemma1_lhs,lemma1_rhs,pass_on_path\n";
    using csv::flag;
    using csv::real;
    for (const CampaignRow& row : rows) {
        const BoundReport& r = row.report;
        out << csv::join({std::to_string(row.cmdp_seed), std::to_string(row.cmdp_index),
                          std::to_string(row.pair_index), std::to_string(row.n_states),
                          std::to_string(row.n_actions), real(row.lambda), real(r.j_diff), real(r.l_minus),
                          real(r.l_plus), real(r.prop1_lower), real(r.prop2_cost_upper), real(r.kl_prop1_lower),
                          real(r.kl_prop2_upper), real(r.chi), flag(r.pass_theorem1), flag(r.pass_prop1),
                          flag(r.pass_prop2), flag(r.pass_kl_order), flag(row.pass_cpo), flag(r.denom_flag),
                          real(r.j_cost_diff), real(r.epsilon_v), real(r.epsilon_c), real(r.classic_gap),
                          real(r.identity_gap), real(row.cpo_relative_gap), real(r.lemma1.lhs),
                          real(r.lemma1.rhs), flag(r.pass_on_path)})
            << '\n';
    }
}

void write_campaign_summary(std::ostream& out, const std::map<double, LambdaSummary>& summary) {
    char line[256];
    std::snprintf(line, sizeof line, "%-7s %5s %6s %6s %6s %6s %6s %9s %9s %8s %8s %10s\n", "lambda", "rows",
                  "thm1", "prop1", "prop2", "klord", "ident", "max_gap", "min_thm1", "denom%", "lemma1%",
                  "on_path");
    out << line;
    for (const auto& [lambda, s] : summary) {
        const double n = static_cast<double>(std::max<std::size_t>(s.rows, 1));
        std::snprintf(line, sizeof line, "%-7.3g %5zu %6zu %6zu %6zu %6zu %6zu %9.2e %9.2e %8.1f %8.1f %10zu\n",
                      lambda, s.rows, s.theorem1_violations, s.prop1_violations, s.prop2_violations,
                      s.kl_order_violations, s.identity_violations,
                      std::max(s.max_classic_gap, s.max_identity_gap), s.worst_theorem1_margin,
                      100.0 * static_cast<double>(s.denom_flags) / n, 100.0 * static_cast<double>(s.lemma1_holds) / n,
                      s.on_path_violations);
        out << line;
    }
}

}  // namespace cuplab
