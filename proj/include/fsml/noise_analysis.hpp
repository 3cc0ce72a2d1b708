#pragma once

#include <cstdint>

namespace fsml {

// Row-stochastic confusion model of label-stratified drawing under symmetric
// noise: the example drawn for way i has ground truth i with probability
// clean_prob and any other way with probability (1-clean_prob)/(ways-1).
struct ConfusionMatrixQ {
    int ways = 2;
    double clean_prob = 1.0;

    double diagonal() const { return clean_prob; }
    double off_diagonal() const { return (1.0 - clean_prob) / (ways - 1); }

    void validate() const;
};

// Probability that one draw per way yields pairwise-distinct ground truths:
// the permanent of Q, sum over permutations s of prod_i q(i, s(i)), computed
// by exact enumeration of all ways! permutations (rejected above 10 ways; use
// the Monte Carlo estimate instead). Caution: this is sometimes miswritten as
// a sum of traces over permutation matrices, but sum_s trace(P_s Q) adds the
// matched entries instead of multiplying them and evaluates to ways! for every
// row-stochastic Q, independent of clean_prob. The permanent reproduces the
// two-way case p^2 + (1-p)^2.
double clean_selection_probability(const ConfusionMatrixQ& q);

struct MonteCarloEstimate {
    double estimate = 0.0;
    double standard_error = 0.0;  // sqrt(p(1-p)/trials)
};

// Simulates label-stratified drawing under symmetric per-example corruption
// at rate epsilon and counts trials whose ground truths are pairwise
// distinct. Trials run in fixed-seed chunks accumulated in chunk order, so
// the estimate is identical for any thread count.
MonteCarloEstimate monte_carlo_clean_prob(int ways, double epsilon, std::int64_t trials,
                                          std::uint64_t seed);

}  // namespace fsml
