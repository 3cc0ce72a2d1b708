#include "fsml/noise_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "fsml/exec.hpp"
#include "fsml/rng.hpp"

namespace fsml {

void ConfusionMatrixQ::validate() const {
    if (ways < 2) throw std::invalid_argument("ConfusionMatrixQ: need at least two ways");
    if (clean_prob < 0.0 || clean_prob > 1.0)
        throw std::invalid_argument("ConfusionMatrixQ: clean_prob must be in [0, 1]");
}

double clean_selection_probability(const ConfusionMatrixQ& q) {
    q.validate();
    if (q.ways > 10)
        throw std::invalid_argument(
            "clean_selection_probability: exact enumeration caps at 10 ways, use "
            "monte_carlo_clean_prob");
    const int n = q.ways;
    const double p = q.diagonal();
    const double r = q.off_diagonal();

    // permanent of Q over all n! draw-to-truth assignments
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double sum = 0.0;
    do {
        double prod = 1.0;
        for (int i = 0; i < n; ++i) prod *= (perm[i] == i) ? p : r;
        sum += prod;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return sum;
}

namespace {

constexpr std::int64_t kChunk = 1 << 14;

// trials in [begin, end) on one derived stream; returns clean-draw count
std::int64_t run_chunk(int ways, double epsilon, std::int64_t begin, std::int64_t end,
                       std::uint64_t chunk_seed) {
    rng::Rng gen(chunk_seed);
    std::int64_t clean = 0;
    std::vector<bool> seen(ways);
    for (std::int64_t t = begin; t < end; ++t) {
        std::fill(seen.begin(), seen.end(), false);
        bool distinct = true;
        for (int j = 0; j < ways; ++j) {
            int truth = j;
            if (gen.uniform() < epsilon) {
                const std::size_t pick = gen.index(ways - 1);
                truth = static_cast<int>(pick) < j ? static_cast<int>(pick)
                                                   : static_cast<int>(pick) + 1;
            }
            if (seen[truth]) {
                distinct = false;
                // keep drawing so the stream length per trial varies only
                // with the corruption coin flips, not with early exits
            }
            seen[truth] = true;
        }
        if (distinct) ++clean;
    }
    return clean;
}

}  // namespace

MonteCarloEstimate monte_carlo_clean_prob(int ways, double epsilon, std::int64_t trials,
                                          std::uint64_t seed) {
    if (ways < 2) throw std::invalid_argument("monte_carlo_clean_prob: need at least two ways");
    if (epsilon < 0.0 || epsilon > 1.0)
        throw std::invalid_argument("monte_carlo_clean_prob: epsilon must be in [0, 1]");
    if (trials < 1) throw std::invalid_argument("monte_carlo_clean_prob: trials must be positive");

    const std::int64_t chunks = (trials + kChunk - 1) / kChunk;
    std::vector<std::int64_t> counts(chunks, 0);

    if (exec::parallel_enabled()) {
#pragma omp parallel for schedule(static)
        for (std::int64_t c = 0; c < chunks; ++c) {
            const std::int64_t begin = c * kChunk;
            const std::int64_t end = std::min(trials, begin + kChunk);
            counts[c] = run_chunk(ways, epsilon, begin, end,
                                  rng::derive(seed, rng::stream::mc, c));
        }
    } else {
        for (std::int64_t c = 0; c < chunks; ++c) {
            const std::int64_t begin = c * kChunk;
            const std::int64_t end = std::min(trials, begin + kChunk);
            counts[c] = run_chunk(ways, epsilon, begin, end,
                                  rng::derive(seed, rng::stream::mc, c));
        }
    }

    std::int64_t clean = 0;
    for (std::int64_t c : counts) clean += c;  // fixed order, thread-count independent

    MonteCarloEstimate est;
    est.estimate = static_cast<double>(clean) / static_cast<double>(trials);
    est.standard_error =
        std::sqrt(est.estimate * (1.0 - est.estimate) / static_cast<double>(trials));
    return est;
}

}  // namespace fsml
