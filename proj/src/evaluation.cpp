#include "fsml/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <string>

#include "fsml/exec.hpp"
#include "fsml/rng.hpp"

namespace fsml {

std::pair<ParamVector, NetworkSpec> attach_zero_head(const ParamVector& params,
                                                     const NetworkSpec& spec, int ways) {
    if (ways < 1) throw std::invalid_argument("attach_zero_head: ways must be positive");
    if (spec.has_head())
        throw std::invalid_argument("attach_zero_head: the network already has a head");
    const ParamLayout layout = ParamLayout::of(spec);
    if (params.size() != layout.total)
        throw std::invalid_argument("attach_zero_head: parameter count does not match spec");

    NetworkSpec headed = spec;
    headed.head_width = static_cast<std::size_t>(ways);
    ParamVector out = params;
    out.resize(params.size() + spec.embedding_dim() * ways + ways, 0.0);
    return {std::move(out), std::move(headed)};
}

void zero_existing_head(ParamVector& params, const NetworkSpec& spec) {
    if (!spec.has_head())
        throw std::invalid_argument("zero_existing_head: the network has no head");
    const ParamLayout layout = ParamLayout::of(spec);
    if (params.size() != layout.total)
        throw std::invalid_argument("zero_existing_head: parameter count does not match spec");
    std::fill(params.begin() + static_cast<std::ptrdiff_t>(layout.head_offset()), params.end(),
              0.0);
}

double meta_test_task(const ParamVector& theta_star, const NetworkSpec& spec, const Task& task,
                      const EvalConfig& cfg, EvalMode mode, std::uint64_t seed) {
    if (cfg.finetune_steps < 0)
        throw std::invalid_argument("meta_test_task: negative finetune_steps");
    if (task.support.empty() || task.query.empty())
        throw std::invalid_argument("meta_test_task: task needs support and query sets");

    int ways = 0;
    for (const LabeledExample& e : task.support) ways = std::max(ways, e.label);

    ParamVector params;
    NetworkSpec headed;
    if (mode == EvalMode::zero_head) {
        std::tie(params, headed) = attach_zero_head(theta_star, spec, ways);
    } else {
        if (!spec.has_head())
            throw std::invalid_argument("meta_test_task: as_is needs a network with a head");
        if (static_cast<int>(*spec.head_width) != ways)
            throw std::invalid_argument("meta_test_task: head width " +
                                        std::to_string(*spec.head_width) + " does not match " +
                                        std::to_string(ways) + "-way task");
        params = theta_star;
        headed = spec;
    }

    const BatchView support = make_batch(task.support);
    for (int step = 0; step < cfg.finetune_steps; ++step) {
        ForwardTrace trace;
        const Matrix logits = forward(params, headed, support.x, &trace);
        const CrossEntropyResult ce = cross_entropy(logits, support.labels);
        params = sgd_step(params, backward(trace, ce.grad_logits), cfg.finetune_lr);
    }

    const BatchView query = make_batch(task.query);
    const Matrix logits = forward(params, headed, query.x);
    rng::Rng tie(rng::derive(seed, rng::stream::tie));
    std::size_t correct = 0;
    std::vector<std::size_t> best;
    for (std::size_t r = 0; r < logits.rows; ++r) {
        best.clear();
        double top = logits[r][0];
        best.push_back(0);
        for (std::size_t c = 1; c < logits.cols; ++c) {
            if (logits[r][c] > top) {
                top = logits[r][c];
                best.assign(1, c);
            } else if (logits[r][c] == top) {
                best.push_back(c);
            }
        }
        const std::size_t pick = best.size() == 1 ? best[0] : best[tie.index(best.size())];
        if (static_cast<int>(pick) == query.labels[r]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(logits.rows);
}

double ci95(const std::vector<double>& values) {
    const std::size_t n = values.size();
    if (n < 2) throw std::invalid_argument("ci95: need at least two values");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    const double sd = std::sqrt(sq / static_cast<double>(n - 1));
    return 1.96 * sd / std::sqrt(static_cast<double>(n));
}

EvalResult evaluate(const ParamVector& theta_star, const NetworkSpec& spec,
                    const SplitDataset& test_data, const TaskSpec& task_spec,
                    const EvalConfig& cfg, EvalMode mode, std::uint64_t seed) {
    if (cfg.num_tasks < 1) throw std::invalid_argument("evaluate: num_tasks must be positive");
    if (cfg.runs < 1) throw std::invalid_argument("evaluate: runs must be positive");
    task_spec.validate();
    if (task_spec.query_shots < 1)
        throw std::invalid_argument("evaluate: tasks need a query set");

    const std::int64_t total =
        static_cast<std::int64_t>(cfg.num_tasks) * static_cast<std::int64_t>(cfg.runs);
    EvalResult result;
    result.per_task_accuracies.assign(total, 0.0);

    // per-slot seeds make the loop order irrelevant
    std::exception_ptr failure = nullptr;
    const auto run_one = [&](std::int64_t i) {
        const std::int64_t run = i / cfg.num_tasks;
        const std::int64_t k = i % cfg.num_tasks;
        const std::uint64_t task_seed = rng::derive(seed, rng::stream::eval, run, k);
        const Task task = sample_task(test_data, task_spec, task_seed);
        result.per_task_accuracies[i] =
            meta_test_task(theta_star, spec, task, cfg, mode, rng::derive(task_seed, rng::stream::tie));
    };

    if (exec::parallel_enabled()) {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < total; ++i) {
            try {
                run_one(i);
            } catch (...) {
#pragma omp critical
                if (!failure) failure = std::current_exception();
            }
        }
    } else {
        for (std::int64_t i = 0; i < total; ++i) run_one(i);
    }
    if (failure) std::rethrow_exception(failure);

    double mean = 0.0;
    for (double a : result.per_task_accuracies) mean += a;
    result.mean_accuracy = mean / static_cast<double>(total);
    result.ci95 = total >= 2 ? ci95(result.per_task_accuracies) : 0.0;
    return result;
}

}  // namespace fsml
