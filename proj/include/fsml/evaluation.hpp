#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fsml/episodes.hpp"
#include "fsml/network.hpp"

namespace fsml {

struct EvalConfig {
    int num_tasks = 2048;
    int finetune_steps = 10;
    double finetune_lr = 0.1;
    int runs = 3;
};

// zero_head: append a fresh all-zero decision head before fine-tuning, for
// backbones trained without one. as_is: fine-tune the model as given.
enum class EvalMode { zero_head, as_is };

// Appends a linear head with W = 0, b = 0; logits are exactly zero until the
// first fine-tuning step.
std::pair<ParamVector, NetworkSpec> attach_zero_head(const ParamVector& params,
                                                     const NetworkSpec& spec, int ways);

// Resets an existing head to W = 0, b = 0 in place, for models whose training
// protocol adapts from a zeroed head; the backbone is untouched.
void zero_existing_head(ParamVector& params, const NetworkSpec& spec);

// Fine-tunes a copy of theta_star on the support set (full-batch CE) and
// returns query accuracy. Argmax ties break uniformly at random from seed.
double meta_test_task(const ParamVector& theta_star, const NetworkSpec& spec, const Task& task,
                      const EvalConfig& cfg, EvalMode mode, std::uint64_t seed);

// 1.96 * sample standard deviation / sqrt(n); requires n >= 2.
double ci95(const std::vector<double>& values);

struct EvalResult {
    double mean_accuracy = 0.0;
    double ci95 = 0.0;
    std::vector<double> per_task_accuracies;  // num_tasks * runs entries
};

// Samples num_tasks fresh tasks per run from clean test data and pools the
// per-task accuracies; tasks are independent and evaluated in parallel.
EvalResult evaluate(const ParamVector& theta_star, const NetworkSpec& spec,
                    const SplitDataset& test_data, const TaskSpec& task_spec,
                    const EvalConfig& cfg, EvalMode mode, std::uint64_t seed);

}  // namespace fsml
