#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fsml/exec.hpp"
#include "fsml/experiment.hpp"
#include "fsml/noise_analysis.hpp"
#include "fsml/rng.hpp"

#include "CLI11.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::string format = "csv";
    std::string exec_mode;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "Experiment config (JSON)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", opts.seed, "Root seed (overrides config)");
    cmd->add_option("--out", opts.out, "Output directory (overrides config)");
    cmd->add_option("--format", opts.format, "Results format")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--exec", opts.exec_mode, "Kernel execution mode")
        ->check(CLI::IsMember({"serial", "parallel"}));
    cmd->add_option("--threads", opts.threads, "Worker threads for parallel mode")
        ->check(CLI::PositiveNumber);
}

fsml::ExperimentConfig resolve_config(const CommonOpts& opts) {
    fsml::ExperimentConfig cfg = opts.config_path.empty()
                                     ? fsml::ExperimentConfig{}
                                     : fsml::load_experiment_config(opts.config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.out) cfg.out_dir = *opts.out;
    return cfg;
}

void apply_exec(const CommonOpts& opts) {
    if (opts.exec_mode == "serial") fsml::exec::set_mode(fsml::exec::Mode::serial);
    if (opts.exec_mode == "parallel") fsml::exec::set_mode(fsml::exec::Mode::parallel);
    if (opts.threads > 0) fsml::exec::set_thread_count(opts.threads);
}

fsml::EmitFormat parse_format(const std::string& s) {
    return s == "json" ? fsml::EmitFormat::json : fsml::EmitFormat::csv;
}

std::string result_path(const std::string& dir, const std::string& stem,
                        const std::string& format) {
    return (fs::path(dir) / (stem + "." + format)).string();
}

int run_sweep_cmd(const CommonOpts& opts) {
    const fsml::ExperimentConfig cfg = resolve_config(opts);
    fs::create_directories(cfg.out_dir);
    int failures = 0;
    const auto rows = fsml::run_sweep(cfg, [&](const fsml::ResultRow& row) {
        if (row.failed) {
            ++failures;
            json warn = {{"warning", "cell_failed"},
                         {"learner", row.learner},
                         {"mode", row.mode},
                         {"epsilon", row.epsilon},
                         {"message", row.error}};
            std::cerr << warn.dump() << "\n";
            return;
        }
        std::printf("%s %s eps=%.2f acc=%.4f ci95=%.4f\n", row.learner.c_str(),
                    row.mode.c_str(), row.epsilon, row.mean_accuracy, row.ci95);
        std::fflush(stdout);
    });
    const std::string path = result_path(cfg.out_dir, "results", opts.format);
    fsml::emit_results(rows, parse_format(opts.format), path);
    json summary = {{"results", path},
                    {"rows", rows.size()},
                    {"failed_cells", failures},
                    {"seed", cfg.seed}};
    std::cout << summary.dump() << "\n";
    return 0;
}

int run_train_cmd(const CommonOpts& opts, const std::string& learner_s, const std::string& mode_s,
                  double epsilon, bool epsilon_set) {
    const fsml::ExperimentConfig cfg = resolve_config(opts);
    fs::create_directories(cfg.out_dir);
    const fsml::LearnerKind learner =
        learner_s.empty() ? cfg.learners.front() : fsml::learner_from_string(learner_s);
    const fsml::SamplerMode mode =
        mode_s.empty() ? cfg.modes.front() : fsml::sampler_from_string(mode_s);
    const double eps = epsilon_set ? epsilon : cfg.epsilons.front();
    if (eps < 0.0 || eps > 1.0) throw std::runtime_error("train: epsilon outside [0, 1]");

    const auto [train_data, test_data] = fsml::build_datasets(cfg);
    (void)test_data;
    auto [theta, spec] = fsml::train_cell(cfg, train_data, learner, mode, eps, cfg.seed);
    const std::string path = (fs::path(cfg.out_dir) / "checkpoint.bin").string();
    fsml::save_checkpoint(theta, spec, path);
    json summary = {{"checkpoint", path},
                    {"learner", fsml::to_string(learner)},
                    {"mode", fsml::to_string(mode)},
                    {"epsilon", eps},
                    {"seed", cfg.seed},
                    {"params", theta.size()}};
    std::cout << summary.dump() << "\n";
    return 0;
}

int run_eval_cmd(const CommonOpts& opts, const std::string& checkpoint,
                 const std::string& learner_s, const std::string& mode_s, bool force_zero_head) {
    const fsml::ExperimentConfig cfg = resolve_config(opts);
    fs::create_directories(cfg.out_dir);
    auto [theta, spec] = fsml::load_checkpoint(checkpoint);
    const fsml::LearnerKind learner =
        learner_s.empty() ? cfg.learners.front() : fsml::learner_from_string(learner_s);
    const auto [train_data, test_data] = fsml::build_datasets(cfg);
    (void)train_data;

    fsml::TaskSpec task = cfg.task;
    task.shots = cfg.shots_for(learner);
    const fsml::EvalMode mode =
        spec.has_head() ? fsml::EvalMode::as_is : fsml::EvalMode::zero_head;
    // models trained to adapt from a zeroed head are tested from one as well
    if (spec.has_head() && (force_zero_head || learner == fsml::LearnerKind::fomaml_zo))
        fsml::zero_existing_head(theta, spec);
    const fsml::EvalResult res =
        fsml::evaluate(theta, spec, test_data, task, cfg.eval,
                       mode, fsml::rng::derive(cfg.seed, fsml::rng::stream::eval));

    fsml::ResultRow row;
    row.learner = learner_s.empty() ? "checkpoint" : learner_s;
    row.mode = mode_s.empty() ? (spec.has_head() ? "supervised" : "batman") : mode_s;
    row.epsilon = 0.0;
    row.mean_accuracy = res.mean_accuracy;
    row.ci95 = res.ci95;
    row.seed = cfg.seed;
    const std::string path = result_path(cfg.out_dir, "eval", opts.format);
    fsml::emit_results({row}, parse_format(opts.format), path);
    std::cout << fsml::format_results({row}, parse_format(opts.format));
    return 0;
}

int run_gen_data_cmd(const CommonOpts& opts) {
    const fsml::ExperimentConfig cfg = resolve_config(opts);
    fs::create_directories(cfg.out_dir);
    const auto [train_data, test_data] = fsml::build_datasets(cfg);
    const std::string train_path = (fs::path(cfg.out_dir) / "train.csv").string();
    const std::string test_path = (fs::path(cfg.out_dir) / "test.csv").string();
    fsml::save_csv_dataset(train_data, train_path);
    fsml::save_csv_dataset(test_data, test_path);
    json summary = {{"train", train_path},
                    {"test", test_path},
                    {"train_classes", train_data.num_classes()},
                    {"test_classes", test_data.num_classes()},
                    {"dim", train_data.dim()},
                    {"seed", cfg.seed}};
    std::cout << summary.dump() << "\n";
    return 0;
}

int run_prob_analysis_cmd(const CommonOpts& opts, const std::vector<int>& ways,
                          const std::vector<double>& epsilons, long long trials) {
    const std::uint64_t seed = opts.seed.value_or(0);
    std::string out;
    if (opts.format == "csv") {
        out = "ways,epsilon,analytic,monte_carlo,stderr\n";
    }
    json arr = json::array();
    for (int n : ways) {
        for (double eps : epsilons) {
            const fsml::ConfusionMatrixQ q{n, 1.0 - eps};
            const double analytic = fsml::clean_selection_probability(q);
            const auto mc = fsml::monte_carlo_clean_prob(
                n, eps, trials, fsml::rng::derive(seed, fsml::rng::stream::mc, n));
            if (opts.format == "csv") {
                char line[160];
                std::snprintf(line, sizeof line, "%d,%.6f,%.6f,%.6f,%.6f\n", n, eps, analytic,
                              mc.estimate, mc.standard_error);
                out += line;
            } else {
                arr.push_back({{"ways", n},
                               {"epsilon", eps},
                               {"analytic", analytic},
                               {"monte_carlo", mc.estimate},
                               {"stderr", mc.standard_error}});
            }
        }
    }
    if (opts.format == "json") out = arr.dump(2) + "\n";
    std::cout << out;
    if (opts.out) {
        fs::create_directories(*opts.out);
        const std::string path = result_path(*opts.out, "prob_analysis", opts.format);
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("prob-analysis: cannot open " + path);
        f << out;
    }
    return 0;
}

std::string error_type(const std::exception& e) {
    if (dynamic_cast<const fsml::CheckpointVersionError*>(&e)) return "checkpoint_version";
    if (dynamic_cast<const fsml::CheckpointCorruptError*>(&e)) return "checkpoint_corrupt";
    if (dynamic_cast<const fsml::CheckpointShapeError*>(&e)) return "checkpoint_shape";
    if (dynamic_cast<const std::invalid_argument*>(&e)) return "invalid_argument";
    if (dynamic_cast<const std::logic_error*>(&e)) return "logic_error";
    return "runtime_error";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Few-shot meta-learning workbench"};
    app.require_subcommand(1);

    CommonOpts sweep_opts, train_opts, eval_opts, gen_opts, prob_opts;

    CLI::App* sweep = app.add_subcommand("sweep", "Run the learner x mode x noise grid");
    add_common(sweep, sweep_opts);

    CLI::App* train = app.add_subcommand("train", "Meta-train one cell, save a checkpoint");
    add_common(train, train_opts);
    std::string train_learner, train_mode;
    double train_eps = 0.0;
    train->add_option("--learner", train_learner, "Learner (default: first in config)");
    train->add_option("--mode", train_mode, "Sampler mode (default: first in config)");
    CLI::Option* eps_opt =
        train->add_option("--epsilon", train_eps, "Label-noise rate (default: first in config)");

    CLI::App* eval = app.add_subcommand("eval", "Meta-test a checkpoint on the test split");
    add_common(eval, eval_opts);
    std::string eval_checkpoint, eval_learner, eval_mode;
    eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint to evaluate")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--learner", eval_learner, "Label for the emitted row");
    eval->add_option("--mode", eval_mode, "Label for the emitted row");
    bool eval_zero_head = false;
    eval->add_flag("--zero-head", eval_zero_head,
                   "Reset an existing head to zeros before fine-tuning");

    CLI::App* gen = app.add_subcommand("gen-data", "Write the configured dataset as CSV");
    add_common(gen, gen_opts);

    CLI::App* prob = app.add_subcommand(
        "prob-analysis", "Clean-selection probability: analytic vs Monte Carlo");
    add_common(prob, prob_opts);
    std::vector<int> prob_ways = {2, 3, 5};
    std::vector<double> prob_eps = {0.0, 0.3, 0.6};
    long long prob_trials = 1000000;
    prob->add_option("--ways", prob_ways, "Ways to tabulate");
    prob->add_option("--epsilons", prob_eps, "Noise rates to tabulate");
    prob->add_option("--trials", prob_trials, "Monte Carlo trials per entry")
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        json err = {{"error", {{"type", "usage"}, {"message", e.what()}}}};
        std::cerr << err.dump() << "\n";
        return 2;
    }

    try {
        if (sweep->parsed()) {
            apply_exec(sweep_opts);
            return run_sweep_cmd(sweep_opts);
        }
        if (train->parsed()) {
            apply_exec(train_opts);
            return run_train_cmd(train_opts, train_learner, train_mode, train_eps,
                                 eps_opt->count() > 0);
        }
        if (eval->parsed()) {
            apply_exec(eval_opts);
            return run_eval_cmd(eval_opts, eval_checkpoint, eval_learner, eval_mode,
                                eval_zero_head);
        }
        if (gen->parsed()) {
            apply_exec(gen_opts);
            return run_gen_data_cmd(gen_opts);
        }
        if (prob->parsed()) {
            apply_exec(prob_opts);
            return run_prob_analysis_cmd(prob_opts, prob_ways, prob_eps, prob_trials);
        }
    } catch (const std::exception& e) {
        json err = {{"error", {{"type", error_type(e)}, {"message", e.what()}}}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
