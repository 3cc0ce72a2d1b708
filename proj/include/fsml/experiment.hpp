#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fsml/evaluation.hpp"
#include "fsml/meta.hpp"

namespace fsml {

struct SyntheticConfig {
    int train_classes = 20;
    int test_classes = 10;
    int dim = 16;
    double class_sep = 4.0;
    double within_std = 1.0;
    int per_class = 30;
};

struct CsvSourceConfig {
    std::string train_path;
    std::string test_path;
};

// Exactly one source is active; synthetic by default.
struct DatasetConfig {
    std::optional<SyntheticConfig> synthetic = SyntheticConfig{};
    std::optional<CsvSourceConfig> csv;
};

struct BackboneConfig {
    std::vector<int> hidden = {64};
    int embedding = 32;
    Activation activation = Activation::relu;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    TaskSpec task;
    std::map<LearnerKind, int> shots_by_learner;  // optional per-learner K override
    std::vector<double> epsilons = {0.0, 0.3, 0.6};
    std::vector<LearnerKind> learners;            // default: all four
    std::vector<SamplerMode> modes;               // default: supervised, batman
    BackboneConfig backbone;
    InnerLoopConfig inner;
    std::map<LearnerKind, int> inner_steps;       // per-learner u, defaults below
    double inner_clr_lr = 0.0;                    // contrastive-mode lr override, 0 = inner.lr
    OuterConfig outer;
    double outer_clr_lr = 0.0;                    // contrastive-mode lr override, 0 = outer.lr
    ImamlConfig imaml;
    DclConfig dcl;
    Augmenter augmenter;
    PoolConfig pools;
    EvalConfig eval;
    int epochs = 500;
    int runs_per_cell = 1;
    int ssl_meta_batch = 25;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    // Wall time is the one volatile column; it stays 0 unless requested so
    // that sweep outputs are byte-identical across reruns by default.
    bool record_wall_time = false;

    ExperimentConfig();
    void validate() const;
    int shots_for(LearnerKind learner) const;
    int steps_for(LearnerKind learner) const;
};

// Strict parser: unknown keys anywhere in the tree are errors.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

std::string to_string(LearnerKind k);
std::string to_string(SamplerMode m);
LearnerKind learner_from_string(const std::string& s);
SamplerMode sampler_from_string(const std::string& s);

struct ResultRow {
    std::string learner;
    std::string mode;
    double epsilon = 0.0;
    double mean_accuracy = 0.0;
    double ci95 = 0.0;
    std::uint64_t seed = 0;
    double wall_time_seconds = 0.0;
    bool failed = false;     // mean/ci are NaN when set
    std::string error;       // not emitted; surfaced in the CLI error summary
};

// (train, test) splits per the dataset config; class ids are disjoint.
std::pair<SplitDataset, SplitDataset> build_datasets(const ExperimentConfig& cfg);

std::uint64_t cell_seed(std::uint64_t root, std::size_t learner_idx, std::size_t mode_idx,
                        std::size_t eps_idx, std::size_t run_idx);

// Backbone spec for the dataset dimension; supervised and ssl modes get a
// ways-sized decision head, contrastive modes train the bare backbone.
NetworkSpec make_network_spec(const ExperimentConfig& cfg, std::size_t input_dim,
                              SamplerMode mode);

TrainSetup make_train_setup(const ExperimentConfig& cfg, LearnerKind learner, SamplerMode mode);

// Meta-trains one grid cell on noise-injected train data.
std::pair<ParamVector, NetworkSpec> train_cell(const ExperimentConfig& cfg,
                                               const SplitDataset& train_data,
                                               LearnerKind learner, SamplerMode mode,
                                               double epsilon, std::uint64_t seed);

// Full grid: learners x modes x epsilons x runs_per_cell. A failing cell
// records a NaN row and the sweep moves on; meta-testing always runs on the
// untouched clean test split.
std::vector<ResultRow> run_sweep(const ExperimentConfig& cfg,
                                 const std::function<void(const ResultRow&)>& on_row = {});

struct CheckpointVersionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CheckpointCorruptError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CheckpointShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Self-describing binary checkpoint (format version, spec, flat params,
// checksum); load returns bit-for-bit identical parameters.
void save_checkpoint(const ParamVector& params, const NetworkSpec& spec, const std::string& path);
std::pair<ParamVector, NetworkSpec> load_checkpoint(const std::string& path);
std::pair<ParamVector, NetworkSpec> load_checkpoint(const std::string& path,
                                                    const NetworkSpec& expected);

enum class EmitFormat { csv, json };

std::string format_results(const std::vector<ResultRow>& rows, EmitFormat format);
void emit_results(const std::vector<ResultRow>& rows, EmitFormat format, const std::string& path);

}  // namespace fsml
