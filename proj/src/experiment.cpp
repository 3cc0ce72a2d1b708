#include "fsml/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fsml/rng.hpp"

#include "json.hpp"

namespace fsml {

using nlohmann::json;

ExperimentConfig::ExperimentConfig() {
    learners = {LearnerKind::reptile, LearnerKind::eigen_reptile, LearnerKind::fomaml_zo,
                LearnerKind::imaml};
    modes = {SamplerMode::supervised, SamplerMode::batman};
    inner_steps = {{LearnerKind::reptile, 7},
                   {LearnerKind::eigen_reptile, 7},
                   {LearnerKind::fomaml_zo, 5},
                   {LearnerKind::imaml, 12}};
}

int ExperimentConfig::shots_for(LearnerKind learner) const {
    const auto it = shots_by_learner.find(learner);
    return it == shots_by_learner.end() ? task.shots : it->second;
}

int ExperimentConfig::steps_for(LearnerKind learner) const {
    const auto it = inner_steps.find(learner);
    return it == inner_steps.end() ? inner.steps : it->second;
}

void ExperimentConfig::validate() const {
    task.validate();
    if (learners.empty()) throw std::runtime_error("config: learners must not be empty");
    if (modes.empty()) throw std::runtime_error("config: modes must not be empty");
    if (epsilons.empty()) throw std::runtime_error("config: epsilons must not be empty");
    for (double e : epsilons)
        if (e < 0.0 || e > 1.0) throw std::runtime_error("config: epsilon outside [0, 1]");
    if (epochs < 0) throw std::runtime_error("config: negative epochs");
    if (runs_per_cell < 1) throw std::runtime_error("config: runs_per_cell must be >= 1");
    if (ssl_meta_batch < 1) throw std::runtime_error("config: ssl_meta_batch must be >= 1");
    if (backbone.embedding < 1) throw std::runtime_error("config: embedding width must be >= 1");
    for (int h : backbone.hidden)
        if (h < 1) throw std::runtime_error("config: hidden width must be >= 1");
    if (inner.lr <= 0.0 || outer.lr <= 0.0) throw std::runtime_error("config: lr must be > 0");
    if (inner.batman_v < 1 || outer.query_v < 1)
        throw std::runtime_error("config: manifold batch sizes must be >= 1");
    if (outer.meta_batch < 1) throw std::runtime_error("config: meta_batch must be >= 1");
    if (pools.support_augs < 2 || pools.query_augs < 2)
        throw std::runtime_error("config: augmentation pools need at least two entries");
    if (eval.num_tasks < 1 || eval.runs < 1 || eval.finetune_steps < 0 ||
        eval.finetune_lr <= 0.0)
        throw std::runtime_error("config: bad eval section");
    if (imaml.lambda <= 0.0 || imaml.cg_iters < 1 || imaml.hvp_h <= 0.0)
        throw std::runtime_error("config: bad imaml section");
    if (dcl.tau <= 0.0) throw std::runtime_error("config: tau must be > 0");
    if (!dataset.synthetic.has_value() && !dataset.csv.has_value())
        throw std::runtime_error("config: dataset has no source");
}

std::string to_string(LearnerKind k) {
    switch (k) {
        case LearnerKind::reptile: return "reptile";
        case LearnerKind::eigen_reptile: return "eigen_reptile";
        case LearnerKind::fomaml_zo: return "fomaml_zo";
        case LearnerKind::imaml: return "imaml";
    }
    return "?";
}

std::string to_string(SamplerMode m) {
    switch (m) {
        case SamplerMode::supervised: return "supervised";
        case SamplerMode::man: return "man";
        case SamplerMode::batman: return "batman";
        case SamplerMode::rand: return "rand";
        case SamplerMode::ssl: return "ssl";
    }
    return "?";
}

LearnerKind learner_from_string(const std::string& s) {
    if (s == "reptile") return LearnerKind::reptile;
    if (s == "eigen_reptile") return LearnerKind::eigen_reptile;
    if (s == "fomaml_zo") return LearnerKind::fomaml_zo;
    if (s == "imaml") return LearnerKind::imaml;
    throw std::runtime_error("config: unknown learner '" + s + "'");
}

SamplerMode sampler_from_string(const std::string& s) {
    if (s == "supervised") return SamplerMode::supervised;
    if (s == "man") return SamplerMode::man;
    if (s == "batman") return SamplerMode::batman;
    if (s == "rand") return SamplerMode::rand;
    if (s == "ssl") return SamplerMode::ssl;
    throw std::runtime_error("config: unknown mode '" + s + "'");
}

namespace {

void check_keys(const json& j, const std::string& ctx,
                std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw std::runtime_error("config: " + ctx + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known)
            throw std::runtime_error("config: unknown key '" + it.key() + "' in " + ctx);
    }
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    throw std::runtime_error("config: unknown activation '" + s + "'");
}

AugmenterKind augmenter_from_string(const std::string& s) {
    if (s == "identity") return AugmenterKind::identity;
    if (s == "gaussian_jitter_scale") return AugmenterKind::gaussian_jitter_scale;
    throw std::runtime_error("config: unknown augmenter '" + s + "'");
}

void parse_dataset(const json& j, DatasetConfig& out) {
    check_keys(j, "dataset", {"synthetic", "csv"});
    if (j.contains("synthetic") && j.contains("csv"))
        throw std::runtime_error("config: dataset must name exactly one source");
    if (j.contains("synthetic")) {
        const json& s = j["synthetic"];
        check_keys(s, "dataset.synthetic",
                   {"train_classes", "test_classes", "dim", "class_sep", "within_std",
                    "per_class"});
        SyntheticConfig cfg;
        if (s.contains("train_classes")) cfg.train_classes = s["train_classes"].get<int>();
        if (s.contains("test_classes")) cfg.test_classes = s["test_classes"].get<int>();
        if (s.contains("dim")) cfg.dim = s["dim"].get<int>();
        if (s.contains("class_sep")) cfg.class_sep = s["class_sep"].get<double>();
        if (s.contains("within_std")) cfg.within_std = s["within_std"].get<double>();
        if (s.contains("per_class")) cfg.per_class = s["per_class"].get<int>();
        out.synthetic = cfg;
        out.csv.reset();
    }
    if (j.contains("csv")) {
        const json& c = j["csv"];
        check_keys(c, "dataset.csv", {"train_path", "test_path"});
        CsvSourceConfig cfg;
        cfg.train_path = c.at("train_path").get<std::string>();
        cfg.test_path = c.at("test_path").get<std::string>();
        out.csv = cfg;
        out.synthetic.reset();
    }
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    const json j = json::parse(json_text);
    check_keys(j, "config",
               {"dataset", "task", "shots_by_learner", "epsilons", "learners", "modes",
                "backbone", "inner", "inner_steps", "outer", "imaml", "dcl", "augmenter",
                "pools", "eval", "epochs", "runs_per_cell", "ssl_meta_batch", "seed", "out_dir",
                "record_wall_time"});

    ExperimentConfig cfg;
    if (j.contains("dataset")) parse_dataset(j["dataset"], cfg.dataset);
    if (j.contains("task")) {
        const json& t = j["task"];
        check_keys(t, "task", {"ways", "shots", "query_shots"});
        if (t.contains("ways")) cfg.task.ways = t["ways"].get<int>();
        if (t.contains("shots")) cfg.task.shots = t["shots"].get<int>();
        if (t.contains("query_shots")) cfg.task.query_shots = t["query_shots"].get<int>();
    }
    if (j.contains("shots_by_learner")) {
        for (auto it = j["shots_by_learner"].begin(); it != j["shots_by_learner"].end(); ++it)
            cfg.shots_by_learner[learner_from_string(it.key())] = it.value().get<int>();
    }
    if (j.contains("epsilons")) cfg.epsilons = j["epsilons"].get<std::vector<double>>();
    if (j.contains("learners")) {
        cfg.learners.clear();
        for (const auto& s : j["learners"]) cfg.learners.push_back(learner_from_string(s.get<std::string>()));
    }
    if (j.contains("modes")) {
        cfg.modes.clear();
        for (const auto& s : j["modes"]) cfg.modes.push_back(sampler_from_string(s.get<std::string>()));
    }
    if (j.contains("backbone")) {
        const json& b = j["backbone"];
        check_keys(b, "backbone", {"hidden", "embedding", "activation"});
        if (b.contains("hidden")) cfg.backbone.hidden = b["hidden"].get<std::vector<int>>();
        if (b.contains("embedding")) cfg.backbone.embedding = b["embedding"].get<int>();
        if (b.contains("activation"))
            cfg.backbone.activation = activation_from_string(b["activation"].get<std::string>());
    }
    if (j.contains("inner")) {
        const json& i = j["inner"];
        check_keys(i, "inner", {"lr", "clr_lr", "batman_v"});
        if (i.contains("lr")) cfg.inner.lr = i["lr"].get<double>();
        if (i.contains("clr_lr")) cfg.inner_clr_lr = i["clr_lr"].get<double>();
        if (i.contains("batman_v")) cfg.inner.batman_v = i["batman_v"].get<int>();
    }
    if (j.contains("inner_steps")) {
        for (auto it = j["inner_steps"].begin(); it != j["inner_steps"].end(); ++it)
            cfg.inner_steps[learner_from_string(it.key())] = it.value().get<int>();
    }
    if (j.contains("outer")) {
        const json& o = j["outer"];
        check_keys(o, "outer", {"lr", "clr_lr", "meta_batch", "query_v"});
        if (o.contains("lr")) cfg.outer.lr = o["lr"].get<double>();
        if (o.contains("clr_lr")) cfg.outer_clr_lr = o["clr_lr"].get<double>();
        if (o.contains("meta_batch")) cfg.outer.meta_batch = o["meta_batch"].get<int>();
        if (o.contains("query_v")) cfg.outer.query_v = o["query_v"].get<int>();
    }
    if (j.contains("imaml")) {
        const json& m = j["imaml"];
        check_keys(m, "imaml", {"lambda", "cg_iters", "hvp_h"});
        if (m.contains("lambda")) cfg.imaml.lambda = m["lambda"].get<double>();
        if (m.contains("cg_iters")) cfg.imaml.cg_iters = m["cg_iters"].get<int>();
        if (m.contains("hvp_h")) cfg.imaml.hvp_h = m["hvp_h"].get<double>();
    }
    if (j.contains("dcl")) {
        const json& d = j["dcl"];
        check_keys(d, "dcl", {"tau", "normalize"});
        if (d.contains("tau")) cfg.dcl.tau = d["tau"].get<double>();
        if (d.contains("normalize")) cfg.dcl.normalize = d["normalize"].get<bool>();
    }
    if (j.contains("augmenter")) {
        const json& a = j["augmenter"];
        check_keys(a, "augmenter", {"kind", "jitter_std", "scale"});
        if (a.contains("kind"))
            cfg.augmenter.kind = augmenter_from_string(a["kind"].get<std::string>());
        if (a.contains("jitter_std")) cfg.augmenter.jitter_std = a["jitter_std"].get<double>();
        if (a.contains("scale")) {
            const auto range = a["scale"].get<std::vector<double>>();
            if (range.size() != 2)
                throw std::runtime_error("config: augmenter.scale must be [lo, hi]");
            cfg.augmenter.scale_lo = range[0];
            cfg.augmenter.scale_hi = range[1];
        }
    }
    if (j.contains("pools")) {
        const json& p = j["pools"];
        check_keys(p, "pools", {"support_augs", "query_augs"});
        if (p.contains("support_augs")) cfg.pools.support_augs = p["support_augs"].get<int>();
        if (p.contains("query_augs")) cfg.pools.query_augs = p["query_augs"].get<int>();
    }
    if (j.contains("eval")) {
        const json& e = j["eval"];
        check_keys(e, "eval", {"num_tasks", "finetune_steps", "finetune_lr", "runs"});
        if (e.contains("num_tasks")) cfg.eval.num_tasks = e["num_tasks"].get<int>();
        if (e.contains("finetune_steps")) cfg.eval.finetune_steps = e["finetune_steps"].get<int>();
        if (e.contains("finetune_lr")) cfg.eval.finetune_lr = e["finetune_lr"].get<double>();
        if (e.contains("runs")) cfg.eval.runs = e["runs"].get<int>();
    }
    if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int>();
    if (j.contains("runs_per_cell")) cfg.runs_per_cell = j["runs_per_cell"].get<int>();
    if (j.contains("ssl_meta_batch")) cfg.ssl_meta_batch = j["ssl_meta_batch"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("record_wall_time")) cfg.record_wall_time = j["record_wall_time"].get<bool>();

    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_experiment_config(ss.str());
}

std::pair<SplitDataset, SplitDataset> build_datasets(const ExperimentConfig& cfg) {
    SplitDataset train, test;
    if (cfg.dataset.synthetic) {
        const SyntheticConfig& s = *cfg.dataset.synthetic;
        train = generate_synthetic(s.train_classes, s.dim, s.class_sep, s.within_std,
                                   s.per_class, rng::derive(cfg.seed, rng::stream::data, 0),
                                   Split::train, 1);
        test = generate_synthetic(s.test_classes, s.dim, s.class_sep, s.within_std, s.per_class,
                                  rng::derive(cfg.seed, rng::stream::data, 1), Split::test,
                                  s.train_classes + 1);
    } else {
        train = load_csv_dataset(cfg.dataset.csv->train_path, Split::train);
        test = load_csv_dataset(cfg.dataset.csv->test_path, Split::test);
        for (const auto& [id, pool] : test.classes)
            if (train.classes.count(id))
                throw std::runtime_error("build_datasets: class id " + std::to_string(id) +
                                         " appears in both splits");
    }
    if (train.dim() != test.dim())
        throw std::runtime_error("build_datasets: train/test feature dims differ");
    return {std::move(train), std::move(test)};
}

std::uint64_t cell_seed(std::uint64_t root, std::size_t learner_idx, std::size_t mode_idx,
                        std::size_t eps_idx, std::size_t run_idx) {
    return rng::derive(root, rng::stream::cell, learner_idx, mode_idx, eps_idx, run_idx);
}

NetworkSpec make_network_spec(const ExperimentConfig& cfg, std::size_t input_dim,
                              SamplerMode mode) {
    NetworkSpec spec;
    spec.layer_widths.push_back(input_dim);
    for (int h : cfg.backbone.hidden) spec.layer_widths.push_back(static_cast<std::size_t>(h));
    spec.layer_widths.push_back(static_cast<std::size_t>(cfg.backbone.embedding));
    spec.activation = cfg.backbone.activation;
    if (mode == SamplerMode::supervised || mode == SamplerMode::ssl)
        spec.head_width = static_cast<std::size_t>(cfg.task.ways);
    return spec;
}

TrainSetup make_train_setup(const ExperimentConfig& cfg, LearnerKind learner, SamplerMode mode) {
    TrainSetup s;
    s.learner = learner;
    s.sampler = mode;
    s.task_spec = cfg.task;
    s.task_spec.shots = cfg.shots_for(learner);
    s.inner = cfg.inner;
    s.inner.steps = cfg.steps_for(learner);
    s.inner.zero_out_head = learner == LearnerKind::fomaml_zo;  // no-op without a head
    s.outer = cfg.outer;
    const bool contrastive =
        mode == SamplerMode::man || mode == SamplerMode::batman || mode == SamplerMode::rand;
    if (contrastive && cfg.inner_clr_lr > 0.0) s.inner.lr = cfg.inner_clr_lr;
    if (contrastive && cfg.outer_clr_lr > 0.0) s.outer.lr = cfg.outer_clr_lr;
    if (mode == SamplerMode::ssl) s.outer.meta_batch = cfg.ssl_meta_batch;
    s.imaml = cfg.imaml;
    s.dcl = cfg.dcl;
    s.augmenter = cfg.augmenter;
    s.pools = cfg.pools;
    return resolve_setup(s);
}

std::pair<ParamVector, NetworkSpec> train_cell(const ExperimentConfig& cfg,
                                               const SplitDataset& train_data,
                                               LearnerKind learner, SamplerMode mode,
                                               double epsilon, std::uint64_t seed) {
    const SplitDataset noisy =
        inject_symmetric_noise(train_data, {epsilon, rng::derive(seed, rng::stream::noise)});
    const NetworkSpec spec = make_network_spec(cfg, train_data.dim(), mode);
    const TrainSetup setup = make_train_setup(cfg, learner, mode);
    ParamVector theta =
        meta_train(noisy, spec, setup, cfg.epochs, rng::derive(seed, rng::stream::train));
    return {std::move(theta), spec};
}

namespace {

void check_test_split_clean(const SplitDataset& test) {
    for (const auto& [id, pool] : test.classes)
        for (const LabeledExample& e : pool)
            if (e.label != e.ground_truth)
                throw std::logic_error("run_sweep: test split carries corrupted labels");
}

}  // namespace

std::vector<ResultRow> run_sweep(const ExperimentConfig& cfg,
                                 const std::function<void(const ResultRow&)>& on_row) {
    cfg.validate();
    const auto [train, test] = build_datasets(cfg);
    check_test_split_clean(test);

    std::vector<ResultRow> rows;
    for (std::size_t li = 0; li < cfg.learners.size(); ++li) {
        for (std::size_t mi = 0; mi < cfg.modes.size(); ++mi) {
            for (std::size_t ei = 0; ei < cfg.epsilons.size(); ++ei) {
                for (int run = 0; run < cfg.runs_per_cell; ++run) {
                    const LearnerKind learner = cfg.learners[li];
                    const SamplerMode mode = cfg.modes[mi];
                    const double eps = cfg.epsilons[ei];
                    ResultRow row;
                    row.learner = to_string(learner);
                    row.mode = to_string(mode);
                    row.epsilon = eps;
                    row.seed = cell_seed(cfg.seed, li, mi, ei, run);

                    const auto t0 = std::chrono::steady_clock::now();
                    try {
                        auto [theta, spec] = train_cell(cfg, train, learner, mode, eps, row.seed);
                        TaskSpec eval_task = cfg.task;
                        eval_task.shots = cfg.shots_for(learner);
                        const EvalMode eval_mode =
                            spec.has_head() ? EvalMode::as_is : EvalMode::zero_head;
                        // learners that adapt from a zeroed head are tested the same way
                        if (spec.has_head() &&
                            make_train_setup(cfg, learner, mode).inner.zero_out_head)
                            zero_existing_head(theta, spec);
                        const EvalResult res =
                            evaluate(theta, spec, test, eval_task, cfg.eval, eval_mode,
                                     rng::derive(row.seed, rng::stream::eval));
                        row.mean_accuracy = res.mean_accuracy;
                        row.ci95 = res.ci95;
                    } catch (const std::exception& e) {
                        row.failed = true;
                        row.error = e.what();
                        row.mean_accuracy = std::nan("");
                        row.ci95 = std::nan("");
                    }
                    if (cfg.record_wall_time) {
                        const auto t1 = std::chrono::steady_clock::now();
                        row.wall_time_seconds =
                            std::chrono::duration<double>(t1 - t0).count();
                    }
                    if (on_row) on_row(row);
                    rows.push_back(std::move(row));
                }
            }
        }
    }
    check_test_split_clean(test);
    return rows;
}

namespace {

constexpr char kMagic[8] = {'F', 'S', 'M', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

struct Fnv1a {
    std::uint64_t hash = 14695981039346656037ULL;
    void feed(const void* data, std::size_t n) {
        const unsigned char* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            hash ^= p[i];
            hash *= 1099511628211ULL;
        }
    }
};

void put_bytes(std::ostream& out, Fnv1a& sum, const void* data, std::size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    sum.feed(data, n);
}

template <typename T>
void put(std::ostream& out, Fnv1a& sum, T value) {
    put_bytes(out, sum, &value, sizeof value);
}

void take_bytes(std::istream& in, Fnv1a& sum, void* data, std::size_t n) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (!in) throw CheckpointCorruptError("checkpoint: truncated file");
    sum.feed(data, n);
}

template <typename T>
T take(std::istream& in, Fnv1a& sum) {
    T value;
    take_bytes(in, sum, &value, sizeof value);
    return value;
}

}  // namespace

void save_checkpoint(const ParamVector& params, const NetworkSpec& spec,
                     const std::string& path) {
    const ParamLayout layout = ParamLayout::of(spec);
    if (params.size() != layout.total)
        throw CheckpointShapeError("checkpoint: parameter count does not match spec");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");

    Fnv1a sum;
    out.write(kMagic, sizeof kMagic);
    put(out, sum, kCheckpointVersion);
    put(out, sum, static_cast<std::uint8_t>(spec.activation == Activation::relu ? 0 : 1));
    put(out, sum, static_cast<std::uint8_t>(spec.has_head() ? 1 : 0));
    put(out, sum, static_cast<std::uint32_t>(spec.layer_widths.size()));
    for (std::size_t w : spec.layer_widths) put(out, sum, static_cast<std::uint64_t>(w));
    if (spec.has_head()) put(out, sum, static_cast<std::uint64_t>(*spec.head_width));
    put(out, sum, static_cast<std::uint64_t>(params.size()));
    for (double v : params) put(out, sum, v);
    out.write(reinterpret_cast<const char*>(&sum.hash), sizeof sum.hash);
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::pair<ParamVector, NetworkSpec> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointCorruptError("checkpoint: cannot open " + path);

    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw CheckpointCorruptError("checkpoint: " + path + " is not a checkpoint file");

    Fnv1a sum;
    const auto version = take<std::uint32_t>(in, sum);
    if (version != kCheckpointVersion)
        throw CheckpointVersionError("checkpoint: format version " + std::to_string(version) +
                                     ", expected " + std::to_string(kCheckpointVersion));

    NetworkSpec spec;
    spec.activation = take<std::uint8_t>(in, sum) == 0 ? Activation::relu : Activation::tanh;
    const bool has_head = take<std::uint8_t>(in, sum) != 0;
    const auto n_widths = take<std::uint32_t>(in, sum);
    if (n_widths < 2 || n_widths > 1024)
        throw CheckpointCorruptError("checkpoint: implausible layer count");
    for (std::uint32_t i = 0; i < n_widths; ++i)
        spec.layer_widths.push_back(static_cast<std::size_t>(take<std::uint64_t>(in, sum)));
    if (has_head) spec.head_width = static_cast<std::size_t>(take<std::uint64_t>(in, sum));

    ParamLayout layout;
    try {
        layout = ParamLayout::of(spec);
    } catch (const std::invalid_argument& e) {
        throw CheckpointCorruptError(std::string("checkpoint: bad network spec: ") + e.what());
    }
    const auto count = take<std::uint64_t>(in, sum);
    if (count != layout.total)
        throw CheckpointCorruptError("checkpoint: parameter count does not match its spec");

    ParamVector params(count);
    for (std::uint64_t i = 0; i < count; ++i) params[i] = take<double>(in, sum);

    std::uint64_t stored = 0;
    in.read(reinterpret_cast<char*>(&stored), sizeof stored);
    if (!in || stored != sum.hash)
        throw CheckpointCorruptError("checkpoint: checksum mismatch");
    return {std::move(params), std::move(spec)};
}

std::pair<ParamVector, NetworkSpec> load_checkpoint(const std::string& path,
                                                    const NetworkSpec& expected) {
    auto loaded = load_checkpoint(path);
    if (!(loaded.second == expected))
        throw CheckpointShapeError("checkpoint: stored network shape does not match expectation");
    return loaded;
}

namespace {

std::string real6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

double round6(double v) { return std::nearbyint(v * 1e6) / 1e6; }

}  // namespace

std::string format_results(const std::vector<ResultRow>& rows, EmitFormat format) {
    if (format == EmitFormat::csv) {
        std::string out = "learner,mode,epsilon,mean_accuracy,ci95,seed,wall_time_seconds\n";
        for (const ResultRow& r : rows) {
            out += r.learner;
            out += ',';
            out += r.mode;
            out += ',';
            out += real6(r.epsilon);
            out += ',';
            out += real6(r.mean_accuracy);
            out += ',';
            out += real6(r.ci95);
            out += ',';
            out += std::to_string(r.seed);
            out += ',';
            out += real6(r.wall_time_seconds);
            out += '\n';
        }
        return out;
    }
    json arr = json::array();
    for (const ResultRow& r : rows) {
        json o;
        o["learner"] = r.learner;
        o["mode"] = r.mode;
        o["epsilon"] = round6(r.epsilon);
        o["mean_accuracy"] = round6(r.mean_accuracy);  // NaN rows serialize as null
        o["ci95"] = round6(r.ci95);
        o["seed"] = r.seed;
        o["wall_time_seconds"] = round6(r.wall_time_seconds);
        arr.push_back(std::move(o));
    }
    return arr.dump(2) + "\n";
}

void emit_results(const std::vector<ResultRow>& rows, EmitFormat format,
                  const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("emit_results: cannot open " + path);
    out << format_results(rows, format);
    if (!out) throw std::runtime_error("emit_results: write failed for " + path);
}

}  // namespace fsml
