#include "fsml/episodes.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fsml/rng.hpp"

namespace fsml {

std::vector<int> SplitDataset::class_ids() const {
    std::vector<int> ids;
    ids.reserve(classes.size());
    for (const auto& [id, pool] : classes) ids.push_back(id);
    return ids;
}

std::size_t SplitDataset::total_examples() const {
    std::size_t n = 0;
    for (const auto& [id, pool] : classes) n += pool.size();
    return n;
}

std::size_t SplitDataset::dim() const {
    for (const auto& [id, pool] : classes)
        if (!pool.empty()) return pool.front().features.size();
    return 0;
}

void TaskSpec::validate() const {
    if (ways < 1) throw std::invalid_argument("TaskSpec: ways must be positive");
    if (shots < 1) throw std::invalid_argument("TaskSpec: shots must be positive");
    if (query_shots < 0) throw std::invalid_argument("TaskSpec: query_shots must be >= 0");
}

namespace {

// round-to-nearest with ties to even, matching the default FP rounding mode
std::size_t round_half_even(double x) {
    return static_cast<std::size_t>(std::nearbyint(x));
}

}  // namespace

SplitDataset inject_symmetric_noise(const SplitDataset& data, const NoiseSpec& noise) {
    if (noise.epsilon < 0.0 || noise.epsilon > 1.0)
        throw std::invalid_argument("inject_symmetric_noise: epsilon must be in [0, 1]");
    if (noise.epsilon == 0.0) return data;
    if (data.classes.size() < 2)
        throw std::invalid_argument(
            "inject_symmetric_noise: need at least two classes to corrupt labels");

    const std::vector<int> ids = data.class_ids();
    rng::Rng gen(rng::derive(noise.seed, rng::stream::noise));

    SplitDataset out;
    out.split = data.split;
    for (int id : ids) out.classes[id] = {};

    // per original class: keep or relabel each member, in pool order
    for (std::size_t rank = 0; rank < ids.size(); ++rank) {
        const int id = ids[rank];
        const auto& pool = data.classes.at(id);
        const std::size_t n = pool.size();
        const std::size_t corrupt = round_half_even(noise.epsilon * static_cast<double>(n));
        std::vector<int> new_label(n, id);
        for (std::size_t v : gen.sample_indices(n, corrupt)) {
            // uniform over the other classes of this split
            const std::size_t pick = gen.index(ids.size() - 1);
            new_label[v] = ids[pick < rank ? pick : pick + 1];
        }
        for (std::size_t i = 0; i < n; ++i) {
            LabeledExample e = pool[i];
            e.label = new_label[i];
            out.classes[new_label[i]].push_back(std::move(e));
        }
    }
    return out;
}

Task sample_task(const SplitDataset& data, const TaskSpec& spec, std::uint64_t seed) {
    spec.validate();
    const std::size_t need = static_cast<std::size_t>(spec.shots + spec.query_shots);
    std::vector<int> eligible;
    for (const auto& [id, pool] : data.classes)
        if (pool.size() >= need) eligible.push_back(id);
    if (eligible.size() < static_cast<std::size_t>(spec.ways))
        throw std::invalid_argument("sample_task: only " + std::to_string(eligible.size()) +
                                    " classes have " + std::to_string(need) +
                                    " examples, need " + std::to_string(spec.ways));

    rng::Rng gen(rng::derive(seed, rng::stream::task));
    Task task;
    for (std::size_t pick : gen.sample_indices(eligible.size(), spec.ways))
        task.way_ids.push_back(eligible[pick]);

    for (int w = 0; w < spec.ways; ++w) {
        const auto& pool = data.classes.at(task.way_ids[w]);
        std::vector<std::size_t> chosen = gen.sample_indices(pool.size(), need);
        for (std::size_t k = 0; k < need; ++k) {
            LabeledExample e = pool[chosen[k]];
            e.label = w + 1;
            (k < static_cast<std::size_t>(spec.shots) ? task.support : task.query)
                .push_back(std::move(e));
        }
    }
    return task;
}

SplitDataset generate_synthetic(int num_classes, int dim, double class_sep, double within_std,
                                int per_class, std::uint64_t seed, Split split,
                                int first_class_id) {
    if (num_classes < 1) throw std::invalid_argument("generate_synthetic: num_classes < 1");
    if (dim < 1) throw std::invalid_argument("generate_synthetic: dim < 1");
    if (per_class < 1) throw std::invalid_argument("generate_synthetic: per_class < 1");
    if (class_sep < 0.0 || within_std < 0.0)
        throw std::invalid_argument("generate_synthetic: negative scale");

    rng::Rng gen(rng::derive(seed, rng::stream::data));
    SplitDataset out;
    out.split = split;
    std::int64_t next_source = 0;
    for (int c = 0; c < num_classes; ++c) {
        const int id = first_class_id + c;
        std::vector<double> mean(dim);
        for (double& m : mean) m = gen.uniform(0.0, class_sep);
        auto& pool = out.classes[id];
        for (int k = 0; k < per_class; ++k) {
            LabeledExample e;
            e.features.resize(dim);
            for (int d = 0; d < dim; ++d) e.features[d] = mean[d] + within_std * gen.normal();
            e.label = id;
            e.ground_truth = id;
            e.source_id = next_source++;
            pool.push_back(std::move(e));
        }
    }
    return out;
}

namespace {

double parse_real(const std::string& field, std::size_t row) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw std::runtime_error("csv row " + std::to_string(row) + ": bad real '" + field + "'");
    return value;
}

int parse_label(const std::string& field, std::size_t row) {
    int value = 0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw std::runtime_error("csv row " + std::to_string(row) + ": bad label '" + field +
                                 "'");
    return value;
}

}  // namespace

SplitDataset load_csv_dataset(const std::string& path, Split split) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv_dataset: cannot open " + path);

    SplitDataset out;
    out.split = split;
    std::string line;
    std::size_t row = 0;
    std::size_t arity = 0;
    std::int64_t next_source = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (line.back() == ',') fields.push_back("");
        if (fields.size() < 2)
            throw std::runtime_error("csv row " + std::to_string(row) +
                                     ": need a label and at least one feature");
        if (arity == 0) arity = fields.size();
        if (fields.size() != arity)
            throw std::runtime_error("csv row " + std::to_string(row) + ": expected " +
                                     std::to_string(arity) + " fields, got " +
                                     std::to_string(fields.size()));
        LabeledExample e;
        e.label = parse_label(fields[0], row);
        e.ground_truth = e.label;
        e.source_id = next_source++;
        e.features.reserve(arity - 1);
        for (std::size_t i = 1; i < arity; ++i) e.features.push_back(parse_real(fields[i], row));
        out.classes[e.label].push_back(std::move(e));
    }
    if (out.classes.empty()) throw std::runtime_error("load_csv_dataset: " + path + " is empty");
    return out;
}

void save_csv_dataset(const SplitDataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_csv_dataset: cannot open " + path);
    char buf[64];
    for (const auto& [id, pool] : data.classes) {
        for (const LabeledExample& e : pool) {
            out << e.label;
            for (double f : e.features) {
                std::snprintf(buf, sizeof buf, "%.17g", f);
                out << ',' << buf;
            }
            out << '\n';
        }
    }
    if (!out) throw std::runtime_error("save_csv_dataset: write failed for " + path);
}

BatchView make_batch(const std::vector<LabeledExample>& examples) {
    BatchView view;
    if (examples.empty()) return view;
    view.x = Matrix(examples.size(), examples.front().features.size());
    view.labels.reserve(examples.size());
    for (std::size_t r = 0; r < examples.size(); ++r) {
        if (examples[r].features.size() != view.x.cols)
            throw std::invalid_argument("make_batch: inconsistent feature dims");
        for (std::size_t c = 0; c < view.x.cols; ++c) view.x[r][c] = examples[r].features[c];
        view.labels.push_back(examples[r].label - 1);  // task labels are 1..N
    }
    return view;
}

}  // namespace fsml
