#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fsml/kernels.hpp"

namespace fsml {

// ground_truth is immutable after creation; label is what corruption and task
// relabeling touch. Learners only ever see (features, label) views.
struct LabeledExample {
    std::vector<double> features;
    int label = 0;
    int ground_truth = 0;
    std::int64_t source_id = 0;
};

enum class Split { train, test };

struct SplitDataset {
    Split split = Split::train;
    std::map<int, std::vector<LabeledExample>> classes;  // label -> pool

    std::size_t num_classes() const { return classes.size(); }
    std::vector<int> class_ids() const;
    std::size_t total_examples() const;
    std::size_t dim() const;
};

// N-way K-shot with Q query shots per way.
struct TaskSpec {
    int ways = 5;
    int shots = 5;
    int query_shots = 15;

    void validate() const;
};

// Labels inside a task are 1..N; way_ids maps them back to the original class
// ids (empty for self-supervised tasks, which have no source classes).
struct Task {
    std::vector<LabeledExample> support;
    std::vector<LabeledExample> query;
    std::vector<int> way_ids;

    int ways() const { return static_cast<int>(way_ids.size()); }
};

struct NoiseSpec {
    double epsilon = 0.0;
    std::uint64_t seed = 0;
};

// Symmetric label noise: per class, exactly round(epsilon * pool_size)
// examples (ties to even) get a new label drawn uniformly from the other
// classes of the split and move to that pool. Ground truth is untouched.
SplitDataset inject_symmetric_noise(const SplitDataset& data, const NoiseSpec& noise);

// N distinct classes drawn uniformly among those with at least K+Q examples,
// then K+Q examples per class without replacement: first K support, next Q
// query. Labels are relabeled 1..N in draw order.
Task sample_task(const SplitDataset& data, const TaskSpec& spec, std::uint64_t seed);

// Isotropic Gaussian clusters; class means uniform in [0, class_sep]^dim.
SplitDataset generate_synthetic(int num_classes, int dim, double class_sep, double within_std,
                                int per_class, std::uint64_t seed, Split split = Split::train,
                                int first_class_id = 1);

// Rows "label,f1,...,fd", no header. source_id is the 0-based row index.
SplitDataset load_csv_dataset(const std::string& path, Split split);
void save_csv_dataset(const SplitDataset& data, const std::string& path);

// The (features, label) view handed to learners; labels are 0-based class
// indices ready for cross_entropy.
struct BatchView {
    Matrix x;
    std::vector<int> labels;

    std::size_t size() const { return x.rows; }
    bool empty() const { return x.rows == 0; }
};

BatchView make_batch(const std::vector<LabeledExample>& examples);

}  // namespace fsml
