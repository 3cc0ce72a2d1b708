#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

#include "fsml/episodes.hpp"
#include "fsml/rng.hpp"

using namespace fsml;

namespace {

// dataset with prescribed pool sizes; class c gets sizes[c] examples
SplitDataset sized_dataset(const std::vector<int>& sizes, int dim = 3) {
    SplitDataset data;
    std::int64_t sid = 0;
    for (std::size_t c = 0; c < sizes.size(); ++c) {
        const int label = static_cast<int>(c) + 1;
        for (int i = 0; i < sizes[c]; ++i) {
            LabeledExample e;
            e.features.assign(dim, static_cast<double>(label));
            e.label = label;
            e.ground_truth = label;
            e.source_id = sid++;
            data.classes[label].push_back(e);
        }
    }
    return data;
}

std::map<int, int> corrupted_per_truth_class(const SplitDataset& data) {
    std::map<int, int> corrupted;
    for (const auto& [label, pool] : data.classes)
        for (const LabeledExample& e : pool) {
            corrupted.try_emplace(e.ground_truth, 0);
            if (e.label != e.ground_truth) ++corrupted[e.ground_truth];
        }
    return corrupted;
}

}  // namespace

TEST_CASE("synthetic generation shape and determinism") {
    const SplitDataset d = generate_synthetic(6, 4, 3.0, 1.0, 10, 99);
    CHECK(d.split == Split::train);
    CHECK(d.num_classes() == 6);
    CHECK(d.dim() == 4);
    CHECK(d.total_examples() == 60);
    CHECK(d.class_ids() == std::vector<int>{1, 2, 3, 4, 5, 6});

    std::set<std::int64_t> sids;
    for (const auto& [label, pool] : d.classes) {
        CHECK(pool.size() == 10);
        for (const LabeledExample& e : pool) {
            CHECK(e.label == label);
            CHECK(e.ground_truth == label);
            sids.insert(e.source_id);
        }
    }
    CHECK(sids.size() == 60);

    const SplitDataset same = generate_synthetic(6, 4, 3.0, 1.0, 10, 99);
    CHECK(same.classes.at(1)[0].features == d.classes.at(1)[0].features);
    const SplitDataset other = generate_synthetic(6, 4, 3.0, 1.0, 10, 100);
    CHECK(other.classes.at(1)[0].features != d.classes.at(1)[0].features);

    const SplitDataset shifted = generate_synthetic(3, 4, 3.0, 1.0, 5, 1, Split::test, 21);
    CHECK(shifted.split == Split::test);
    CHECK(shifted.class_ids() == std::vector<int>{21, 22, 23});
}

TEST_CASE("noise injection corrupts exact counts") {
    for (const double eps : {0.3, 0.6}) {
        const SplitDataset data = sized_dataset({7, 10, 33});
        const SplitDataset noisy = inject_symmetric_noise(data, {eps, 4242});
        CHECK(noisy.total_examples() == data.total_examples());

        const auto corrupted = corrupted_per_truth_class(noisy);
        const std::vector<int> sizes = {7, 10, 33};
        for (int c = 0; c < 3; ++c) {
            const int expected = static_cast<int>(std::nearbyint(eps * sizes[c]));
            CHECK(corrupted.at(c + 1) == expected);
        }
        for (const auto& [label, pool] : noisy.classes)
            for (const LabeledExample& e : pool) {
                CHECK(e.label == label);  // pools keyed by observed label
                if (e.label != e.ground_truth) CHECK(e.label >= 1);
            }
    }
}

TEST_CASE("noise rounds half counts to even") {
    // 0.5 * 7 = 3.5 -> 4, 0.5 * 5 = 2.5 -> 2
    const SplitDataset d7 = sized_dataset({7, 7});
    const auto c7 = corrupted_per_truth_class(inject_symmetric_noise(d7, {0.5, 1}));
    CHECK(c7.at(1) == 4);
    CHECK(c7.at(2) == 4);

    const SplitDataset d5 = sized_dataset({5, 5});
    const auto c5 = corrupted_per_truth_class(inject_symmetric_noise(d5, {0.5, 1}));
    CHECK(c5.at(1) == 2);
    CHECK(c5.at(2) == 2);
}

TEST_CASE("noise preserves ground truth and features") {
    const SplitDataset data = sized_dataset({10, 10, 10});
    const SplitDataset noisy = inject_symmetric_noise(data, {0.6, 7});

    std::map<std::int64_t, const LabeledExample*> orig;
    for (const auto& [label, pool] : data.classes)
        for (const LabeledExample& e : pool) orig[e.source_id] = &e;

    int moved = 0;
    for (const auto& [label, pool] : noisy.classes)
        for (const LabeledExample& e : pool) {
            const LabeledExample& o = *orig.at(e.source_id);
            CHECK(e.ground_truth == o.ground_truth);
            CHECK(e.features == o.features);
            if (e.label != e.ground_truth) {
                ++moved;
                CHECK(e.label != o.label);
            }
        }
    CHECK(moved == 18);
}

TEST_CASE("noise epsilon zero is the identity") {
    const SplitDataset data = sized_dataset({4, 9});
    const SplitDataset same = inject_symmetric_noise(data, {0.0, 123});
    CHECK(same.total_examples() == 13);
    for (const auto& [label, pool] : same.classes) {
        const auto& ref = data.classes.at(label);
        CHECK(pool.size() == ref.size());
        for (std::size_t i = 0; i < pool.size(); ++i) {
            CHECK(pool[i].label == ref[i].label);
            CHECK(pool[i].features == ref[i].features);
        }
    }
}

TEST_CASE("noise rejects bad inputs") {
    const SplitDataset one = sized_dataset({8});
    CHECK_THROWS(inject_symmetric_noise(one, {0.3, 1}));
    CHECK_NOTHROW(inject_symmetric_noise(one, {0.0, 1}));
    const SplitDataset two = sized_dataset({8, 8});
    CHECK_THROWS(inject_symmetric_noise(two, {-0.1, 1}));
    CHECK_THROWS(inject_symmetric_noise(two, {1.1, 1}));
}

TEST_CASE("noise is deterministic per seed") {
    const SplitDataset data = sized_dataset({20, 20, 20});
    const SplitDataset a = inject_symmetric_noise(data, {0.3, 101});
    const SplitDataset b = inject_symmetric_noise(data, {0.3, 101});
    const SplitDataset c = inject_symmetric_noise(data, {0.3, 102});
    auto labels_of = [](const SplitDataset& d) {
        std::map<std::int64_t, int> m;
        for (const auto& [label, pool] : d.classes)
            for (const LabeledExample& e : pool) m[e.source_id] = e.label;
        return m;
    };
    CHECK(labels_of(a) == labels_of(b));
    CHECK(labels_of(a) != labels_of(c));
}

TEST_CASE("task sampling shapes and relabeling") {
    const SplitDataset data = generate_synthetic(8, 4, 3.0, 1.0, 12, 5);
    const TaskSpec spec{5, 3, 2};
    const Task task = sample_task(data, spec, 77);

    CHECK(task.ways() == 5);
    CHECK(task.support.size() == 15);
    CHECK(task.query.size() == 10);

    std::set<int> way_ids(task.way_ids.begin(), task.way_ids.end());
    CHECK(way_ids.size() == 5);
    for (int id : way_ids) CHECK(data.classes.count(id) == 1);

    std::map<int, int> support_counts, query_counts;
    for (const LabeledExample& e : task.support) ++support_counts[e.label];
    for (const LabeledExample& e : task.query) ++query_counts[e.label];
    for (int w = 1; w <= 5; ++w) {
        CHECK(support_counts[w] == 3);
        CHECK(query_counts[w] == 2);
    }

    // no example reused between support and query
    std::set<std::int64_t> used;
    for (const LabeledExample& e : task.support) used.insert(e.source_id);
    for (const LabeledExample& e : task.query) {
        CHECK(used.count(e.source_id) == 0);
        used.insert(e.source_id);
    }

    // relabeled ways map back to the drawn classes
    for (const LabeledExample& e : task.support)
        CHECK(task.way_ids[e.label - 1] == e.ground_truth);
}

TEST_CASE("task sampling is deterministic and validates pools") {
    const SplitDataset data = generate_synthetic(6, 3, 3.0, 1.0, 8, 9);
    const TaskSpec spec{4, 4, 4};
    const Task a = sample_task(data, spec, 3);
    const Task b = sample_task(data, spec, 3);
    CHECK(a.way_ids == b.way_ids);
    CHECK(a.support[0].features == b.support[0].features);

    const TaskSpec too_big{4, 5, 4};  // needs 9 > 8 per class
    CHECK_THROWS(sample_task(data, too_big, 3));
    const TaskSpec too_many_ways{7, 2, 2};
    CHECK_THROWS(sample_task(data, too_many_ways, 3));
}

TEST_CASE("task sampling skips thin classes") {
    SplitDataset data = sized_dataset({10, 10, 2, 10});
    const TaskSpec spec{3, 4, 3};  // needs 7 per class; class 3 has 2
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const Task t = sample_task(data, spec, seed);
        for (int id : t.way_ids) CHECK(id != 3);
    }
}

TEST_CASE("csv round trip preserves exact values") {
    const SplitDataset data = generate_synthetic(4, 5, 2.5, 0.7, 6, 31);
    const std::string path = (std::filesystem::temp_directory_path() / "fsml_ep.csv").string();
    save_csv_dataset(data, path);
    const SplitDataset back = load_csv_dataset(path, Split::train);

    CHECK(back.num_classes() == 4);
    CHECK(back.total_examples() == 24);
    CHECK(back.dim() == 5);
    auto features_sorted = [](const SplitDataset& d) {
        std::vector<std::vector<double>> rows;
        for (const auto& [label, pool] : d.classes)
            for (const LabeledExample& e : pool) {
                auto r = e.features;
                r.push_back(label);
                rows.push_back(std::move(r));
            }
        std::sort(rows.begin(), rows.end());
        return rows;
    };
    CHECK(features_sorted(back) == features_sorted(data));
    std::filesystem::remove(path);
}

TEST_CASE("csv loader rejects malformed input") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "fsml_bad.csv").string();
    auto write = [&](const std::string& text) {
        std::FILE* f = std::fopen(path.c_str(), "w");
        std::fputs(text.c_str(), f);
        std::fclose(f);
    };
    write("");
    CHECK_THROWS(load_csv_dataset(path, Split::train));
    write("1,0.5,0.5\n2,0.1\n");
    CHECK_THROWS(load_csv_dataset(path, Split::train));
    write("1,0.5,abc\n");
    CHECK_THROWS(load_csv_dataset(path, Split::train));
    CHECK_THROWS(load_csv_dataset((fs::temp_directory_path() / "missing_xyz.csv").string(),
                                  Split::train));
    fs::remove(path);
}

TEST_CASE("make_batch lowers labels to zero-based") {
    std::vector<LabeledExample> ex(4);
    for (int i = 0; i < 4; ++i) {
        ex[i].features = {double(i), double(-i)};
        ex[i].label = (i % 2) + 1;
    }
    const BatchView b = make_batch(ex);
    CHECK(b.size() == 4);
    CHECK(b.x.cols == 2);
    CHECK(b.labels == std::vector<int>{0, 1, 0, 1});
    CHECK(b.x[2][0] == 2.0);
    CHECK_FALSE(b.empty());
    CHECK(make_batch({}).empty());
}
