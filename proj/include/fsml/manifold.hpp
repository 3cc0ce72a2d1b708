#pragma once

#include <cstdint>
#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fsml/episodes.hpp"
#include "fsml/rng.hpp"

namespace fsml {

enum class AugmenterKind { identity, gaussian_jitter_scale };

// gaussian_jitter_scale: x -> s * x + eta, with s uniform in scale_range and
// eta ~ N(0, jitter_std^2) per coordinate (one scale draw, then dim normals).
struct Augmenter {
    AugmenterKind kind = AugmenterKind::gaussian_jitter_scale;
    double jitter_std = 0.1;
    double scale_lo = 0.95;
    double scale_hi = 1.05;
};

std::vector<double> augment(const Augmenter& aug, const std::vector<double>& x,
                            std::uint64_t seed);
std::vector<double> augment(const Augmenter& aug, const std::vector<double>& x, rng::Rng& rng);

// Pre-generated augmentations keyed by source_id; samplers draw distinct
// members instead of augmenting on the fly when a pool is attached.
struct AugmentationPool {
    std::unordered_map<std::int64_t, std::vector<std::vector<double>>> per_source;
    int augs_per_source = 0;
};

AugmentationPool build_augmentation_pool(const std::vector<LabeledExample>& examples,
                                         int augs_per_source, const Augmenter& aug,
                                         std::uint64_t seed);

// Label-stratified access to source examples. Carries only (source_id,
// features); ground truth never crosses this interface.
struct SourceExample {
    std::int64_t source_id = 0;
    std::vector<double> features;
};

struct ManifoldSource {
    std::vector<std::vector<SourceExample>> by_way;  // index = pseudo label - 1
    std::vector<SourceExample> all;
    std::shared_ptr<const AugmentationPool> pool;  // optional

    static ManifoldSource from_examples(const std::vector<LabeledExample>& examples, int ways);
};

struct ManifoldEntry {
    std::vector<double> features;
    int pseudo_label = 0;  // 1..N
};

// Canonical order [1,1,2,2,...,N,N]; pairing[j-1] holds the two entry indices
// of pseudo label j, sources[j-1] the source they were augmented from.
struct ManifoldSample {
    std::vector<ManifoldEntry> examples;
    std::vector<std::pair<int, int>> pairing;
    std::vector<std::int64_t> sources;

    int ways() const { return static_cast<int>(pairing.size()); }
};

struct ManBatch {
    std::vector<ManifoldSample> samples;
};

// One source per way, two augmentations each (distinct pool members when a
// pool is attached), pseudo-labeled by way.
ManifoldSample man_sample(const ManifoldSource& source, int ways, const Augmenter& aug,
                          std::uint64_t seed);

// batch independent man samples; sample i uses derive(seed, stream::manifold, i).
ManBatch batman_sample(const ManifoldSource& source, int ways, int batch, const Augmenter& aug,
                       std::uint64_t seed);

// Ablation: N sources drawn without replacement ignoring labels entirely.
ManifoldSample rand_manifold_sample(const ManifoldSource& source, int ways, const Augmenter& aug,
                                    std::uint64_t seed);

// batch independent rand samples, same seed rule as batman_sample.
ManBatch rand_manifold_batch(const ManifoldSource& source, int ways, int batch,
                             const Augmenter& aug, std::uint64_t seed);

// Ablation: N sources drawn ignoring labels, K+Q fresh augmentations each,
// split into support/query with pseudo labels 1..N.
Task make_ssl_task(const SplitDataset& data, int ways, int shots, int query_shots,
                   const Augmenter& aug, std::uint64_t seed);

}  // namespace fsml
