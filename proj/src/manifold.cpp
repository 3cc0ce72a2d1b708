#include "fsml/manifold.hpp"

#include <stdexcept>
#include <string>

namespace fsml {

std::vector<double> augment(const Augmenter& aug, const std::vector<double>& x, rng::Rng& gen) {
    if (aug.kind == AugmenterKind::identity) return x;
    if (aug.scale_hi < aug.scale_lo)
        throw std::invalid_argument("augment: empty scale range");
    const double s = gen.uniform(aug.scale_lo, aug.scale_hi);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = s * x[i] + aug.jitter_std * gen.normal();
    return out;
}

std::vector<double> augment(const Augmenter& aug, const std::vector<double>& x,
                            std::uint64_t seed) {
    rng::Rng gen(rng::derive(seed, rng::stream::augment));
    return augment(aug, x, gen);
}

AugmentationPool build_augmentation_pool(const std::vector<LabeledExample>& examples,
                                         int augs_per_source, const Augmenter& aug,
                                         std::uint64_t seed) {
    if (augs_per_source < 2)
        throw std::invalid_argument("build_augmentation_pool: need at least two per source");
    AugmentationPool pool;
    pool.augs_per_source = augs_per_source;
    for (const LabeledExample& e : examples) {
        // per-source stream: pool content does not depend on example order
        rng::Rng gen(rng::derive(seed, rng::stream::pool,
                                 static_cast<std::uint64_t>(e.source_id)));
        auto& augs = pool.per_source[e.source_id];
        augs.reserve(augs_per_source);
        for (int k = 0; k < augs_per_source; ++k) augs.push_back(augment(aug, e.features, gen));
    }
    return pool;
}

ManifoldSource ManifoldSource::from_examples(const std::vector<LabeledExample>& examples,
                                             int ways) {
    if (ways < 1) throw std::invalid_argument("ManifoldSource: ways must be positive");
    ManifoldSource src;
    src.by_way.resize(ways);
    for (const LabeledExample& e : examples) {
        if (e.label < 1 || e.label > ways)
            throw std::invalid_argument("ManifoldSource: label " + std::to_string(e.label) +
                                        " outside 1.." + std::to_string(ways));
        SourceExample s{e.source_id, e.features};
        src.by_way[e.label - 1].push_back(s);
        src.all.push_back(std::move(s));
    }
    return src;
}

namespace {

// two augmented views of one source: distinct pool members when a pool is
// attached, fresh draws otherwise
std::pair<std::vector<double>, std::vector<double>> two_views(const ManifoldSource& source,
                                                              const SourceExample& ex,
                                                              const Augmenter& aug,
                                                              rng::Rng& gen) {
    if (source.pool) {
        const auto it = source.pool->per_source.find(ex.source_id);
        if (it == source.pool->per_source.end())
            throw std::invalid_argument("man_sample: source " + std::to_string(ex.source_id) +
                                        " missing from augmentation pool");
        const auto& augs = it->second;
        if (augs.size() < 2)
            throw std::invalid_argument("man_sample: augmentation pool needs two entries");
        std::vector<std::size_t> pick = gen.sample_indices(augs.size(), 2);
        return {augs[pick[0]], augs[pick[1]]};
    }
    std::vector<double> a = augment(aug, ex.features, gen);
    std::vector<double> b = augment(aug, ex.features, gen);
    return {std::move(a), std::move(b)};
}

ManifoldSample assemble(const std::vector<const SourceExample*>& picks,
                        const ManifoldSource& source, const Augmenter& aug, rng::Rng& gen) {
    ManifoldSample sample;
    const int ways = static_cast<int>(picks.size());
    sample.examples.reserve(2 * ways);
    for (int j = 0; j < ways; ++j) {
        auto [a, b] = two_views(source, *picks[j], aug, gen);
        sample.examples.push_back({std::move(a), j + 1});
        sample.examples.push_back({std::move(b), j + 1});
        sample.pairing.emplace_back(2 * j, 2 * j + 1);
        sample.sources.push_back(picks[j]->source_id);
    }
    return sample;
}

}  // namespace

ManifoldSample man_sample(const ManifoldSource& source, int ways, const Augmenter& aug,
                          std::uint64_t seed) {
    if (ways < 1) throw std::invalid_argument("man_sample: ways must be positive");
    if (static_cast<int>(source.by_way.size()) < ways)
        throw std::invalid_argument("man_sample: source covers " +
                                    std::to_string(source.by_way.size()) + " ways, need " +
                                    std::to_string(ways));
    rng::Rng gen(rng::derive(seed, rng::stream::manifold));
    std::vector<const SourceExample*> picks;
    picks.reserve(ways);
    for (int j = 0; j < ways; ++j) {
        const auto& pool = source.by_way[j];
        if (pool.empty())
            throw std::invalid_argument("man_sample: no examples with label " +
                                        std::to_string(j + 1));
        picks.push_back(&pool[gen.index(pool.size())]);
    }
    return assemble(picks, source, aug, gen);
}

ManBatch batman_sample(const ManifoldSource& source, int ways, int batch, const Augmenter& aug,
                       std::uint64_t seed) {
    if (batch < 1) throw std::invalid_argument("batman_sample: batch must be positive");
    ManBatch out;
    out.samples.reserve(batch);
    for (int i = 0; i < batch; ++i)
        out.samples.push_back(
            man_sample(source, ways, aug, rng::derive(seed, rng::stream::manifold, i)));
    return out;
}

ManifoldSample rand_manifold_sample(const ManifoldSource& source, int ways, const Augmenter& aug,
                                    std::uint64_t seed) {
    if (ways < 1) throw std::invalid_argument("rand_manifold_sample: ways must be positive");
    if (source.all.size() < static_cast<std::size_t>(ways))
        throw std::invalid_argument("rand_manifold_sample: source has " +
                                    std::to_string(source.all.size()) + " examples, need " +
                                    std::to_string(ways));
    rng::Rng gen(rng::derive(seed, rng::stream::manifold));
    std::vector<const SourceExample*> picks;
    picks.reserve(ways);
    for (std::size_t idx : gen.sample_indices(source.all.size(), ways))
        picks.push_back(&source.all[idx]);
    return assemble(picks, source, aug, gen);
}

ManBatch rand_manifold_batch(const ManifoldSource& source, int ways, int batch,
                             const Augmenter& aug, std::uint64_t seed) {
    if (batch < 1) throw std::invalid_argument("rand_manifold_batch: batch must be positive");
    ManBatch out;
    out.samples.reserve(batch);
    for (int i = 0; i < batch; ++i)
        out.samples.push_back(
            rand_manifold_sample(source, ways, aug, rng::derive(seed, rng::stream::manifold, i)));
    return out;
}

Task make_ssl_task(const SplitDataset& data, int ways, int shots, int query_shots,
                   const Augmenter& aug, std::uint64_t seed) {
    if (ways < 1 || shots < 1 || query_shots < 0)
        throw std::invalid_argument("make_ssl_task: bad task shape");
    std::vector<const LabeledExample*> all;
    for (const auto& [id, pool] : data.classes)
        for (const LabeledExample& e : pool) all.push_back(&e);
    if (all.size() < static_cast<std::size_t>(ways))
        throw std::invalid_argument("make_ssl_task: dataset has " + std::to_string(all.size()) +
                                    " examples, need " + std::to_string(ways));

    rng::Rng gen(rng::derive(seed, rng::stream::task));
    std::vector<std::size_t> picks = gen.sample_indices(all.size(), ways);

    // augmentation-built task: labels are positional pseudo labels, so there
    // are no way ids to record
    Task task;
    for (int j = 0; j < ways; ++j) {
        const LabeledExample& src = *all[picks[j]];
        for (int k = 0; k < shots + query_shots; ++k) {
            LabeledExample e;
            e.features = augment(aug, src.features, gen);
            e.label = j + 1;
            e.ground_truth = src.ground_truth;
            e.source_id = src.source_id;
            (k < shots ? task.support : task.query).push_back(std::move(e));
        }
    }
    return task;
}

}  // namespace fsml
