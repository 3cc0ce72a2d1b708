#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "fsml/kernels.hpp"

namespace fsml {

// Decoupled contrastive loss. For anchor i with partner p(i):
//   l_i = -s(i, p(i)) / tau + log sum_{k != i, k != p(i)} exp(s(i, k) / tau)
// where s is cosine similarity when normalize is set and a raw dot product
// otherwise. Negatives never leave the anchor's own manifold. The positive
// pair is excluded from the denominator, which is what decouples the loss
// from InfoNCE.
struct DclConfig {
    double tau = 0.1;
    bool normalize = true;
};

// 2N embeddings of one manifold, rows in manifold order; pairing lists the
// row-index pairs that share a source.
struct EmbeddedManifold {
    Matrix embeddings;
    std::vector<std::pair<int, int>> pairing;
};

struct NormalizeResult {
    Matrix unit;
    std::vector<std::size_t> zero_norm_rows;  // left as zero vectors, caller decides
};

NormalizeResult normalize_embeddings(const Matrix& z);

struct DclResult {
    double loss;                        // sum over manifolds of per-manifold means
    std::vector<Matrix> embedding_grads;  // exact dloss/dz per manifold
};

// Each manifold contributes the mean of its 2N anchor losses; manifolds with
// fewer than two pairs are rejected (their negative set would be empty).
DclResult dcl_loss(const std::vector<EmbeddedManifold>& manifolds, const DclConfig& cfg);

}  // namespace fsml
