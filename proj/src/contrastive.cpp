#include "fsml/contrastive.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fsml {

NormalizeResult normalize_embeddings(const Matrix& z) {
    NormalizeResult out;
    out.unit = Matrix(z.rows, z.cols);
    for (std::size_t r = 0; r < z.rows; ++r) {
        double sq = 0.0;
        for (std::size_t c = 0; c < z.cols; ++c) sq += z[r][c] * z[r][c];
        const double norm = std::sqrt(sq);
        if (norm == 0.0) {
            out.zero_norm_rows.push_back(r);
            continue;  // row stays zero; caller decides what that means
        }
        for (std::size_t c = 0; c < z.cols; ++c) out.unit[r][c] = z[r][c] / norm;
    }
    return out;
}

namespace {

// partner[i] = the index paired with i; validates the pairing as a perfect
// matching over all rows
std::vector<int> partner_map(const EmbeddedManifold& m) {
    const int n = static_cast<int>(m.embeddings.rows);
    std::vector<int> partner(n, -1);
    for (const auto& [a, b] : m.pairing) {
        if (a < 0 || b < 0 || a >= n || b >= n)
            throw std::invalid_argument("dcl_loss: pairing index out of range");
        if (a == b) throw std::invalid_argument("dcl_loss: element paired with itself");
        if (partner[a] != -1 || partner[b] != -1)
            throw std::invalid_argument("dcl_loss: element appears in two pairs");
        partner[a] = b;
        partner[b] = a;
    }
    for (int i = 0; i < n; ++i)
        if (partner[i] == -1) throw std::invalid_argument("dcl_loss: unpaired element");
    return partner;
}

}  // namespace

DclResult dcl_loss(const std::vector<EmbeddedManifold>& manifolds, const DclConfig& cfg) {
    if (cfg.tau <= 0.0) throw std::invalid_argument("dcl_loss: tau must be positive");
    if (manifolds.empty()) throw std::invalid_argument("dcl_loss: no manifolds");

    DclResult result{0.0, {}};
    result.embedding_grads.reserve(manifolds.size());

    for (const EmbeddedManifold& m : manifolds) {
        const std::size_t n = m.embeddings.rows;
        const std::size_t dim = m.embeddings.cols;
        if (m.pairing.size() < 2)
            throw std::invalid_argument(
                "dcl_loss: a manifold needs at least two pairs, the negative set is empty "
                "otherwise");
        if (n != 2 * m.pairing.size())
            throw std::invalid_argument("dcl_loss: expected " +
                                        std::to_string(2 * m.pairing.size()) +
                                        " embeddings, got " + std::to_string(n));
        const std::vector<int> partner = partner_map(m);

        // u = similarity-space embeddings; raw dot products when normalize is off
        const Matrix* u = &m.embeddings;
        NormalizeResult normed;
        if (cfg.normalize) {
            normed = normalize_embeddings(m.embeddings);
            u = &normed.unit;
        }

        Matrix sim(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) {
                double acc = 0.0;
                for (std::size_t c = 0; c < dim; ++c) acc += (*u)[i][c] * (*u)[k][c];
                sim[i][k] = acc;
            }

        const double inv_anchor = 1.0 / static_cast<double>(n);
        Matrix du(n, dim);
        double manifold_loss = 0.0;

        for (std::size_t i = 0; i < n; ++i) {
            const int pos = partner[i];
            double max_s = -HUGE_VAL;
            for (std::size_t k = 0; k < n; ++k) {
                if (k == i || static_cast<int>(k) == pos) continue;
                max_s = std::max(max_s, sim[i][k] / cfg.tau);
            }
            double denom = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                if (k == i || static_cast<int>(k) == pos) continue;
                denom += std::exp(sim[i][k] / cfg.tau - max_s);
            }
            const double lse = max_s + std::log(denom);
            manifold_loss += (-sim[i][pos] / cfg.tau + lse) * inv_anchor;

            // anchor i's loss touches u_i, its positive, and each negative
            const double w_pos = inv_anchor / cfg.tau;
            for (std::size_t c = 0; c < dim; ++c) {
                du[i][c] -= w_pos * (*u)[pos][c];
                du[pos][c] -= w_pos * (*u)[i][c];
            }
            for (std::size_t k = 0; k < n; ++k) {
                if (k == i || static_cast<int>(k) == pos) continue;
                const double w = std::exp(sim[i][k] / cfg.tau - lse) * inv_anchor / cfg.tau;
                for (std::size_t c = 0; c < dim; ++c) {
                    du[i][c] += w * (*u)[k][c];
                    du[k][c] += w * (*u)[i][c];
                }
            }
        }

        Matrix dz(n, dim);
        if (cfg.normalize) {
            // through u = z/|z|: dz = (du - (u . du) u) / |z|; zero rows stay zero
            for (std::size_t i = 0; i < n; ++i) {
                double sq = 0.0;
                for (std::size_t c = 0; c < dim; ++c) sq += m.embeddings[i][c] * m.embeddings[i][c];
                const double norm = std::sqrt(sq);
                if (norm == 0.0) continue;
                double u_dot_du = 0.0;
                for (std::size_t c = 0; c < dim; ++c) u_dot_du += (*u)[i][c] * du[i][c];
                for (std::size_t c = 0; c < dim; ++c)
                    dz[i][c] = (du[i][c] - u_dot_du * (*u)[i][c]) / norm;
            }
        } else {
            dz = du;
        }

        result.loss += manifold_loss;
        result.embedding_grads.push_back(std::move(dz));
    }
    return result;
}

}  // namespace fsml
