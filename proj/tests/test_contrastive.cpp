#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fsml/contrastive.hpp"
#include "fsml/network.hpp"
#include "fsml/rng.hpp"

using namespace fsml;

namespace {

Matrix rows_matrix(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[0].size(); ++c) m[r][c] = rows[r][c];
    return m;
}

EmbeddedManifold manifold_of(const std::vector<std::vector<double>>& rows) {
    EmbeddedManifold m;
    m.embeddings = rows_matrix(rows);
    for (std::size_t j = 0; j < rows.size() / 2; ++j)
        m.pairing.push_back({static_cast<int>(2 * j), static_cast<int>(2 * j + 1)});
    return m;
}

Matrix random_embeddings(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Matrix m(rows, cols);
    rng::Rng r(seed);
    for (double& v : m.data) v = r.normal();
    return m;
}

double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        ref += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max(std::sqrt(ref), 1e-12);
}

}  // namespace

TEST_CASE("normalize_embeddings produces unit rows and flags zeros") {
    Matrix z(3, 2);
    z[0][0] = 3.0; z[0][1] = 4.0;
    z[1][0] = 0.0; z[1][1] = 0.0;
    z[2][0] = -1.0; z[2][1] = 0.0;
    const NormalizeResult res = normalize_embeddings(z);
    CHECK(res.unit[0][0] == doctest::Approx(0.6));
    CHECK(res.unit[0][1] == doctest::Approx(0.8));
    CHECK(res.unit[2][0] == doctest::Approx(-1.0));
    CHECK(res.zero_norm_rows == std::vector<std::size_t>{1});
    CHECK(res.unit[1][0] == 0.0);
    CHECK(res.unit[1][1] == 0.0);
}

TEST_CASE("orthogonal pairs at tau=1 give loss -1+ln2") {
    // two pairs on orthogonal axes: positives at cosine 1, negatives at 0
    const EmbeddedManifold m = manifold_of({{2.0, 0.0}, {3.0, 0.0}, {0.0, 1.0}, {0.0, 5.0}});
    DclConfig cfg;
    cfg.tau = 1.0;
    cfg.normalize = true;
    const DclResult res = dcl_loss({m}, cfg);
    CHECK(res.loss == doctest::Approx(-1.0 + std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("collapsed embeddings land at ln2, not the InfoNCE ln3") {
    // every row identical: all similarities 1, so l_i = ln(2N-2) exactly
    const EmbeddedManifold m =
        manifold_of({{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}});
    DclConfig cfg;
    cfg.tau = 0.5;
    cfg.normalize = true;
    const DclResult res = dcl_loss({m}, cfg);
    CHECK(res.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(std::abs(res.loss - std::log(3.0)) > 0.4);  // InfoNCE would keep the positive
}

TEST_CASE("loss decreases when a positive pair tightens") {
    DclConfig cfg;
    auto loss_at = [&](double angle) {
        const EmbeddedManifold m = manifold_of({{1.0, 0.0},
                                                {std::cos(angle), std::sin(angle)},
                                                {0.0, 1.0},
                                                {0.1, 1.0}});
        return dcl_loss({m}, cfg).loss;
    };
    CHECK(loss_at(0.05) < loss_at(0.5));
    CHECK(loss_at(0.5) < loss_at(1.2));
}

TEST_CASE("total is the sum of per-manifold means") {
    const EmbeddedManifold a =
        manifold_of({{1.0, 0.2}, {0.9, 0.1}, {-0.5, 1.0}, {-0.4, 0.9}});
    const EmbeddedManifold b =
        manifold_of({{0.3, -1.0}, {0.2, -0.9}, {1.0, 1.0}, {0.8, 1.1}});
    DclConfig cfg;
    const double la = dcl_loss({a}, cfg).loss;
    const double lb = dcl_loss({b}, cfg).loss;
    const DclResult both = dcl_loss({a, b}, cfg);
    CHECK(both.loss == doctest::Approx(la + lb).epsilon(1e-12));
    REQUIRE(both.embedding_grads.size() == 2);

    // negatives stay within their manifold: a's gradient ignores b entirely
    const EmbeddedManifold b2 =
        manifold_of({{-0.7, 0.4}, {-0.6, 0.5}, {0.2, 0.1}, {0.3, 0.2}});
    const DclResult swapped = dcl_loss({a, b2}, cfg);
    CHECK(both.embedding_grads[0] == swapped.embedding_grads[0]);
}

TEST_CASE("gradients match finite differences") {
    for (const bool normalize : {true, false}) {
        for (const double tau : {0.1, 1.0}) {
            const std::uint64_t seed = 900 + static_cast<int>(normalize) * 10 +
                                       static_cast<int>(tau * 10);
            const std::size_t rows = 6, dim = 4;  // 3-way manifold
            const Matrix z = random_embeddings(rows, dim, seed);
            EmbeddedManifold m;
            m.embeddings = z;
            m.pairing = {{0, 1}, {2, 3}, {4, 5}};
            DclConfig cfg;
            cfg.tau = tau;
            cfg.normalize = normalize;

            const DclResult res = dcl_loss({m}, cfg);
            const LossFn f = [&](const ParamVector& flat) {
                EmbeddedManifold probe = m;
                probe.embeddings.data = flat;
                return dcl_loss({probe}, cfg).loss;
            };
            const GradientVector fd = finite_diff_grad(f, z.data, 1e-6);
            CHECK(rel_error(res.embedding_grads[0].data, fd) < 1e-5);
        }
    }
}

TEST_CASE("gradient descent on the loss separates pairs") {
    DclConfig cfg;
    cfg.tau = 0.5;
    Matrix z = random_embeddings(6, 3, 123);
    EmbeddedManifold m;
    m.embeddings = z;
    m.pairing = {{0, 1}, {2, 3}, {4, 5}};
    double before = dcl_loss({m}, cfg).loss;
    for (int step = 0; step < 50; ++step) {
        const DclResult res = dcl_loss({m}, cfg);
        for (std::size_t i = 0; i < m.embeddings.data.size(); ++i)
            m.embeddings.data[i] -= 0.1 * res.embedding_grads[0].data[i];
    }
    CHECK(dcl_loss({m}, cfg).loss < before - 0.5);
}

TEST_CASE("bad manifolds are rejected") {
    DclConfig cfg;
    // single pair: negative set would be empty
    const EmbeddedManifold one = manifold_of({{1.0, 0.0}, {0.9, 0.1}});
    CHECK_THROWS(dcl_loss({one}, cfg));

    // row count disagrees with pairing
    EmbeddedManifold ragged;
    ragged.embeddings = random_embeddings(5, 2, 3);
    ragged.pairing = {{0, 1}, {2, 3}};
    CHECK_THROWS(dcl_loss({ragged}, cfg));

    // self-pairing
    EmbeddedManifold selfp;
    selfp.embeddings = random_embeddings(4, 2, 4);
    selfp.pairing = {{0, 0}, {2, 3}};
    CHECK_THROWS(dcl_loss({selfp}, cfg));

    // an index used twice
    EmbeddedManifold dup;
    dup.embeddings = random_embeddings(4, 2, 5);
    dup.pairing = {{0, 1}, {1, 2}};
    CHECK_THROWS(dcl_loss({dup}, cfg));

    CHECK_THROWS(dcl_loss({}, cfg));
}

TEST_CASE("raw dot products skip normalization") {
    const EmbeddedManifold m =
        manifold_of({{2.0, 0.0}, {2.0, 0.0}, {0.0, 2.0}, {0.0, 2.0}});
    DclConfig cosine;
    cosine.tau = 1.0;
    DclConfig raw = cosine;
    raw.normalize = false;
    // cosine positives are 1, raw positives are 4; the losses must differ
    const double lc = dcl_loss({m}, cosine).loss;
    const double lr = dcl_loss({m}, raw).loss;
    CHECK(lc == doctest::Approx(-1.0 + std::log(2.0)).epsilon(1e-12));
    CHECK(lr == doctest::Approx(-4.0 + std::log(2.0)).epsilon(1e-12));
}
