#include "fsml/meta.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <string>

#include "fsml/exec.hpp"
#include "fsml/rng.hpp"

namespace fsml {

LossGrad ce_loss_grad(const ParamVector& params, const NetworkSpec& spec,
                      const BatchView& batch) {
    if (batch.empty()) throw std::invalid_argument("ce_loss_grad: empty batch");
    ForwardTrace trace;
    const Matrix logits = forward(params, spec, batch.x, &trace);
    CrossEntropyResult ce = cross_entropy(logits, batch.labels);
    return {ce.loss, backward(trace, ce.grad_logits)};
}

LossGrad clr_batch_loss_grad(const ParamVector& params, const NetworkSpec& spec,
                             const ManBatch& batch, const DclConfig& dcl) {
    if (batch.samples.empty()) throw std::invalid_argument("clr_batch_loss_grad: empty batch");
    std::size_t total = 0;
    for (const ManifoldSample& s : batch.samples) total += s.examples.size();

    Matrix x(total, spec.input_dim());
    std::size_t row = 0;
    for (const ManifoldSample& s : batch.samples)
        for (const ManifoldEntry& e : s.examples) {
            if (e.features.size() != spec.input_dim())
                throw std::invalid_argument("clr_batch_loss_grad: feature dim mismatch");
            std::copy(e.features.begin(), e.features.end(), x[row]);
            ++row;
        }

    ForwardTrace trace;
    const Matrix emb = forward(params, spec, x, &trace);

    std::vector<EmbeddedManifold> manifolds;
    manifolds.reserve(batch.samples.size());
    row = 0;
    for (const ManifoldSample& s : batch.samples) {
        EmbeddedManifold m;
        m.embeddings = Matrix(s.examples.size(), emb.cols);
        for (std::size_t i = 0; i < s.examples.size(); ++i)
            for (std::size_t c = 0; c < emb.cols; ++c) m.embeddings[i][c] = emb[row + i][c];
        m.pairing = s.pairing;
        manifolds.push_back(std::move(m));
        row += s.examples.size();
    }

    const DclResult dr = dcl_loss(manifolds, dcl);

    Matrix dout(total, emb.cols);
    row = 0;
    for (std::size_t mi = 0; mi < batch.samples.size(); ++mi) {
        const Matrix& g = dr.embedding_grads[mi];
        for (std::size_t i = 0; i < g.rows; ++i)
            for (std::size_t c = 0; c < g.cols; ++c) dout[row + i][c] = g[i][c];
        row += g.rows;
    }
    return {dr.loss, backward(trace, dout)};
}

Episode prepare_episode(const Task& task, InnerMode mode, const Augmenter& aug,
                        const PoolConfig& pools, std::uint64_t seed) {
    Episode ep;
    ep.task = task;
    int ways = 0;
    for (const LabeledExample& e : task.support) ways = std::max(ways, e.label);
    if (ways == 0) throw std::invalid_argument("prepare_episode: task has no support set");
    ep.ways = ways;
    ep.support = make_batch(task.support);
    ep.query = make_batch(task.query);

    if (mode == InnerMode::batman_clr) {
        ep.support_manifolds = ManifoldSource::from_examples(task.support, ways);
        ep.support_manifolds.pool = std::make_shared<AugmentationPool>(build_augmentation_pool(
            task.support, pools.support_augs, aug, rng::derive(seed, rng::stream::pool, 0)));
        if (!task.query.empty()) {
            ep.query_manifolds = ManifoldSource::from_examples(task.query, ways);
            ep.query_manifolds.pool = std::make_shared<AugmentationPool>(build_augmentation_pool(
                task.query, pools.query_augs, aug, rng::derive(seed, rng::stream::pool, 1)));
        }
    }
    return ep;
}

namespace {

ManBatch draw_batch(const ManifoldSource& source, int ways, int v, ManifoldKind kind,
                    const Augmenter& aug, std::uint64_t seed) {
    return kind == ManifoldKind::stratified ? batman_sample(source, ways, v, aug, seed)
                                            : rand_manifold_batch(source, ways, v, aug, seed);
}

}  // namespace

AdaptResult inner_adapt(const ParamVector& theta, const Episode& episode,
                        const InnerLoopConfig& inner, const DclConfig& dcl, const Augmenter& aug,
                        const NetworkSpec& spec, std::uint64_t seed, double prox_lambda) {
    if (inner.steps < 0) throw std::invalid_argument("inner_adapt: negative step count");
    if (inner.lr <= 0.0) throw std::invalid_argument("inner_adapt: lr must be positive");
    if (inner.mode == InnerMode::batman_clr && inner.batman_v < 1)
        throw std::invalid_argument("inner_adapt: batman_v must be positive");

    ParamVector phi = theta;
    if (inner.zero_out_head && spec.has_head()) {
        const ParamLayout layout = ParamLayout::of(spec);
        std::fill(phi.begin() + layout.head_offset(), phi.end(), 0.0);
    }

    AdaptResult result;
    result.path.points.push_back(phi);
    for (int step = 0; step < inner.steps; ++step) {
        GradientVector grad;
        if (inner.mode == InnerMode::supervised_ce) {
            grad = ce_loss_grad(phi, spec, episode.support).grad;
        } else {
            const ManBatch batch =
                draw_batch(episode.support_manifolds, episode.ways, inner.batman_v,
                           inner.manifold_kind, aug, rng::derive(seed, rng::stream::inner, step));
            grad = clr_batch_loss_grad(phi, spec, batch, dcl).grad;
            const double inv_v = 1.0 / static_cast<double>(inner.batman_v);
            for (double& g : grad) g *= inv_v;
        }
        if (prox_lambda > 0.0)
            for (std::size_t i = 0; i < grad.size(); ++i)
                grad[i] += prox_lambda * (phi[i] - theta[i]);
        phi = sgd_step(phi, grad, inner.lr);
        result.path.points.push_back(phi);
    }
    result.phi = std::move(phi);
    return result;
}

ParamVector reptile_update(const ParamVector& theta, const std::vector<ParamVector>& phis,
                           double beta) {
    if (phis.empty()) throw std::invalid_argument("reptile_update: no adapted parameters");
    for (const ParamVector& phi : phis)
        if (phi.size() != theta.size())
            throw std::invalid_argument("reptile_update: parameter length mismatch");
    ParamVector out(theta.size());
    const double inv = 1.0 / static_cast<double>(phis.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        double mean = 0.0;
        for (const ParamVector& phi : phis) mean += phi[i];
        mean *= inv;
        out[i] = theta[i] + beta * (mean - theta[i]);
    }
    return out;
}

GradientVector eigen_reptile_direction(const InnerPath& path) {
    const std::size_t n = path.points.size();
    if (n < 2) throw std::invalid_argument("eigen_reptile_direction: path needs two points");
    const std::size_t dim = path.points.front().size();
    for (const ParamVector& p : path.points)
        if (p.size() != dim)
            throw std::invalid_argument("eigen_reptile_direction: point length mismatch");

    std::vector<double> mean(dim, 0.0);
    for (const ParamVector& p : path.points)
        for (std::size_t i = 0; i < dim; ++i) mean[i] += p[i];
    for (double& m : mean) m /= static_cast<double>(n);

    // centered path and its Gram matrix; the principal direction lives in the
    // span of the centered points, so power iteration runs in n dimensions
    std::vector<std::vector<double>> centered(n, std::vector<double>(dim));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t i = 0; i < dim; ++i) centered[a][i] = path.points[a][i] - mean[i];

    std::vector<std::vector<double>> gram(n, std::vector<double>(n));
    double trace = 0.0;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a; b < n; ++b) {
            double acc = 0.0;
            for (std::size_t i = 0; i < dim; ++i) acc += centered[a][i] * centered[b][i];
            gram[a][b] = gram[b][a] = acc;
            if (a == b) trace += acc;
        }

    GradientVector out(dim, 0.0);
    if (trace == 0.0) return out;  // degenerate: every point equal

    std::size_t start = 0;
    for (std::size_t a = 1; a < n; ++a)
        if (gram[a][a] > gram[start][start]) start = a;
    std::vector<double> w(n, 0.0);
    w[start] = 1.0;
    std::vector<double> next(n);
    for (int it = 0; it < 200; ++it) {
        for (std::size_t a = 0; a < n; ++a) {
            double acc = 0.0;
            for (std::size_t b = 0; b < n; ++b) acc += gram[a][b] * w[b];
            next[a] = acc;
        }
        double norm = 0.0;
        for (double v : next) norm += v * v;
        norm = std::sqrt(norm);
        if (norm == 0.0) return out;
        double delta = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
            next[a] /= norm;
            delta = std::max(delta, std::abs(next[a] - w[a]));
        }
        w.swap(next);
        if (delta < 1e-15) break;
    }

    std::vector<double> direction(dim, 0.0);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t i = 0; i < dim; ++i) direction[i] += w[a] * centered[a][i];
    double dnorm = 0.0;
    for (double v : direction) dnorm += v * v;
    dnorm = std::sqrt(dnorm);
    if (dnorm == 0.0) return out;

    // sign convention: the direction agrees with the net displacement
    double m = 0.0;
    for (std::size_t i = 0; i < dim; ++i)
        m += (direction[i] / dnorm) * (path.points.back()[i] - path.points.front()[i]);
    const double scale = m / dnorm;  // sign flip and magnitude in one factor
    for (std::size_t i = 0; i < dim; ++i) out[i] = scale * direction[i];
    return out;
}

ParamVector eigen_reptile_update(const ParamVector& theta, const InnerPath& path, double beta) {
    const GradientVector dir = eigen_reptile_direction(path);
    if (dir.size() != theta.size())
        throw std::invalid_argument("eigen_reptile_update: path does not match theta");
    ParamVector out(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) out[i] = theta[i] + beta * dir[i];
    return out;
}

GradientVector fomaml_zo_meta_grad(const ParamVector& phi, const Episode& episode,
                                   const InnerLoopConfig& inner, const OuterConfig& outer,
                                   const DclConfig& dcl, const Augmenter& aug,
                                   const NetworkSpec& spec, std::uint64_t seed) {
    if (inner.mode == InnerMode::supervised_ce) {
        if (episode.query.empty())
            throw std::invalid_argument("fomaml_zo_meta_grad: task has an empty query set");
        return ce_loss_grad(phi, spec, episode.query).grad;
    }
    if (episode.query_manifolds.all.empty())
        throw std::invalid_argument("fomaml_zo_meta_grad: task has an empty query set");
    const ManBatch batch =
        draw_batch(episode.query_manifolds, episode.ways, outer.query_v, inner.manifold_kind, aug,
                   rng::derive(seed, rng::stream::outer));
    return clr_batch_loss_grad(phi, spec, batch, dcl).grad;
}

GradientVector implicit_meta_grad(const GradFn& support_grad, const ParamVector& phi,
                                  const GradientVector& query_grad, const ImamlConfig& cfg,
                                  CgDiagnostics* diag) {
    if (cfg.lambda <= 0.0) throw std::invalid_argument("implicit_meta_grad: lambda must be > 0");
    if (cfg.cg_iters < 1) throw std::invalid_argument("implicit_meta_grad: cg_iters must be >= 1");
    if (query_grad.size() != phi.size())
        throw std::invalid_argument("implicit_meta_grad: gradient length mismatch");

    const auto apply = [&](const GradientVector& v) {
        GradientVector av = hvp(support_grad, phi, v, cfg.hvp_h);
        for (std::size_t i = 0; i < v.size(); ++i) av[i] = v[i] + av[i] / cfg.lambda;
        return av;
    };
    const auto dot = [](const GradientVector& a, const GradientVector& b) {
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
        return acc;
    };

    CgDiagnostics local;
    GradientVector x(phi.size(), 0.0);
    GradientVector r = query_grad;
    GradientVector p = r;
    double rs = dot(r, r);
    local.residual = std::sqrt(rs);
    const double tol = 1e-12 * std::max(1.0, local.residual);

    for (int it = 0; it < cfg.cg_iters && std::sqrt(rs) > tol; ++it) {
        const GradientVector ap = apply(p);
        const double p_ap = dot(p, ap);
        if (!(p_ap > 0.0)) {  // zero or negative curvature: keep the best iterate
            local.breakdown = true;
            break;
        }
        const double alpha = rs / p_ap;
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        const double rs_new = dot(r, r);
        local.iterations = it + 1;
        local.residual = std::sqrt(rs_new);
        const double ratio = rs_new / rs;
        rs = rs_new;
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + ratio * p[i];
    }
    if (diag) *diag = local;
    return x;
}

GradientVector imaml_meta_grad(const ParamVector& phi, const Episode& episode,
                               const InnerLoopConfig& inner, const OuterConfig& outer,
                               const DclConfig& dcl, const ImamlConfig& imaml,
                               const Augmenter& aug, const NetworkSpec& spec, std::uint64_t seed,
                               CgDiagnostics* diag) {
    const GradientVector g = fomaml_zo_meta_grad(phi, episode, inner, outer, dcl, aug, spec, seed);

    GradFn support_grad;
    if (inner.mode == InnerMode::supervised_ce) {
        support_grad = [&episode, &spec](const ParamVector& p) {
            return ce_loss_grad(p, spec, episode.support).grad;
        };
    } else {
        // the Hessian-vector products need a pure support objective, so the
        // implicit solve fixes one manifold batch up front
        auto batch = std::make_shared<ManBatch>(
            draw_batch(episode.support_manifolds, episode.ways, inner.batman_v,
                       inner.manifold_kind, aug, rng::derive(seed, rng::stream::hvp_batch)));
        const double inv_v = 1.0 / static_cast<double>(inner.batman_v);
        support_grad = [batch, &spec, &dcl, inv_v](const ParamVector& p) {
            GradientVector grad = clr_batch_loss_grad(p, spec, *batch, dcl).grad;
            for (double& v : grad) v *= inv_v;
            return grad;
        };
    }
    return implicit_meta_grad(support_grad, phi, g, imaml, diag);
}

TrainSetup resolve_setup(TrainSetup setup) {
    switch (setup.sampler) {
        case SamplerMode::supervised:
        case SamplerMode::ssl:
            setup.inner.mode = InnerMode::supervised_ce;
            break;
        case SamplerMode::man:
            setup.inner.mode = InnerMode::batman_clr;
            setup.inner.manifold_kind = ManifoldKind::stratified;
            setup.inner.batman_v = 1;
            setup.outer.query_v = 1;
            break;
        case SamplerMode::batman:
            setup.inner.mode = InnerMode::batman_clr;
            setup.inner.manifold_kind = ManifoldKind::stratified;
            break;
        case SamplerMode::rand:
            setup.inner.mode = InnerMode::batman_clr;
            setup.inner.manifold_kind = ManifoldKind::random;
            break;
    }
    return setup;
}

ParamVector meta_train(const SplitDataset& train_data, const NetworkSpec& spec,
                       const TrainSetup& setup_in, int epochs, std::uint64_t seed) {
    const TrainSetup setup = resolve_setup(setup_in);
    setup.task_spec.validate();
    spec.validate();
    if (epochs < 0) throw std::invalid_argument("meta_train: negative epoch count");
    if (setup.outer.meta_batch < 1)
        throw std::invalid_argument("meta_train: meta_batch must be positive");

    // Reptile-family learners never touch a query set during training
    const bool needs_query =
        setup.learner == LearnerKind::fomaml_zo || setup.learner == LearnerKind::imaml;
    TaskSpec task_spec = setup.task_spec;
    if (!needs_query) task_spec.query_shots = 0;

    ParamVector theta = init_network(spec, rng::derive(seed, rng::stream::init));
    const int batch = setup.outer.meta_batch;
    const double prox = setup.learner == LearnerKind::imaml ? setup.imaml.lambda : 0.0;

    std::vector<ParamVector> phis(batch);
    std::vector<GradientVector> contribs(batch);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        // inner adaptations read an immutable snapshot of theta and write
        // into their own slot; any failure is rethrown after the join
        std::exception_ptr failure = nullptr;
        const auto run_task = [&](int t) {
            const std::uint64_t task_seed =
                rng::derive(seed, rng::stream::train, epoch, t);
            const Task task =
                setup.sampler == SamplerMode::ssl
                    ? make_ssl_task(train_data, task_spec.ways, task_spec.shots,
                                    task_spec.query_shots, setup.augmenter, task_seed)
                    : sample_task(train_data, task_spec, task_seed);
            const Episode ep = prepare_episode(task, setup.inner.mode, setup.augmenter,
                                               setup.pools, rng::derive(task_seed, rng::stream::pool));
            const AdaptResult ar =
                inner_adapt(theta, ep, setup.inner, setup.dcl, setup.augmenter, spec,
                            rng::derive(task_seed, rng::stream::inner), prox);
            switch (setup.learner) {
                case LearnerKind::reptile:
                    phis[t] = ar.phi;
                    break;
                case LearnerKind::eigen_reptile:
                    contribs[t] = eigen_reptile_direction(ar.path);
                    break;
                case LearnerKind::fomaml_zo:
                    contribs[t] = fomaml_zo_meta_grad(ar.phi, ep, setup.inner, setup.outer,
                                                      setup.dcl, setup.augmenter, spec,
                                                      rng::derive(task_seed, rng::stream::outer));
                    break;
                case LearnerKind::imaml:
                    contribs[t] = imaml_meta_grad(ar.phi, ep, setup.inner, setup.outer, setup.dcl,
                                                  setup.imaml, setup.augmenter, spec,
                                                  rng::derive(task_seed, rng::stream::outer));
                    break;
            }
        };

        if (exec::parallel_enabled()) {
#pragma omp parallel for schedule(static)
            for (int t = 0; t < batch; ++t) {
                try {
                    run_task(t);
                } catch (...) {
#pragma omp critical
                    if (!failure) failure = std::current_exception();
                }
            }
        } else {
            for (int t = 0; t < batch; ++t) run_task(t);
        }
        if (failure) std::rethrow_exception(failure);

        if (setup.learner == LearnerKind::reptile) {
            theta = reptile_update(theta, phis, setup.outer.lr);
        } else {
            const double sign = setup.learner == LearnerKind::eigen_reptile ? 1.0 : -1.0;
            const double scale = sign * setup.outer.lr / static_cast<double>(batch);
            for (int t = 0; t < batch; ++t) {
                if (contribs[t].size() != theta.size())
                    throw std::logic_error("meta_train: contribution length mismatch");
                for (std::size_t i = 0; i < theta.size(); ++i)
                    theta[i] += scale * contribs[t][i];
            }
        }
    }
    return theta;
}

}  // namespace fsml
