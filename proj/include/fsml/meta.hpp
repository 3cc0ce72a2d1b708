#pragma once

#include <cstdint>
#include <vector>

#include "fsml/contrastive.hpp"
#include "fsml/manifold.hpp"
#include "fsml/network.hpp"

namespace fsml {

enum class LearnerKind { reptile, eigen_reptile, fomaml_zo, imaml };
enum class InnerMode { supervised_ce, batman_clr };
enum class ManifoldKind { stratified, random };
enum class SamplerMode { supervised, man, batman, rand, ssl };

struct InnerLoopConfig {
    int steps = 7;
    double lr = 0.05;
    InnerMode mode = InnerMode::supervised_ce;
    int batman_v = 5;            // manifolds per contrastive inner batch
    bool zero_out_head = false;  // "+ZO": head zeroed before step 1 (no-op without head)
    ManifoldKind manifold_kind = ManifoldKind::stratified;
};

struct OuterConfig {
    double lr = 0.1;
    int meta_batch = 5;
    int query_v = 15;  // manifolds per contrastive meta-gradient batch
};

struct ImamlConfig {
    double lambda = 0.5;
    int cg_iters = 5;
    double hvp_h = 1e-4;
};

struct PoolConfig {
    int support_augs = 5;
    int query_augs = 2;
};

// One training task prepared for a given inner mode: supervised batch views
// plus, in contrastive mode, per-side manifold sources with augmentation
// pools attached.
struct Episode {
    Task task;
    BatchView support;
    BatchView query;
    ManifoldSource support_manifolds;
    ManifoldSource query_manifolds;
    int ways = 0;
};

Episode prepare_episode(const Task& task, InnerMode mode, const Augmenter& aug,
                        const PoolConfig& pools, std::uint64_t seed);

struct InnerPath {
    std::vector<ParamVector> points;  // start (after any head zeroing), then each phi
};

struct AdaptResult {
    ParamVector phi;
    InnerPath path;
};

// u SGD steps from theta. Supervised: full-batch CE on the support set.
// Contrastive: a fresh batch of v manifolds per step, stepping by lr/v on the
// summed batch loss. prox_lambda > 0 adds the pull (lambda/2)*|phi - theta|^2.
AdaptResult inner_adapt(const ParamVector& theta, const Episode& episode,
                        const InnerLoopConfig& inner, const DclConfig& dcl, const Augmenter& aug,
                        const NetworkSpec& spec, std::uint64_t seed, double prox_lambda = 0.0);

ParamVector reptile_update(const ParamVector& theta, const std::vector<ParamVector>& phis,
                           double beta);

// Principal direction of the centered inner path, found via the Gram matrix
// and power iteration, sign-aligned with the net displacement. Returns m*d
// where m is the displacement's projection onto the unit direction d.
GradientVector eigen_reptile_direction(const InnerPath& path);

ParamVector eigen_reptile_update(const ParamVector& theta, const InnerPath& path, double beta);

// First-order meta-gradient: the query-loss gradient evaluated at phi.
GradientVector fomaml_zo_meta_grad(const ParamVector& phi, const Episode& episode,
                                   const InnerLoopConfig& inner, const OuterConfig& outer,
                                   const DclConfig& dcl, const Augmenter& aug,
                                   const NetworkSpec& spec, std::uint64_t seed);

struct CgDiagnostics {
    int iterations = 0;
    double residual = 0.0;
    bool breakdown = false;
};

// Solves (I + H/lambda) x = g by conjugate gradients, with H v taken as
// finite-difference Hessian-vector products of support_grad, which must be a
// pure function of the parameters.
GradientVector implicit_meta_grad(const GradFn& support_grad, const ParamVector& phi,
                                  const GradientVector& query_grad, const ImamlConfig& cfg,
                                  CgDiagnostics* diag = nullptr);

GradientVector imaml_meta_grad(const ParamVector& phi, const Episode& episode,
                               const InnerLoopConfig& inner, const OuterConfig& outer,
                               const DclConfig& dcl, const ImamlConfig& imaml,
                               const Augmenter& aug, const NetworkSpec& spec, std::uint64_t seed,
                               CgDiagnostics* diag = nullptr);

struct TrainSetup {
    LearnerKind learner = LearnerKind::reptile;
    SamplerMode sampler = SamplerMode::supervised;
    TaskSpec task_spec;
    InnerLoopConfig inner;
    OuterConfig outer;
    ImamlConfig imaml;
    DclConfig dcl;
    Augmenter augmenter;
    PoolConfig pools;
};

// Reconciles the inner-loop config with the sampler mode (contrastive modes
// force batman_clr, man forces v=1, rand forces random manifolds).
TrainSetup resolve_setup(TrainSetup setup);

// Meta-training loop. Inner adaptations within an epoch run in parallel over
// an immutable snapshot of theta; the meta-update is applied single-threaded
// from per-task slots, so results do not depend on thread count.
ParamVector meta_train(const SplitDataset& train_data, const NetworkSpec& spec,
                       const TrainSetup& setup, int epochs, std::uint64_t seed);

// Loss+gradient helpers shared by the learners, exposed for tests.
struct LossGrad {
    double loss;
    GradientVector grad;
};

LossGrad ce_loss_grad(const ParamVector& params, const NetworkSpec& spec, const BatchView& batch);
LossGrad clr_batch_loss_grad(const ParamVector& params, const NetworkSpec& spec,
                             const ManBatch& batch, const DclConfig& dcl);

}  // namespace fsml
