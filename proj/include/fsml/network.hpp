#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "fsml/kernels.hpp"

namespace fsml {

// Fully connected network: layer_widths = (input, hidden..., embedding).
// The activation follows every layer except the last backbone layer, so the
// embedding is a raw linear output. An optional linear decision head of
// head_width logits sits on top of the embedding.
struct NetworkSpec {
    std::vector<std::size_t> layer_widths;
    Activation activation = Activation::relu;
    std::optional<std::size_t> head_width;

    void validate() const;
    std::size_t input_dim() const { return layer_widths.front(); }
    std::size_t embedding_dim() const { return layer_widths.back(); }
    bool has_head() const { return head_width.has_value(); }
    std::size_t output_dim() const { return has_head() ? *head_width : embedding_dim(); }

    bool operator==(const NetworkSpec&) const = default;
};

// Flat parameter vector: per stage, weights (row-major) then biases, stages
// in order input->output, head last.
using ParamVector = std::vector<double>;
using GradientVector = std::vector<double>;

struct StageLayout {
    std::size_t w_offset, b_offset, in_dim, out_dim;
    bool activated;
};

struct ParamLayout {
    std::vector<StageLayout> stages;
    std::size_t total = 0;

    static ParamLayout of(const NetworkSpec& spec);

    // Head parameters occupy [head_offset, total) when the spec has a head.
    std::size_t head_offset() const { return stages.back().w_offset; }
};

struct LayerParams {
    Matrix weights;  // out_dim x in_dim
    std::vector<double> biases;
};

std::vector<LayerParams> unflatten(const ParamVector& params, const NetworkSpec& spec);
ParamVector flatten(const std::vector<LayerParams>& layers, const NetworkSpec& spec);

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
ParamVector init_network(const NetworkSpec& spec, std::uint64_t seed);

struct ForwardTrace {
    NetworkSpec spec;
    ParamLayout layout;
    ParamVector params;
    std::vector<Matrix> stage_inputs;  // input batch of each linear stage
};

// Returns logits when the spec has a head, embeddings otherwise. Pass a trace
// to enable backward().
Matrix forward(const ParamVector& params, const NetworkSpec& spec, const Matrix& inputs,
               ForwardTrace* trace = nullptr);

// Exact reverse-mode gradient of sum(output .* output_grad) w.r.t. params.
GradientVector backward(const ForwardTrace& trace, const Matrix& output_grad);

struct CrossEntropyResult {
    double loss;        // mean negative log-softmax over the batch
    Matrix grad_logits; // (softmax - onehot) / batch
};

CrossEntropyResult cross_entropy(const Matrix& logits, const std::vector<int>& labels);

ParamVector sgd_step(const ParamVector& params, const GradientVector& grad, double lr);

using LossFn = std::function<double(const ParamVector&)>;
using GradFn = std::function<GradientVector(const ParamVector&)>;

// Central differences, one coordinate at a time.
GradientVector finite_diff_grad(const LossFn& f, const ParamVector& at, double h);

// H v approximated as (grad(at + h v) - grad(at - h v)) / (2 h).
GradientVector hvp(const GradFn& grad_fn, const ParamVector& at, const GradientVector& v,
                   double h);

}  // namespace fsml
