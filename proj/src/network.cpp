#include "fsml/network.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "fsml/rng.hpp"

namespace fsml {

void NetworkSpec::validate() const {
    if (layer_widths.size() < 2)
        throw std::invalid_argument("NetworkSpec: need at least input and output widths");
    for (std::size_t w : layer_widths)
        if (w == 0) throw std::invalid_argument("NetworkSpec: zero layer width");
    if (has_head() && *head_width == 0) throw std::invalid_argument("NetworkSpec: zero head width");
}

ParamLayout ParamLayout::of(const NetworkSpec& spec) {
    spec.validate();
    ParamLayout layout;
    std::size_t off = 0;
    const std::size_t n_layers = spec.layer_widths.size() - 1;
    for (std::size_t l = 0; l < n_layers; ++l) {
        StageLayout s;
        s.in_dim = spec.layer_widths[l];
        s.out_dim = spec.layer_widths[l + 1];
        s.activated = l + 1 < n_layers;  // embedding layer stays linear
        s.w_offset = off;
        s.b_offset = off + s.in_dim * s.out_dim;
        off = s.b_offset + s.out_dim;
        layout.stages.push_back(s);
    }
    if (spec.has_head()) {
        StageLayout s;
        s.in_dim = spec.embedding_dim();
        s.out_dim = *spec.head_width;
        s.activated = false;
        s.w_offset = off;
        s.b_offset = off + s.in_dim * s.out_dim;
        off = s.b_offset + s.out_dim;
        layout.stages.push_back(s);
    }
    layout.total = off;
    return layout;
}

std::vector<LayerParams> unflatten(const ParamVector& params, const NetworkSpec& spec) {
    const ParamLayout layout = ParamLayout::of(spec);
    if (params.size() != layout.total)
        throw std::invalid_argument("unflatten: expected " + std::to_string(layout.total) +
                                    " parameters, got " + std::to_string(params.size()));
    std::vector<LayerParams> layers;
    for (const StageLayout& s : layout.stages) {
        LayerParams lp;
        lp.weights = Matrix(s.out_dim, s.in_dim);
        for (std::size_t k = 0; k < s.out_dim * s.in_dim; ++k)
            lp.weights.data[k] = params[s.w_offset + k];
        lp.biases.assign(params.begin() + s.b_offset, params.begin() + s.b_offset + s.out_dim);
        layers.push_back(std::move(lp));
    }
    return layers;
}

ParamVector flatten(const std::vector<LayerParams>& layers, const NetworkSpec& spec) {
    const ParamLayout layout = ParamLayout::of(spec);
    if (layers.size() != layout.stages.size())
        throw std::invalid_argument("flatten: layer count does not match spec");
    ParamVector params(layout.total);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const StageLayout& s = layout.stages[i];
        const LayerParams& lp = layers[i];
        if (lp.weights.rows != s.out_dim || lp.weights.cols != s.in_dim ||
            lp.biases.size() != s.out_dim)
            throw std::invalid_argument("flatten: layer shape does not match spec");
        for (std::size_t k = 0; k < s.out_dim * s.in_dim; ++k)
            params[s.w_offset + k] = lp.weights.data[k];
        for (std::size_t k = 0; k < s.out_dim; ++k) params[s.b_offset + k] = lp.biases[k];
    }
    return params;
}

ParamVector init_network(const NetworkSpec& spec, std::uint64_t seed) {
    const ParamLayout layout = ParamLayout::of(spec);
    ParamVector params(layout.total, 0.0);
    rng::Rng gen(seed);
    for (const StageLayout& s : layout.stages) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(s.in_dim));
        for (std::size_t k = 0; k < s.out_dim * s.in_dim; ++k)
            params[s.w_offset + k] = gen.uniform(-bound, bound);
        // biases stay zero
    }
    return params;
}

Matrix forward(const ParamVector& params, const NetworkSpec& spec, const Matrix& inputs,
               ForwardTrace* trace) {
    const ParamLayout layout = ParamLayout::of(spec);
    if (params.size() != layout.total)
        throw std::invalid_argument("forward: parameter count does not match spec");
    if (inputs.cols != spec.input_dim())
        throw std::invalid_argument("forward: input dim " + std::to_string(inputs.cols) +
                                    " does not match spec input " +
                                    std::to_string(spec.input_dim()));
    if (trace) {
        trace->spec = spec;
        trace->layout = layout;
        trace->params = params;
        trace->stage_inputs.clear();
    }
    Matrix cur = inputs;
    for (const StageLayout& s : layout.stages) {
        if (trace) trace->stage_inputs.push_back(cur);
        Matrix next(cur.rows, s.out_dim);
        kernels::linear_forward(params.data() + s.w_offset, params.data() + s.b_offset, s.out_dim,
                                s.in_dim, cur, next);
        if (s.activated) kernels::activation_forward(spec.activation, next);
        cur = std::move(next);
    }
    return cur;
}

GradientVector backward(const ForwardTrace& trace, const Matrix& output_grad) {
    const ParamLayout& layout = trace.layout;
    if (trace.stage_inputs.size() != layout.stages.size())
        throw std::invalid_argument("backward: trace is incomplete");
    const StageLayout& last = layout.stages.back();
    if (output_grad.rows != trace.stage_inputs.front().rows || output_grad.cols != last.out_dim)
        throw std::invalid_argument("backward: output_grad shape does not match trace");

    GradientVector grad(layout.total, 0.0);
    Matrix dy = output_grad;
    for (std::size_t si = layout.stages.size(); si-- > 0;) {
        const StageLayout& s = layout.stages[si];
        const Matrix& x = trace.stage_inputs[si];
        kernels::linear_backward_params(x, dy, grad.data() + s.w_offset,
                                        grad.data() + s.b_offset);
        if (si == 0) break;
        Matrix dx(dy.rows, s.in_dim);
        kernels::linear_backward_input(trace.params.data() + s.w_offset, s.out_dim, s.in_dim, dy,
                                       dx);
        // x is the post-activation output of the previous stage when that
        // stage is activated, which is exactly what act_bwd needs
        if (layout.stages[si - 1].activated)
            kernels::activation_backward(trace.spec.activation, x, dx);
        dy = std::move(dx);
    }
    return grad;
}

CrossEntropyResult cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
    if (logits.rows == 0) throw std::invalid_argument("cross_entropy: empty batch");
    if (labels.size() != logits.rows)
        throw std::invalid_argument("cross_entropy: label count does not match batch");
    const int classes = static_cast<int>(logits.cols);
    for (int y : labels)
        if (y < 0 || y >= classes)
            throw std::invalid_argument("cross_entropy: label " + std::to_string(y) +
                                        " out of range for " + std::to_string(classes) +
                                        " classes");

    const double inv_batch = 1.0 / static_cast<double>(logits.rows);
    CrossEntropyResult out{0.0, Matrix(logits.rows, logits.cols)};
    for (std::size_t r = 0; r < logits.rows; ++r) {
        const double* lr = logits[r];
        double m = lr[0];
        for (std::size_t c = 1; c < logits.cols; ++c) m = std::max(m, lr[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < logits.cols; ++c) sum += std::exp(lr[c] - m);
        const double lse = m + std::log(sum);
        out.loss += (lse - lr[labels[r]]) * inv_batch;
        double* gr = out.grad_logits[r];
        for (std::size_t c = 0; c < logits.cols; ++c)
            gr[c] = std::exp(lr[c] - lse) * inv_batch;
        gr[labels[r]] -= inv_batch;
    }
    return out;
}

ParamVector sgd_step(const ParamVector& params, const GradientVector& grad, double lr) {
    if (params.size() != grad.size())
        throw std::invalid_argument("sgd_step: parameter/gradient length mismatch");
    ParamVector out(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) out[i] = params[i] - lr * grad[i];
    return out;
}

GradientVector finite_diff_grad(const LossFn& f, const ParamVector& at, double h) {
    if (h <= 0.0) throw std::invalid_argument("finite_diff_grad: h must be positive");
    GradientVector grad(at.size());
    ParamVector probe = at;
    for (std::size_t i = 0; i < at.size(); ++i) {
        probe[i] = at[i] + h;
        const double up = f(probe);
        probe[i] = at[i] - h;
        const double down = f(probe);
        probe[i] = at[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

GradientVector hvp(const GradFn& grad_fn, const ParamVector& at, const GradientVector& v,
                   double h) {
    if (h <= 0.0) throw std::invalid_argument("hvp: h must be positive");
    if (v.size() != at.size()) throw std::invalid_argument("hvp: vector length mismatch");
    ParamVector up(at.size()), down(at.size());
    for (std::size_t i = 0; i < at.size(); ++i) {
        up[i] = at[i] + h * v[i];
        down[i] = at[i] - h * v[i];
    }
    const GradientVector gu = grad_fn(up);
    const GradientVector gd = grad_fn(down);
    if (gu.size() != at.size() || gd.size() != at.size())
        throw std::invalid_argument("hvp: grad_fn returned wrong length");
    GradientVector out(at.size());
    for (std::size_t i = 0; i < at.size(); ++i) out[i] = (gu[i] - gd[i]) / (2.0 * h);
    return out;
}

}  // namespace fsml
