#include "fsml/kernels.hpp"

#include <cmath>
#include <cstdint>

#include "fsml/exec.hpp"

// The parallel variants split work over independent output slots (one row or
// one output neuron per iteration) and keep every inner accumulation loop in
// the same order as the serial reference, so the two paths agree bitwise.

namespace fsml::kernels {

void linear_forward_serial(const double* w, const double* b, std::size_t out_dim,
                           std::size_t in_dim, const Matrix& x, Matrix& y) {
    for (std::size_t r = 0; r < x.rows; ++r) {
        const double* xr = x[r];
        double* yr = y[r];
        for (std::size_t i = 0; i < out_dim; ++i) {
            const double* wi = w + i * in_dim;
            double acc = b[i];
            for (std::size_t j = 0; j < in_dim; ++j) acc += wi[j] * xr[j];
            yr[i] = acc;
        }
    }
}

void linear_forward_parallel(const double* w, const double* b, std::size_t out_dim,
                             std::size_t in_dim, const Matrix& x, Matrix& y) {
    const std::int64_t rows = static_cast<std::int64_t>(x.rows);
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* xr = x[static_cast<std::size_t>(r)];
        double* yr = y[static_cast<std::size_t>(r)];
        for (std::size_t i = 0; i < out_dim; ++i) {
            const double* wi = w + i * in_dim;
            double acc = b[i];
            for (std::size_t j = 0; j < in_dim; ++j) acc += wi[j] * xr[j];
            yr[i] = acc;
        }
    }
}

void linear_forward(const double* w, const double* b, std::size_t out_dim, std::size_t in_dim,
                    const Matrix& x, Matrix& y) {
    if (exec::parallel_enabled())
        linear_forward_parallel(w, b, out_dim, in_dim, x, y);
    else
        linear_forward_serial(w, b, out_dim, in_dim, x, y);
}

void linear_backward_input_serial(const double* w, std::size_t out_dim, std::size_t in_dim,
                                  const Matrix& dy, Matrix& dx) {
    for (std::size_t r = 0; r < dy.rows; ++r) {
        const double* dyr = dy[r];
        double* dxr = dx[r];
        for (std::size_t j = 0; j < in_dim; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < out_dim; ++i) acc += dyr[i] * w[i * in_dim + j];
            dxr[j] = acc;
        }
    }
}

void linear_backward_input_parallel(const double* w, std::size_t out_dim, std::size_t in_dim,
                                    const Matrix& dy, Matrix& dx) {
    const std::int64_t rows = static_cast<std::int64_t>(dy.rows);
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* dyr = dy[static_cast<std::size_t>(r)];
        double* dxr = dx[static_cast<std::size_t>(r)];
        for (std::size_t j = 0; j < in_dim; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < out_dim; ++i) acc += dyr[i] * w[i * in_dim + j];
            dxr[j] = acc;
        }
    }
}

void linear_backward_input(const double* w, std::size_t out_dim, std::size_t in_dim,
                           const Matrix& dy, Matrix& dx) {
    if (exec::parallel_enabled())
        linear_backward_input_parallel(w, out_dim, in_dim, dy, dx);
    else
        linear_backward_input_serial(w, out_dim, in_dim, dy, dx);
}

void linear_backward_params_serial(const Matrix& x, const Matrix& dy, double* dw, double* db) {
    const std::size_t out_dim = dy.cols, in_dim = x.cols;
    for (std::size_t i = 0; i < out_dim; ++i) {
        double* dwi = dw + i * in_dim;
        double acc_b = 0.0;
        for (std::size_t j = 0; j < in_dim; ++j) dwi[j] = 0.0;
        for (std::size_t r = 0; r < x.rows; ++r) {
            const double d = dy[r][i];
            acc_b += d;
            const double* xr = x[r];
            for (std::size_t j = 0; j < in_dim; ++j) dwi[j] += d * xr[j];
        }
        db[i] = acc_b;
    }
}

void linear_backward_params_parallel(const Matrix& x, const Matrix& dy, double* dw, double* db) {
    const std::int64_t out_dim = static_cast<std::int64_t>(dy.cols);
    const std::size_t in_dim = x.cols;
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < out_dim; ++i) {
        double* dwi = dw + static_cast<std::size_t>(i) * in_dim;
        double acc_b = 0.0;
        for (std::size_t j = 0; j < in_dim; ++j) dwi[j] = 0.0;
        for (std::size_t r = 0; r < x.rows; ++r) {
            const double d = dy[r][static_cast<std::size_t>(i)];
            acc_b += d;
            const double* xr = x[r];
            for (std::size_t j = 0; j < in_dim; ++j) dwi[j] += d * xr[j];
        }
        db[i] = acc_b;
    }
}

void linear_backward_params(const Matrix& x, const Matrix& dy, double* dw, double* db) {
    if (exec::parallel_enabled())
        linear_backward_params_parallel(x, dy, dw, db);
    else
        linear_backward_params_serial(x, dy, dw, db);
}

namespace {

inline double act_fwd(Activation a, double z) {
    return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

// derivative expressed through the post-activation value
inline double act_bwd(Activation a, double post) {
    return a == Activation::relu ? (post > 0.0 ? 1.0 : 0.0) : 1.0 - post * post;
}

}  // namespace

void activation_forward_serial(Activation a, Matrix& z) {
    for (double& v : z.data) v = act_fwd(a, v);
}

void activation_forward_parallel(Activation a, Matrix& z) {
    const std::int64_t n = static_cast<std::int64_t>(z.data.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i)
        z.data[static_cast<std::size_t>(i)] = act_fwd(a, z.data[static_cast<std::size_t>(i)]);
}

void activation_forward(Activation a, Matrix& z) {
    if (exec::parallel_enabled())
        activation_forward_parallel(a, z);
    else
        activation_forward_serial(a, z);
}

void activation_backward_serial(Activation a, const Matrix& post, Matrix& dy) {
    for (std::size_t i = 0; i < dy.data.size(); ++i) dy.data[i] *= act_bwd(a, post.data[i]);
}

void activation_backward_parallel(Activation a, const Matrix& post, Matrix& dy) {
    const std::int64_t n = static_cast<std::int64_t>(dy.data.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i)
        dy.data[static_cast<std::size_t>(i)] *= act_bwd(a, post.data[static_cast<std::size_t>(i)]);
}

void activation_backward(Activation a, const Matrix& post, Matrix& dy) {
    if (exec::parallel_enabled())
        activation_backward_parallel(a, post, dy);
    else
        activation_backward_serial(a, post, dy);
}

}  // namespace fsml::kernels
