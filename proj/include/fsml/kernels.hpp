#pragma once

#include <cstddef>
#include <vector>

// Dense batch kernels behind the network code. Each kernel ships in two
// variants: a plain serial loop and an OpenMP one parallelized over
// independent output slots, dispatched on exec::mode(). Per-element
// accumulation order is identical in both, so results match bitwise.

namespace fsml {

enum class Activation { relu, tanh };

struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double* operator[](std::size_t r) { return data.data() + r * cols; }
    const double* operator[](std::size_t r) const { return data.data() + r * cols; }

    bool operator==(const Matrix&) const = default;
};

namespace kernels {

// y = x W^T + b with W row-major (out_dim x in_dim), x (batch x in_dim)
void linear_forward(const double* w, const double* b, std::size_t out_dim, std::size_t in_dim,
                    const Matrix& x, Matrix& y);

// dx = dy W
void linear_backward_input(const double* w, std::size_t out_dim, std::size_t in_dim,
                           const Matrix& dy, Matrix& dx);

// dw[i][j] = sum_b dy[b][i] * x[b][j], db[i] = sum_b dy[b][i]
void linear_backward_params(const Matrix& x, const Matrix& dy, double* dw, double* db);

void activation_forward(Activation a, Matrix& z);

// dy *= f'(post) where post = f(z) is the stored post-activation
void activation_backward(Activation a, const Matrix& post, Matrix& dy);

// Serial reference variants, exposed for the equivalence tests and benchmark.
void linear_forward_serial(const double* w, const double* b, std::size_t out_dim,
                           std::size_t in_dim, const Matrix& x, Matrix& y);
void linear_backward_input_serial(const double* w, std::size_t out_dim, std::size_t in_dim,
                                  const Matrix& dy, Matrix& dx);
void linear_backward_params_serial(const Matrix& x, const Matrix& dy, double* dw, double* db);
void activation_forward_serial(Activation a, Matrix& z);
void activation_backward_serial(Activation a, const Matrix& post, Matrix& dy);

void linear_forward_parallel(const double* w, const double* b, std::size_t out_dim,
                             std::size_t in_dim, const Matrix& x, Matrix& y);
void linear_backward_input_parallel(const double* w, std::size_t out_dim, std::size_t in_dim,
                                    const Matrix& dy, Matrix& dx);
void linear_backward_params_parallel(const Matrix& x, const Matrix& dy, double* dw, double* db);
void activation_forward_parallel(Activation a, Matrix& z);
void activation_backward_parallel(Activation a, const Matrix& post, Matrix& dy);

}  // namespace kernels

}  // namespace fsml
