// Wall-clock comparison of the serial reference kernels against the
// OpenMP-parallel ones. Both paths share accumulation order, so outputs are
// checked bitwise equal before timing is reported.
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "fsml/episodes.hpp"
#include "fsml/evaluation.hpp"
#include "fsml/exec.hpp"
#include "fsml/kernels.hpp"
#include "fsml/network.hpp"
#include "fsml/noise_analysis.hpp"
#include "fsml/rng.hpp"

using namespace fsml;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm-up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const std::string& name, double serial_ms, double parallel_ms, bool equal) {
    std::printf("%-22s %10.3f ms %10.3f ms   x%.2f   %s\n", name.c_str(), serial_ms,
                parallel_ms, serial_ms / parallel_ms, equal ? "outputs equal" : "OUTPUTS DIFFER");
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Matrix m(rows, cols);
    rng::Rng r(seed);
    for (double& v : m.data) v = r.normal();
    return m;
}

void bench_linear(int reps) {
    const std::size_t batch = 512, in = 256, out = 256;
    const Matrix x = random_matrix(batch, in, 1);
    const Matrix w = random_matrix(out, in, 2);
    const std::vector<double> b(out, 0.1);
    const Matrix dy = random_matrix(batch, out, 3);

    Matrix y_s(batch, out), y_p(batch, out);
    const double fwd_s = time_ms(
        [&] { kernels::linear_forward_serial(w.data.data(), b.data(), out, in, x, y_s); }, reps);
    const double fwd_p = time_ms(
        [&] { kernels::linear_forward_parallel(w.data.data(), b.data(), out, in, x, y_p); }, reps);
    report("linear_forward", fwd_s, fwd_p, y_s == y_p);

    Matrix dw_s(out, in), dw_p(out, in);
    std::vector<double> db_s(out), db_p(out);
    const double bwd_s = time_ms(
        [&] { kernels::linear_backward_params_serial(x, dy, dw_s.data.data(), db_s.data()); },
        reps);
    const double bwd_p = time_ms(
        [&] { kernels::linear_backward_params_parallel(x, dy, dw_p.data.data(), db_p.data()); },
        reps);
    report("linear_backward", bwd_s, bwd_p, dw_s == dw_p && db_s == db_p);
}

void bench_monte_carlo(int reps) {
    const long long trials = 1 << 20;
    MonteCarloEstimate e_s{}, e_p{};
    const double ms_s = time_ms([&] { exec::ModeGuard g(exec::Mode::serial); e_s = monte_carlo_clean_prob(5, 0.3, trials, 7); }, reps);
    const double ms_p = time_ms([&] { exec::ModeGuard g(exec::Mode::parallel); e_p = monte_carlo_clean_prob(5, 0.3, trials, 7); }, reps);
    report("monte_carlo 2^20", ms_s, ms_p, e_s.estimate == e_p.estimate);
}

void bench_evaluate(int reps) {
    const SplitDataset test = generate_synthetic(10, 8, 4.0, 1.0, 30, 11, Split::test, 1);
    NetworkSpec spec;
    spec.layer_widths = {8, 16, 8};
    const ParamVector theta = init_network(spec, rng::derive(11, rng::stream::init));
    const TaskSpec task{5, 5, 2};
    EvalConfig cfg;
    cfg.num_tasks = 256;
    cfg.runs = 1;

    EvalResult r_s{}, r_p{};
    const double ms_s = time_ms([&] { exec::ModeGuard g(exec::Mode::serial); r_s = evaluate(theta, spec, test, task, cfg, EvalMode::zero_head, 13); }, reps);
    const double ms_p = time_ms([&] { exec::ModeGuard g(exec::Mode::parallel); r_p = evaluate(theta, spec, test, task, cfg, EvalMode::zero_head, 13); }, reps);
    report("evaluate 256 tasks", ms_s, ms_p, r_s.mean_accuracy == r_p.mean_accuracy);
}

}  // namespace

int main() {
    std::printf("threads available: %d\n", exec::thread_count());
    std::printf("%-22s %13s %13s %7s\n", "kernel", "serial", "parallel", "speedup");
    bench_linear(10);
    bench_monte_carlo(5);
    bench_evaluate(3);
    return 0;
}
