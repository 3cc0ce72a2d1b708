#pragma once

// Execution-mode switch between the serial reference kernels and the
// OpenMP-parallel ones. Both produce bitwise-identical results; the serial
// path exists as the reference the parallel path is tested against.

namespace fsml::exec {

enum class Mode { serial, parallel };

Mode mode();
void set_mode(Mode m);
bool parallel_enabled();

int thread_count();
void set_thread_count(int n);

// RAII guard used by tests to pin a mode within a scope.
class ModeGuard {
  public:
    explicit ModeGuard(Mode m) : saved_(mode()) { set_mode(m); }
    ~ModeGuard() { set_mode(saved_); }
    ModeGuard(const ModeGuard&) = delete;
    ModeGuard& operator=(const ModeGuard&) = delete;

  private:
    Mode saved_;
};

}  // namespace fsml::exec
