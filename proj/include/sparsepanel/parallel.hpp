#pragma once

#include <cstddef>
#include <exception>

namespace sparsepanel {

// Serial is the reference path; OpenMP runs the same per-index work on a team.
// Every parallel loop writes only to slot i and draws only from stream i, so the
// two paths produce bit-identical results.
enum class ExecPolicy { serial, openmp };

struct Exec {
    ExecPolicy policy = ExecPolicy::openmp;
    int threads = 0;  // 0 = OpenMP default

    static Exec serial() { return Exec{ExecPolicy::serial, 1}; }
    static Exec openmp(int threads = 0) { return Exec{ExecPolicy::openmp, threads}; }
};

template <class F>
void parallel_for(std::ptrdiff_t n, const Exec& exec, F&& f) {
    if (exec.policy == ExecPolicy::serial || n < 2) {
        for (std::ptrdiff_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::exception_ptr error;
    auto guarded = [&](std::ptrdiff_t i) {
        try {
            f(i);
        } catch (...) {
#pragma omp critical(sparsepanel_parallel_error)
            if (!error) error = std::current_exception();
        }
    };
    if (exec.threads > 0) {
#pragma omp parallel for schedule(static) num_threads(exec.threads)
        for (std::ptrdiff_t i = 0; i < n; ++i) guarded(i);
    } else {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) guarded(i);
    }
    if (error) std::rethrow_exception(error);
}

// Dynamic schedule for coarse, uneven tasks such as Monte Carlo replications.
template <class F>
void parallel_for_dynamic(std::ptrdiff_t n, const Exec& exec, F&& f) {
    if (exec.policy == ExecPolicy::serial || n < 2) {
        for (std::ptrdiff_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::exception_ptr error;
    auto guarded = [&](std::ptrdiff_t i) {
        try {
            f(i);
        } catch (...) {
#pragma omp critical(sparsepanel_parallel_error)
            if (!error) error = std::current_exception();
        }
    };
    if (exec.threads > 0) {
#pragma omp parallel for schedule(dynamic, 1) num_threads(exec.threads)
        for (std::ptrdiff_t i = 0; i < n; ++i) guarded(i);
    } else {
#pragma omp parallel for schedule(dynamic, 1)
        for (std::ptrdiff_t i = 0; i < n; ++i) guarded(i);
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace sparsepanel
