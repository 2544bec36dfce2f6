#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace daa {

enum class Exec { kSerial, kParallel };

/// Runs fn(i) for i in [0, n). Under kParallel the iterations are spread
/// over OpenMP threads; either way the exception thrown by the lowest
/// failing index is rethrown after the loop.
template <class Fn>
void parallel_for(std::size_t n, Exec exec, Fn&& fn) {
    std::vector<std::exception_ptr> errors(n);
    if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
            try {
                fn(static_cast<std::size_t>(i));
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Number of OpenMP threads a parallel region would use (1 without OpenMP).
int max_threads();
void set_threads(int n);

}  // namespace daa
