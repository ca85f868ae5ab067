#pragma once

#include <cstddef>
#include <exception>
#include <span>
#include <vector>

namespace unlearn {

enum class Execution { parallel, serial };

// Evaluates fn(i, item_grad) for every item i in [0, n) and returns the sum of
// the returned values. When grad is non-empty every item writes into its own
// zeroed buffer of grad.size(); buffers and values are then folded in item
// order, so the result is bit-identical between Execution::parallel and
// Execution::serial regardless of thread count.
template <class Fn>
double reduce_items(std::size_t n, std::span<double> grad, Fn&& fn,
                    Execution exec = Execution::parallel) {
    const std::size_t width = grad.size();
    std::vector<double> values(n, 0.0);
    std::vector<double> buffers(width * n, 0.0);
    std::vector<std::exception_ptr> errors(n);

    auto run = [&](std::size_t i) {
        try {
            std::span<double> local = width == 0 ? std::span<double>{}
                                                 : std::span<double>(buffers.data() + i * width, width);
            values[i] = fn(i, local);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };

    const long count = static_cast<long>(n);
    if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
        for (long i = 0; i < count; ++i) {
            run(static_cast<std::size_t>(i));
        }
    } else {
        for (long i = 0; i < count; ++i) {
            run(static_cast<std::size_t>(i));
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }

    if (width > 0) {
        const long w = static_cast<long>(width);
        if (exec == Execution::parallel) {
#pragma omp parallel for schedule(static)
            for (long j = 0; j < w; ++j) {
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += buffers[i * width + static_cast<std::size_t>(j)];
                }
                grad[static_cast<std::size_t>(j)] += acc;
            }
        } else {
            for (long j = 0; j < w; ++j) {
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += buffers[i * width + static_cast<std::size_t>(j)];
                }
                grad[static_cast<std::size_t>(j)] += acc;
            }
        }
    }

    double total = 0.0;
    for (double v : values) {
        total += v;
    }
    return total;
}

// Maps fn over [0, n) into a vector, preserving order.
template <class T, class Fn>
std::vector<T> map_items(std::size_t n, Fn&& fn, Execution exec = Execution::parallel) {
    std::vector<T> out(n);
    std::vector<std::exception_ptr> errors(n);
    const long count = static_cast<long>(n);
    auto run = [&](std::size_t i) {
        try {
            out[i] = fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
        for (long i = 0; i < count; ++i) {
            run(static_cast<std::size_t>(i));
        }
    } else {
        for (long i = 0; i < count; ++i) {
            run(static_cast<std::size_t>(i));
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return out;
}

}  // namespace unlearn
