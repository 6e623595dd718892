#pragma once

#include <cmath>
#include <cstddef>

namespace rsq {

/// Fixed-tree pairwise summation: the reduction order depends only on the
/// length, never on thread count, so parallel producers stay reproducible.
inline double pairwise_sum(const double* a, std::size_t n) {
    if (n <= 32) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += a[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(a, h) + pairwise_sum(a + h, n - h);
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

inline MeanSe pairwise_mean_se(const double* a, std::size_t n, double* scratch) {
    MeanSe out;
    if (n == 0) return out;
    out.mean = pairwise_sum(a, n) / static_cast<double>(n);
    if (n < 2) return out;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - out.mean;
        scratch[i] = d * d;
    }
    const double ssd = pairwise_sum(scratch, n);
    out.se = std::sqrt(ssd / (static_cast<double>(n) - 1.0) / static_cast<double>(n));
    return out;
}

}  // namespace rsq
