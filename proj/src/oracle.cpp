#include "rsq/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rsq/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rsq {

double binomial_american_put(double x0, double K, double r, double sigma, double T, int steps) {
    if (steps < 1) throw std::invalid_argument("binomial: steps must be >= 1");
    if (x0 <= 0.0 || K <= 0.0 || sigma <= 0.0 || T <= 0.0)
        throw std::invalid_argument("binomial: x0, K, sigma, T must be > 0");
    if (r < 0.0) throw std::invalid_argument("binomial: r must be >= 0");

    const double dt = T / steps;
    const double u = std::exp(sigma * std::sqrt(dt));
    const double d = 1.0 / u;
    const double grow = std::exp(r * dt);
    const double p = (grow - d) / (u - d);
    const double disc = std::exp(-r * dt);

    std::vector<double> value(static_cast<size_t>(steps) + 1);
    // terminal layer: x0 * u^j * d^(steps-j)
    for (int j = 0; j <= steps; ++j) {
        double x = x0 * std::pow(u, j) * std::pow(d, steps - j);
        value[static_cast<size_t>(j)] = std::max(K - x, 0.0);
    }
    for (int n = steps - 1; n >= 0; --n) {
        for (int j = 0; j <= n; ++j) {
            double cont = disc * (p * value[static_cast<size_t>(j) + 1] +
                                  (1.0 - p) * value[static_cast<size_t>(j)]);
            double x = x0 * std::pow(u, j) * std::pow(d, n - j);
            value[static_cast<size_t>(j)] = std::max(cont, std::max(K - x, 0.0));
        }
    }
    return value[0];
}

std::vector<RateMatrix> endpoint_matrices(const RateBoxes& boxes) {
    boxes.validate();
    const int m = boxes.regimes();
    const int n_boxes = 2 * (m - 1);
    if (n_boxes > 12) throw std::invalid_argument("endpoint_matrices: too many boxes");
    const size_t total = static_cast<size_t>(1) << n_boxes;
    if (total > 4096) throw std::invalid_argument("endpoint_matrices: too many combinations");

    std::vector<RateMatrix> out;
    out.reserve(total);
    for (size_t bits = 0; bits < total; ++bits) {
        RateMatrix q(m);
        for (int k = 0; k + 1 < m; ++k) {
            const Interval& up = boxes.plus[static_cast<size_t>(k)];
            const Interval& dn = boxes.minus[static_cast<size_t>(k)];
            q.at(k, k + 1) = (bits >> (2 * k)) & 1 ? up.hi : up.lo;
            q.at(k + 1, k) = (bits >> (2 * k + 1)) & 1 ? dn.hi : dn.lo;
        }
        for (int i = 0; i < m; ++i) {
            double off = 0.0;
            for (int j = 0; j < m; ++j)
                if (j != i) off += q.at(i, j);
            q.at(i, i) = -off;
        }
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<RateMatrix> sample_admissible_matrices(const RateBoxes& boxes, int n,
                                                   std::uint64_t seed) {
    boxes.validate();
    const int m = boxes.regimes();
    const std::uint64_t key = stream_key(seed, 0x5A1Dull);
    std::vector<RateMatrix> out;
    out.reserve(static_cast<size_t>(n));
    for (int s = 0; s < n; ++s) {
        RateMatrix q(m);
        for (int k = 0; k + 1 < m; ++k) {
            const Interval& up = boxes.plus[static_cast<size_t>(k)];
            const Interval& dn = boxes.minus[static_cast<size_t>(k)];
            double u1 = uniform_at(key, static_cast<std::uint64_t>(s), 0,
                                   static_cast<std::uint32_t>(2 * k));
            double u2 = uniform_at(key, static_cast<std::uint64_t>(s), 0,
                                   static_cast<std::uint32_t>(2 * k + 1));
            q.at(k, k + 1) = up.lo + u1 * (up.hi - up.lo);
            q.at(k + 1, k) = dn.lo + u2 * (dn.hi - dn.lo);
        }
        for (int i = 0; i < m; ++i) {
            double off = 0.0;
            for (int j = 0; j < m; ++j)
                if (j != i) off += q.at(i, j);
            q.at(i, i) = -off;
        }
        out.push_back(std::move(q));
    }
    return out;
}

BruteForceResult brute_force_min(const ProblemSpec& problem, const RateBoxes& boxes,
                                 const Grid& grid, int per_box_samples,
                                 const SolverParams& params) {
    boxes.validate();
    if (per_box_samples < 2)
        throw std::invalid_argument("brute_force_min: per_box_samples must be >= 2");
    const int m = boxes.regimes();
    if (m != problem.regimes())
        throw std::invalid_argument("brute_force_min: box regime count mismatch");

    const int n_boxes = 2 * (m - 1);
    double product = 1.0;
    for (int b = 0; b < n_boxes; ++b) product *= per_box_samples;
    if (product > 1e4)
        throw std::invalid_argument(
            "brute_force_min: sample product exceeds 10^4; configure coarser sampling");

    // sample points per box, endpoints always included
    auto samples_of = [per_box_samples](const Interval& iv) {
        std::vector<double> s(static_cast<size_t>(per_box_samples));
        for (int j = 0; j < per_box_samples; ++j)
            s[static_cast<size_t>(j)] = iv.lo + (iv.hi - iv.lo) * j / (per_box_samples - 1);
        s.front() = iv.lo;
        s.back() = iv.hi;
        return s;
    };
    std::vector<std::vector<double>> box_samples;
    for (int k = 0; k + 1 < m; ++k) box_samples.push_back(samples_of(boxes.plus[k]));
    for (int k = 0; k + 1 < m; ++k) box_samples.push_back(samples_of(boxes.minus[k]));

    const int total = static_cast<int>(product);
    std::vector<RateMatrix> matrices;
    matrices.reserve(static_cast<size_t>(total));
    std::vector<int> odo(static_cast<size_t>(n_boxes), 0);
    for (int t = 0; t < total; ++t) {
        RateMatrix q(m);
        for (int k = 0; k + 1 < m; ++k) {
            q.at(k, k + 1) = box_samples[k][static_cast<size_t>(odo[k])];
            q.at(k + 1, k) = box_samples[(m - 1) + k][static_cast<size_t>(odo[(m - 1) + k])];
        }
        for (int i = 0; i < m; ++i) {
            double off = 0.0;
            for (int j = 0; j < m; ++j)
                if (j != i) off += q.at(i, j);
            q.at(i, i) = -off;
        }
        matrices.push_back(std::move(q));
        // odometer: last box fastest, so the first box index is the slowest digit
        for (int b = n_boxes - 1; b >= 0; --b) {
            if (++odo[b] < per_box_samples) break;
            odo[b] = 0;
        }
    }

    std::vector<double> prices(matrices.size(), 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int t = 0; t < total; ++t) {
        ValueSurface sf = solve_constant(problem, matrices[static_cast<size_t>(t)], grid, params);
        prices[static_cast<size_t>(t)] = sf.price_at_start();
    }

    BruteForceResult res;
    res.evaluated = total;
    size_t best = 0;
    for (size_t t = 1; t < prices.size(); ++t)
        if (prices[t] < prices[best]) best = t;
    res.min_price = prices[best];
    res.argmin = matrices[best];
    return res;
}

}  // namespace rsq
