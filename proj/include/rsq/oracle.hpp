#pragma once

#include <cstdint>
#include <vector>

#include "rsq/model.hpp"
#include "rsq/pde.hpp"

namespace rsq {

/// Cox-Ross-Rubinstein recombining tree with early exercise at every node.
/// r is both the drift and the discount rate.
double binomial_american_put(double x0, double K, double r, double sigma, double T, int steps);

/// Every inf/sup combination of the box endpoints as a valid rate matrix.
/// Throws if the combination count exceeds 4096.
std::vector<RateMatrix> endpoint_matrices(const RateBoxes& boxes);

/// n matrices with every super/sub-diagonal entry drawn uniformly from its
/// box; deterministic in the seed.
std::vector<RateMatrix> sample_admissible_matrices(const RateBoxes& boxes, int n,
                                                   std::uint64_t seed);

struct BruteForceResult {
    double min_price = 0.0;
    RateMatrix argmin;
    int evaluated = 0;
};

/// Exhaustive minimization of the start-price over the Cartesian product of
/// per-box sample rates (endpoints always included). Ties keep the first
/// matrix in odometer order (plus boxes first, low sample index first).
/// Refuses products larger than 10^4.
BruteForceResult brute_force_min(const ProblemSpec& problem, const RateBoxes& boxes,
                                 const Grid& grid, int per_box_samples,
                                 const SolverParams& params = {});

}  // namespace rsq
