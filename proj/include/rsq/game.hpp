#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rsq/mc.hpp"
#include "rsq/model.hpp"
#include "rsq/pde.hpp"

namespace rsq {

/// J(pi, tau) estimated by Monte Carlo: composition of simulate and price.
PriceEstimate evaluate_J(const ProblemSpec& problem, const RateStrategy& strategy,
                         const StoppingRule& rule, long n, double dt, std::uint64_t seed);

struct Challenger {
    std::string description;
    double value = 0.0;
    double std_error = 0.0;
    double margin = 0.0;  // challenger - center
    bool pass = false;
};

struct SaddleReport {
    std::string center_desc;
    PriceEstimate center;
    double pde_value = 0.0;
    double grid_bias = 0.0;  // allowance from one grid-refinement step
    std::vector<Challenger> left;    // stopping-rule challengers, margins expected <= 0
    std::vector<Challenger> right;   // strategy challengers, margins expected >= 0
    bool left_ok = false;
    bool right_ok = false;
    bool center_consistent = false;  // center vs PDE value at 3 sigma + bias
    bool pass = false;

    std::string to_table() const;
};

/// Default challenger suites: left = {immediate, at-maturity, regression best
/// response}, right = {5 random admissible constants, 2 feedback strategies,
/// the opposite-extremal matrix}.
std::vector<RateStrategy> default_right_challengers(const RateBoxes& boxes, Monotonicity mono,
                                                    std::uint64_t seed);

RateStrategy feedback_at_running_max(RateBoxes boxes);
RateStrategy feedback_level_threshold(RateBoxes boxes, double threshold);

/**
 * Certifies J(pi_hat, tau) <= J(pi_hat, tau_hat) <= J(pi, tau_hat) at 3 sigma
 * for the candidate pair (extremal matrix, its PDE exercise boundary).
 * Empty challenger lists select the default suites. Challenger estimates run
 * on independent seeds; the right-hand verdict carries a grid-bias allowance.
 * Refuses non-monotone sigma.
 */
SaddleReport saddle_check(const ProblemSpec& problem, const RateBoxes& boxes,
                          std::vector<StoppingRule> left_rules,
                          std::vector<RateStrategy> right_strategies, long n, double dt,
                          std::uint64_t seed, const Grid& grid, const SolverParams& params = {});

/// Price move under one nx/nt doubling, used as the bias allowance
/// (2x the Richardson estimate).
double grid_bias_allowance(const ProblemSpec& problem, const RateMatrix& q, const Grid& grid,
                           const SolverParams& params = {});

}  // namespace rsq
