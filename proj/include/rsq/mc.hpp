#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rsq/model.hpp"
#include "rsq/pde.hpp"

namespace rsq {

/// Simulated (X, Y) trajectories. Path-major storage: state s of path p sits
/// at index p*(n_steps+1)+s. Regimes are 1-based and change by at most one
/// per step.
struct PathBatch {
    int n_paths = 0;
    int n_steps = 0;  // intervals; states per path = n_steps + 1
    int m = 1;
    double dt = 0.0;
    std::vector<double> times;
    std::vector<double> x;
    std::vector<std::int32_t> y;
    std::uint64_t seed = 0;
    std::uint64_t diffusion_key = 0;  // derived stream keys (seed pair)
    std::uint64_t chain_key = 0;
    std::int64_t floor_events = 0;
    bool floor_warning = false;

    std::size_t idx(int p, int s) const {
        return static_cast<std::size_t>(p) * (n_steps + 1) + s;
    }
    double floor_fraction() const {
        return n_paths == 0 ? 0.0
                            : static_cast<double>(floor_events) /
                                  (static_cast<double>(n_paths) * n_steps);
    }
};

struct PairRates {
    double up = 0.0;
    double down = 0.0;
};

/// Feedback rules see only the current time, state and running path maximum.
using FeedbackFn = std::function<PairRates(double t, double x, int y, double running_max)>;

/// Adapted rate strategy. Emitted rates are always clamped into the boxes.
struct RateStrategy {
    enum class Kind { Constant, Extremal, RandomAdmissible, Feedback };

    Kind kind = Kind::Constant;
    RateMatrix q;            // Constant / Extremal (resolved at construction)
    RateBoxes boxes;         // RandomAdmissible / Feedback clamping
    std::uint64_t rate_seed = 0;
    FeedbackFn rule;
    std::string name = "constant";

    static RateStrategy constant(RateMatrix q, std::string name = "constant");
    static RateStrategy extremal(const RateBoxes& boxes, Monotonicity mono);
    static RateStrategy random_admissible(RateBoxes boxes, std::uint64_t seed);
    static RateStrategy feedback(RateBoxes boxes, FeedbackFn rule, std::string name);
    const std::string& describe() const { return name; }
};

/// One fitted continuation-value slice: polynomial in the standardized
/// coordinate z = (x - center)/spread. Empty coef means "never stop here".
struct RegressionSlice {
    double center = 0.0;
    double spread = 1.0;
    std::vector<double> coef;
};

/// Stopping rule deciding from (t, X_t, Y_t) only.
struct StoppingRule {
    enum class Kind { Immediate, AtMaturity, Boundary, Regression };

    Kind kind = Kind::Immediate;
    // Boundary
    BoundaryCurves curves;
    double horizon = 0.0;
    // Regression
    int degree = 0;
    std::vector<std::vector<RegressionSlice>> slices;  // [step][regime]
    std::vector<double> fit_times;
    std::string name = "immediate";

    static StoppingRule immediate();
    static StoppingRule at_maturity();
    static StoppingRule boundary(BoundaryCurves curves, double horizon);
    const std::string& describe() const { return name; }

    /// Threshold lookup in remaining time for the Boundary kind; NaN when the
    /// rule never stops at that remaining time.
    double boundary_level(double remaining, int y) const;
    bool stops(int step, int last_step, double t, double x, int y, const PayoffSpec& g) const;
};

/**
 * Euler-Maruyama simulation of (X, Y) under the strategy's adapted rates.
 * One regime move at most per step, switch probability 1 - exp(-rate*dt),
 * direction proportional to the two rates. Deterministic in (seed, n, dt)
 * regardless of thread count. OpenMP-parallel over paths.
 */
PathBatch simulate(const ProblemSpec& problem, const RateStrategy& strategy, long n, double dt,
                   std::uint64_t seed);

/// Serial reference for the parallel kernel; bit-identical output.
PathBatch simulate_serial(const ProblemSpec& problem, const RateStrategy& strategy, long n,
                          double dt, std::uint64_t seed);

struct PriceEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
};

/// Mean of e^{-alpha*tau} g(X_tau) with tau the first rule stop (capped at
/// the horizon), plus its standard error. Pairwise reduction.
PriceEstimate price(const PathBatch& paths, const StoppingRule& rule, double alpha,
                    const PayoffSpec& payoff);

/// Fused simulate+price: identical estimates to price(simulate(...), ...)
/// without materializing the batch. Used for large path counts.
PriceEstimate simulate_and_price(const ProblemSpec& problem, const RateStrategy& strategy,
                                 const StoppingRule& rule, long n, double dt, std::uint64_t seed);

/**
 * Least-squares continuation-value regression per regime (polynomial basis,
 * in-the-money paths only), backward induction over the batch's steps.
 * The returned rule is usable on an independent batch with the same step
 * grid. Throws on a degenerate regression matrix.
 */
StoppingRule fit_regression_rule(const PathBatch& paths, double alpha, const PayoffSpec& payoff,
                                 int basis_degree);

struct MomentReport {
    double empirical = 0.0;
    double bound = 0.0;
    double q = 0.0;
    double k_growth = 0.0;
    bool pass = false;
};

/**
 * Empirical check of the moment estimate
 *   E sup_{s<=t} |X_s|^q  <=  ((1 + 4 x0^2) e^{8 K^2 t (4+t)})^{q/2}.
 * Linear-growth dynamics only (CEV refused). Multi-regime problems need an
 * explicit chain matrix.
 */
MomentReport moment_bound_check(const ProblemSpec& problem, double k_growth, double q_exp,
                                double t, long n, double dt, std::uint64_t seed,
                                const RateMatrix* chain = nullptr);

}  // namespace rsq
