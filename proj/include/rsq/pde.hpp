#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rsq/model.hpp"

namespace rsq {

enum class Transform { Identity, Log };

/// Space x time-to-maturity grid. t_nodes run 0 = t_0 < ... < t_{nt-1} = T.
struct Grid {
    std::vector<double> x_nodes;
    std::vector<double> t_nodes;
    Transform transform = Transform::Identity;

    int nx() const { return static_cast<int>(x_nodes.size()); }
    int nt() const { return static_cast<int>(t_nodes.size()); }
    void validate() const;
};

/// Solver-wide constants; downstream tolerances reference these.
inline constexpr double kSolverTol = 1e-8;
inline constexpr double kMaskTolRel = 1e-9;

struct SolverParams {
    double omega = 1.2;          // PSOR relaxation
    double tol = kSolverTol;     // target accuracy; the sweep stops at tol/10
    int max_iter = 10000;
    int rannacher_layers = 2;    // fully-implicit startup layers
    int max_policy_sweeps = 10;  // per-layer rate-improvement sweeps (HJB)
};

/// Grid covering the diffusion-scaled neighbourhood of x0 (x0 always a node):
/// log-spaced for GBM, linear for CEV and Driftless, per the width rules in
/// the module contract.
Grid build_grid(const ProblemSpec& problem, int nx, int nt, double width_mult);

/// v(x,y,t) on space x regime x time-to-maturity, plus the exercise mask
/// (true where v sits on the payoff). Storage index: (k*m + y)*nx + i.
struct ValueSurface {
    std::vector<double> v;
    std::vector<std::uint8_t> exercise_mask;
    Grid grid;
    ProblemSpec problem;
    int nx = 0, m = 0, nt = 0;

    size_t idx(int i, int y, int k) const {
        return (static_cast<size_t>(k) * m + y) * nx + i;
    }
    double at(int i, int y, int k) const { return v[idx(i, y, k)]; }
    bool exercised(int i, int y, int k) const { return exercise_mask[idx(i, y, k)] != 0; }
    /// Linear interpolation in x at layer k, regime y (0-based).
    double value_at(double x, int y, int k) const;
    /// Price at the problem's initial condition and full horizon.
    double price_at_start() const;
};

/// Rates chosen at every node of the worst-case solve (zero where the regime
/// has no up/down neighbour).
struct RateField {
    std::vector<double> lambda_plus, lambda_minus;
    int nx = 0, m = 0, nt = 0;

    size_t idx(int i, int y, int k) const {
        return (static_cast<size_t>(k) * m + y) * nx + i;
    }
    /// True when the field is the same at every node; fills the implied
    /// constant matrix when it is.
    bool constant_entries(RateMatrix* implied = nullptr) const;
};

/**
 * Linear complementarity solve for a constant rate matrix:
 *   min(-(L^pi - alpha)v, v - g) = 0 per layer, marching from v(.,.,0) = g
 * in time-to-maturity. Crank-Nicolson with Rannacher startup, projected SOR
 * over the full regime block per layer.
 * Throws std::runtime_error if PSOR does not converge.
 */
ValueSurface solve_constant(const ProblemSpec& problem, const RateMatrix& q, const Grid& grid,
                            const SolverParams& params = {});

/**
 * Worst-case variational inequality: same marching scheme, but the rates at
 * every node are the bang-bang selectors evaluated on the previous layer,
 * refreshed by policy-improvement sweeps until the field is stable.
 */
std::pair<ValueSurface, RateField> solve_worstcase_hjb(const ProblemSpec& problem,
                                                       const RateBoxes& boxes, const Grid& grid,
                                                       const SolverParams& params = {});

/// Per-regime exercise thresholds s*(t,y) for the put; NaN where undefined
/// (always at t = 0, and at layers with an empty exercise region).
struct BoundaryCurves {
    std::vector<double> t_nodes;
    std::vector<std::vector<double>> s;  // s[y][k]
};

BoundaryCurves extract_boundary(const ValueSurface& surface);

/// Max absolute nodewise difference; throws on shape mismatch.
double surface_sup_diff(const ValueSurface& a, const ValueSurface& b);

/// One refinement step: midpoints inserted in the solve coordinate
/// (log-space under the Log transform), time step halved.
Grid refine_grid(const Grid& grid);

/// Obstacle / initial-condition / time-monotonicity checks, plus the regime
/// ordering of the value in y when sigma is monotone.
struct SurfaceCheck {
    bool obstacle_ok = false;
    bool initial_ok = false;
    bool time_monotone_ok = false;
    bool regime_monotone_ok = true;
    bool regime_checked = false;
    double worst_obstacle = 0.0;   // max(g - v)
    double worst_time = 0.0;       // max decrease along the time index
    double worst_regime = 0.0;     // max ordering violation across regimes
    bool all_ok() const {
        return obstacle_ok && initial_ok && time_monotone_ok && regime_monotone_ok;
    }
};

SurfaceCheck check_surface_invariants(const ValueSurface& surface);

}  // namespace rsq
