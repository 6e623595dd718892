#pragma once

#include "rsq/model.hpp"

namespace rsq {

/// Worst-case constant rate matrix. Increasing sigma: super-diagonal at the
/// box infimum, sub-diagonal at the supremum; swapped when sigma decreases.
/// Throws std::invalid_argument for non-monotone sigma (no constant
/// extremizer is available there).
RateMatrix extremal_matrix(const RateBoxes& boxes, Monotonicity mono);

struct PointRates {
    double lambda_plus = 0.0;   // 0 at the top regime
    double lambda_minus = 0.0;  // 0 at the bottom regime
};

/// Exact minimizer of the rate-linear coupling term at one node.
/// dv_up = w(x,y+1,t) - w(x,y,t), dv_down = w(x,y-1,t) - w(x,y,t); either is
/// ignored at the corresponding boundary regime. Ties (dv exactly 0) resolve
/// to the extremal-matrix entries of the increasing case, so a regime-flat
/// surface reproduces that matrix node for node.
inline PointRates pointwise_rates(double dv_up, double dv_down, int y, const RateBoxes& boxes) {
    const int m = boxes.regimes();
    PointRates r;
    if (y < m) {
        const Interval& box = boxes.plus[static_cast<size_t>(y - 1)];
        r.lambda_plus = (dv_up < 0.0) ? box.hi : box.lo;
    }
    if (y > 1) {
        const Interval& box = boxes.minus[static_cast<size_t>(y - 2)];
        r.lambda_minus = (dv_down > 0.0) ? box.lo : box.hi;
    }
    return r;
}

}  // namespace rsq
