#include "rsq/extremal.hpp"

#include <stdexcept>

namespace rsq {

RateMatrix extremal_matrix(const RateBoxes& boxes, Monotonicity mono) {
    boxes.validate();
    if (mono == Monotonicity::NonMonotone)
        throw std::invalid_argument(
            "extremal_matrix: sigma is non-monotone; no constant extremal matrix is known. "
            "Use the pointwise worst-case solve instead.");

    const int m = boxes.regimes();
    RateMatrix q(m);
    if (mono == Monotonicity::Trivial || m == 1) return q;

    for (int k = 0; k + 1 < m; ++k) {
        double up = (mono == Monotonicity::Increasing) ? boxes.plus[k].lo : boxes.plus[k].hi;
        double down = (mono == Monotonicity::Increasing) ? boxes.minus[k].hi : boxes.minus[k].lo;
        q.at(k, k + 1) = up;
        q.at(k + 1, k) = down;
    }
    for (int i = 0; i < m; ++i) {
        double off = 0.0;
        for (int j = 0; j < m; ++j)
            if (j != i) off += q.at(i, j);
        q.at(i, i) = -off;
    }
    return q;
}

}  // namespace rsq
