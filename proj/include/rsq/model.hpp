#pragma once

#include <string>
#include <vector>

namespace rsq {

enum class DynamicsType { Driftless, GBM, CEV };

/// Diffusion coefficient a(x) for the driftless dynamics: either a constant
/// or a piecewise-linear table (flat extrapolation beyond the breakpoints).
struct DiffusionSpec {
    std::vector<double> xs;   // empty => constant `value`
    std::vector<double> vs;
    double value = 1.0;

    double operator()(double x) const;
    double max_value() const;
    void validate() const;
};

struct PayoffSpec {
    enum class Kind { Put, Table };

    Kind kind = Kind::Put;
    double strike = 0.0;            // Put
    std::vector<double> xs, vs;     // Table: sorted breakpoints, nonnegative values
    double holder_beta = 1.0;       // declared Holder exponent, metadata only

    double operator()(double x) const;
    double scale() const;           // strike for Put, max value for Table
    bool is_put() const { return kind == Kind::Put; }
    void validate() const;

    static PayoffSpec put(double strike, double holder_beta = 1.0);
    static PayoffSpec table(std::vector<double> xs, std::vector<double> vs,
                            double holder_beta = 1.0);
};

/// Full pricing problem. Regimes are indexed 1..m at the API surface;
/// sigma[y-1] is the volatility multiplier in regime y.
struct ProblemSpec {
    DynamicsType dynamics = DynamicsType::GBM;
    double mu = 0.0;                // GBM rate of return / year
    double gamma = 0.0;             // CEV exponent, > 1
    DiffusionSpec a;                // Driftless only
    std::vector<double> sigma;
    PayoffSpec payoff;
    double horizon_T = 1.0;
    double alpha = 0.0;             // discount rate / year
    double x0 = 0.0;
    int y0 = 1;                     // initial regime, 1-based

    int regimes() const { return static_cast<int>(sigma.size()); }
    double sigma_max() const;
    /// a(x): x for GBM, x^gamma for CEV, table/constant for Driftless.
    double diffusion_coeff(double x) const;
    /// Drift term of the SDE: mu*x for GBM, zero otherwise.
    double drift_coeff(double x) const;
    void validate() const;          // throws std::invalid_argument
};

/// Constant m x m Q-matrix. Off-diagonal support is tridiagonal.
struct RateMatrix {
    int m = 1;
    std::vector<double> q;          // row-major, m*m

    RateMatrix() : q(1, 0.0) {}
    explicit RateMatrix(int m_) : m(m_), q(static_cast<size_t>(m_) * m_, 0.0) {}

    double& at(int i, int j) { return q[static_cast<size_t>(i) * m + j]; }
    double at(int i, int j) const { return q[static_cast<size_t>(i) * m + j]; }
    /// Rate out of regime y (0-based) upward; 0 at the top regime.
    double up_rate(int y) const { return y + 1 < m ? at(y, y + 1) : 0.0; }
    double down_rate(int y) const { return y > 0 ? at(y, y - 1) : 0.0; }
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const { return lo <= v && v <= hi; }
};

/// Compact boxes constraining the admissible rates: plus[k] = A^+_{k+1}
/// (rate regime k+1 -> k+2, 1-based), minus[k] = A^-_{k+2} (rate k+2 -> k+1).
struct RateBoxes {
    std::vector<Interval> plus;
    std::vector<Interval> minus;

    int regimes() const { return static_cast<int>(plus.size()) + 1; }
    void validate() const;
};

struct RateViolation {
    int row = 0, col = 0;           // 1-based, 0 when not cell-specific
    std::string what;
};

struct ValidationReport {
    bool ok = true;
    std::vector<RateViolation> violations;
};

/// Q-matrix admissibility as a generator: nonnegative off-diagonals, zero row
/// sums (1e-12), tridiagonal support.
ValidationReport validate_rate_matrix(const RateMatrix& q);

/// Closed-interval membership of every super/sub-diagonal entry.
/// Throws std::invalid_argument on dimension mismatch.
bool is_admissible(const RateMatrix& q, const RateBoxes& boxes);

enum class Monotonicity { Increasing, Decreasing, NonMonotone, Trivial };

Monotonicity sigma_monotonicity(const std::vector<double>& sigma);
const char* to_string(Monotonicity m);

}  // namespace rsq
