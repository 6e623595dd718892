#include "rsq/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace rsq {

namespace {

double interp_table(const std::vector<double>& xs, const std::vector<double>& vs, double x) {
    if (x <= xs.front()) return vs.front();
    if (x >= xs.back()) return vs.back();
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    size_t j = static_cast<size_t>(it - xs.begin());
    double w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    return vs[j - 1] + w * (vs[j] - vs[j - 1]);
}

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

double DiffusionSpec::operator()(double x) const {
    if (xs.empty()) return value;
    return interp_table(xs, vs, x);
}

double DiffusionSpec::max_value() const {
    if (xs.empty()) return value;
    return *std::max_element(vs.begin(), vs.end());
}

void DiffusionSpec::validate() const {
    if (xs.empty()) {
        require(value > 0.0, "diffusion spec: constant a must be > 0");
        return;
    }
    require(xs.size() == vs.size() && xs.size() >= 2,
            "diffusion spec: table needs matching xs/vs with >= 2 points");
    for (size_t i = 1; i < xs.size(); ++i)
        require(xs[i] > xs[i - 1], "diffusion spec: breakpoints must be strictly increasing");
    for (double v : vs) require(v > 0.0, "diffusion spec: a(x) must be > 0 everywhere");
}

PayoffSpec PayoffSpec::put(double strike, double holder_beta) {
    PayoffSpec p;
    p.kind = Kind::Put;
    p.strike = strike;
    p.holder_beta = holder_beta;
    p.validate();
    return p;
}

PayoffSpec PayoffSpec::table(std::vector<double> xs, std::vector<double> vs, double holder_beta) {
    PayoffSpec p;
    p.kind = Kind::Table;
    p.xs = std::move(xs);
    p.vs = std::move(vs);
    p.holder_beta = holder_beta;
    p.validate();
    return p;
}

double PayoffSpec::operator()(double x) const {
    if (kind == Kind::Put) return std::max(strike - x, 0.0);
    return interp_table(xs, vs, x);
}

double PayoffSpec::scale() const {
    double s = (kind == Kind::Put) ? strike : *std::max_element(vs.begin(), vs.end());
    return s > 0.0 ? s : 1.0;
}

void PayoffSpec::validate() const {
    require(holder_beta > 0.0 && holder_beta <= 1.0, "payoff: holder_beta must lie in (0,1]");
    if (kind == Kind::Put) {
        require(strike > 0.0, "payoff: put strike must be > 0");
        return;
    }
    require(xs.size() == vs.size() && xs.size() >= 2,
            "payoff: table needs matching breakpoints/values with >= 2 points");
    for (size_t i = 1; i < xs.size(); ++i)
        require(xs[i] > xs[i - 1], "payoff: breakpoints must be strictly increasing");
    for (double v : vs) require(v >= 0.0, "payoff: values must be nonnegative");
}

double ProblemSpec::sigma_max() const {
    return *std::max_element(sigma.begin(), sigma.end());
}

double ProblemSpec::diffusion_coeff(double x) const {
    switch (dynamics) {
        case DynamicsType::GBM: return x;
        case DynamicsType::CEV: return std::pow(x, gamma);
        case DynamicsType::Driftless: return a(x);
    }
    return 0.0;
}

double ProblemSpec::drift_coeff(double x) const {
    return dynamics == DynamicsType::GBM ? mu * x : 0.0;
}

void ProblemSpec::validate() const {
    require(!sigma.empty(), "problem: at least one regime required");
    for (double s : sigma) require(s > 0.0, "problem: sigma must be > 0 in every regime");
    require(horizon_T > 0.0, "problem: horizon must be > 0");
    require(alpha >= 0.0, "problem: discount rate must be >= 0");
    require(y0 >= 1 && y0 <= regimes(), "problem: y0 out of range");
    if (dynamics == DynamicsType::CEV) {
        require(gamma > 1.0, "problem: CEV exponent gamma must be > 1");
        require(x0 > 0.0, "problem: CEV requires x0 > 0");
    }
    if (dynamics == DynamicsType::GBM) require(x0 > 0.0, "problem: GBM requires x0 > 0");
    if (dynamics == DynamicsType::Driftless) a.validate();
    payoff.validate();
}

ValidationReport validate_rate_matrix(const RateMatrix& q) {
    if (q.q.size() != static_cast<size_t>(q.m) * q.m)
        throw std::invalid_argument("rate matrix: storage does not match m x m shape");

    ValidationReport rep;
    char buf[128];
    for (int i = 0; i < q.m; ++i) {
        double row_sum = 0.0;
        for (int j = 0; j < q.m; ++j) {
            double v = q.at(i, j);
            row_sum += v;
            if (i != j && v < 0.0) {
                std::snprintf(buf, sizeof buf, "negative off-diagonal %.12g", v);
                rep.violations.push_back({i + 1, j + 1, buf});
            }
            if (std::abs(i - j) > 1 && v != 0.0) {
                std::snprintf(buf, sizeof buf, "band-width > 1: entry %.12g", v);
                rep.violations.push_back({i + 1, j + 1, buf});
            }
        }
        if (std::abs(row_sum) > 1e-12) {
            std::snprintf(buf, sizeof buf, "row sum %.12g exceeds 1e-12", row_sum);
            rep.violations.push_back({i + 1, 0, buf});
        }
    }
    rep.ok = rep.violations.empty();
    return rep;
}

void RateBoxes::validate() const {
    if (minus.size() != plus.size())
        throw std::invalid_argument("rate boxes: plus/minus lists must both have m-1 intervals");
    auto check = [](const Interval& iv, const char* which) {
        if (!(iv.lo > 0.0) || !(iv.hi >= iv.lo) || !std::isfinite(iv.hi))
            throw std::invalid_argument(std::string("rate boxes: ") + which +
                                        " interval must satisfy 0 < lo <= hi < inf");
    };
    for (const auto& iv : plus) check(iv, "plus");
    for (const auto& iv : minus) check(iv, "minus");
}

bool is_admissible(const RateMatrix& q, const RateBoxes& boxes) {
    if (q.m != boxes.regimes())
        throw std::invalid_argument("is_admissible: dimension mismatch between matrix and boxes");
    for (int k = 0; k + 1 < q.m; ++k) {
        if (!boxes.plus[k].contains(q.at(k, k + 1))) return false;
        if (!boxes.minus[k].contains(q.at(k + 1, k))) return false;
    }
    return true;
}

Monotonicity sigma_monotonicity(const std::vector<double>& sigma) {
    if (sigma.empty()) throw std::invalid_argument("sigma_monotonicity: empty sigma");
    if (sigma.size() == 1) return Monotonicity::Trivial;
    bool inc = true, dec = true;
    for (size_t i = 1; i < sigma.size(); ++i) {
        inc = inc && sigma[i] > sigma[i - 1];
        dec = dec && sigma[i] < sigma[i - 1];
    }
    if (inc) return Monotonicity::Increasing;
    if (dec) return Monotonicity::Decreasing;
    return Monotonicity::NonMonotone;
}

const char* to_string(Monotonicity m) {
    switch (m) {
        case Monotonicity::Increasing: return "increasing";
        case Monotonicity::Decreasing: return "decreasing";
        case Monotonicity::NonMonotone: return "non-monotone";
        case Monotonicity::Trivial: return "trivial";
    }
    return "?";
}

}  // namespace rsq
