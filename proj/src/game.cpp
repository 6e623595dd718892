#include "rsq/game.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "rsq/extremal.hpp"

namespace rsq {

namespace {

std::uint64_t challenger_seed(std::uint64_t base, std::uint64_t tag) {
    return base + 0x9E3779B97F4A7C15ull * (tag + 1);
}

Monotonicity opposite(Monotonicity mono) {
    if (mono == Monotonicity::Increasing) return Monotonicity::Decreasing;
    if (mono == Monotonicity::Decreasing) return Monotonicity::Increasing;
    return mono;
}

void append_row(std::string& out, const char* side, const Challenger& c) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "  %-5s %-34s %12.6f +-%9.6f  margin %+.6f  %s\n", side,
                  c.description.c_str(), c.value, c.std_error, c.margin,
                  c.pass ? "ok" : "VIOLATED");
    out += buf;
}

}  // namespace

PriceEstimate evaluate_J(const ProblemSpec& problem, const RateStrategy& strategy,
                         const StoppingRule& rule, long n, double dt, std::uint64_t seed) {
    return simulate_and_price(problem, strategy, rule, n, dt, seed);
}

RateStrategy feedback_at_running_max(RateBoxes boxes) {
    RateBoxes b = boxes;
    FeedbackFn fn = [b](double, double x, int y, double run_max) {
        PairRates r;
        const int m = static_cast<int>(b.plus.size()) + 1;
        const bool at_max = x >= run_max;
        if (y < m) {
            const Interval& up = b.plus[static_cast<size_t>(y - 1)];
            r.up = at_max ? up.hi : up.lo;
        }
        if (y > 1) {
            const Interval& dn = b.minus[static_cast<size_t>(y - 2)];
            r.down = at_max ? dn.lo : dn.hi;
        }
        return r;
    };
    return RateStrategy::feedback(std::move(boxes), std::move(fn), "feedback:at-running-max");
}

RateStrategy feedback_level_threshold(RateBoxes boxes, double threshold) {
    RateBoxes b = boxes;
    FeedbackFn fn = [b, threshold](double, double x, int y, double) {
        PairRates r;
        const int m = static_cast<int>(b.plus.size()) + 1;
        const bool low = x < threshold;
        if (y < m) {
            const Interval& up = b.plus[static_cast<size_t>(y - 1)];
            r.up = low ? up.hi : up.lo;
        }
        if (y > 1) {
            const Interval& dn = b.minus[static_cast<size_t>(y - 2)];
            r.down = low ? dn.hi : dn.lo;
        }
        return r;
    };
    return RateStrategy::feedback(std::move(boxes), std::move(fn), "feedback:level-threshold");
}

std::vector<RateStrategy> default_right_challengers(const RateBoxes& boxes, Monotonicity mono,
                                                    std::uint64_t seed) {
    std::vector<RateStrategy> out;
    for (int i = 0; i < 5; ++i)
        out.push_back(RateStrategy::random_admissible(boxes, seed + static_cast<std::uint64_t>(i)));
    out.push_back(feedback_at_running_max(boxes));
    out.push_back(feedback_level_threshold(boxes, 0.0));  // threshold patched by caller
    RateStrategy opp = RateStrategy::extremal(boxes, opposite(mono));
    opp.name = "opposite-extremal";
    out.push_back(std::move(opp));
    return out;
}

double grid_bias_allowance(const ProblemSpec& problem, const RateMatrix& q, const Grid& grid,
                           const SolverParams& params) {
    const double coarse = solve_constant(problem, q, grid, params).price_at_start();
    const double fine = solve_constant(problem, q, refine_grid(grid), params).price_at_start();
    return 2.0 * std::abs(fine - coarse);
}

SaddleReport saddle_check(const ProblemSpec& problem, const RateBoxes& boxes,
                          std::vector<StoppingRule> left_rules,
                          std::vector<RateStrategy> right_strategies, long n, double dt,
                          std::uint64_t seed, const Grid& grid, const SolverParams& params) {
    problem.validate();
    boxes.validate();
    const Monotonicity mono = sigma_monotonicity(problem.sigma);
    if (mono == Monotonicity::NonMonotone)
        throw std::invalid_argument(
            "saddle_check: sigma is non-monotone, no candidate extremal matrix exists");
    if (!problem.payoff.is_put())
        throw std::invalid_argument("saddle_check: the candidate stopping rule needs a put");

    RateStrategy pi_hat = RateStrategy::extremal(boxes, mono);
    const ValueSurface surface = solve_constant(problem, pi_hat.q, grid, params);
    StoppingRule tau_hat = StoppingRule::boundary(extract_boundary(surface), problem.horizon_T);

    SaddleReport rep;
    rep.center_desc = "J(" + pi_hat.describe() + ", " + tau_hat.describe() + ")";
    rep.pde_value = surface.price_at_start();
    rep.grid_bias = grid_bias_allowance(problem, pi_hat.q, grid, params);
    rep.center = evaluate_J(problem, pi_hat, tau_hat, n, dt, seed);

    if (left_rules.empty()) {
        left_rules.push_back(StoppingRule::immediate());
        left_rules.push_back(StoppingRule::at_maturity());
        PathBatch fit_batch =
            simulate(problem, pi_hat, std::max(4000L, std::min(16384L, n)), dt,
                     challenger_seed(seed, 97));
        left_rules.push_back(fit_regression_rule(fit_batch, problem.alpha, problem.payoff, 3));
    }
    if (right_strategies.empty()) {
        right_strategies = default_right_challengers(boxes, mono, seed);
        for (auto& s : right_strategies)
            if (s.name == "feedback:level-threshold")
                s = feedback_level_threshold(boxes, problem.payoff.scale());
    }

    std::uint64_t tag = 0;
    rep.left_ok = true;
    for (const auto& rule : left_rules) {
        PriceEstimate e =
            evaluate_J(problem, pi_hat, rule, n, dt, challenger_seed(seed, tag++));
        Challenger c;
        c.description = "J(" + pi_hat.describe() + ", " + rule.describe() + ")";
        c.value = e.estimate;
        c.std_error = e.std_error;
        c.margin = e.estimate - rep.center.estimate;
        const double noise = 3.0 * std::sqrt(e.std_error * e.std_error +
                                             rep.center.std_error * rep.center.std_error);
        c.pass = c.margin <= noise;
        rep.left_ok = rep.left_ok && c.pass;
        rep.left.push_back(std::move(c));
    }

    rep.right_ok = true;
    for (const auto& strat : right_strategies) {
        PriceEstimate e =
            evaluate_J(problem, strat, tau_hat, n, dt, challenger_seed(seed, tag++));
        Challenger c;
        c.description = "J(" + strat.describe() + ", " + tau_hat.describe() + ")";
        c.value = e.estimate;
        c.std_error = e.std_error;
        c.margin = e.estimate - rep.center.estimate;
        const double noise = 3.0 * std::sqrt(e.std_error * e.std_error +
                                             rep.center.std_error * rep.center.std_error);
        c.pass = c.margin >= -noise - rep.grid_bias;
        rep.right_ok = rep.right_ok && c.pass;
        rep.right.push_back(std::move(c));
    }

    rep.center_consistent = std::abs(rep.center.estimate - rep.pde_value) <=
                            3.0 * rep.center.std_error + rep.grid_bias;
    rep.pass = rep.left_ok && rep.right_ok && rep.center_consistent;
    return rep;
}

std::string SaddleReport::to_table() const {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "saddle center %s = %.6f +-%.6f (pde %.6f, bias %.2e)\n",
                  center_desc.c_str(), center.estimate, center.std_error, pde_value, grid_bias);
    out += buf;
    for (const auto& c : left) append_row(out, "left", c);
    for (const auto& c : right) append_row(out, "right", c);
    std::snprintf(buf, sizeof buf, "  verdict: left %s, right %s, center %s => %s\n",
                  left_ok ? "ok" : "violated", right_ok ? "ok" : "violated",
                  center_consistent ? "consistent" : "inconsistent", pass ? "PASS" : "FAIL");
    out += buf;
    return out;
}

}  // namespace rsq
