#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "rsq/extremal.hpp"
#include "rsq/mc.hpp"
#include "rsq/mc_kernel.hpp"
#include "rsq/oracle.hpp"
#include "rsq/pde.hpp"
#include "rsq/stats.hpp"

using namespace rsq;

namespace {

ProblemSpec gbm_put(std::vector<double> sigma, double mu = 0.05, double alpha = 0.05) {
    ProblemSpec p;
    p.dynamics = DynamicsType::GBM;
    p.mu = mu;
    p.sigma = std::move(sigma);
    p.payoff = PayoffSpec::put(100.0);
    p.horizon_T = 1.0;
    p.alpha = alpha;
    p.x0 = 100.0;
    p.y0 = 1;
    return p;
}

RateBoxes two_regime_boxes() {
    RateBoxes b;
    b.plus = {{0.5, 2.0}};
    b.minus = {{0.3, 1.0}};
    return b;
}

RateMatrix two_state(double up, double down) {
    RateMatrix q(2);
    q.at(0, 1) = up;
    q.at(0, 0) = -up;
    q.at(1, 0) = down;
    q.at(1, 1) = -down;
    return q;
}

/// Event-driven chain with exact exponential holding times; counts switches
/// on [0, T]. Independent of the per-step kernel under test.
int event_driven_switches(std::mt19937_64& rng, const RateMatrix& q, int y0, double T) {
    int y = y0;
    double t = 0.0;
    int switches = 0;
    while (true) {
        const double up = q.up_rate(y - 1);
        const double down = q.down_rate(y - 1);
        const double total = up + down;
        if (total <= 0.0) return switches;
        std::exponential_distribution<double> hold(total);
        t += hold(rng);
        if (t >= T) return switches;
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        y = (unif(rng) < up / total) ? y + 1 : y - 1;
        ++switches;
    }
}

}  // namespace

TEST_CASE("simulation is deterministic and the parallel kernel matches the serial one") {
    ProblemSpec p = gbm_put({0.2, 0.4});
    RateStrategy strat = RateStrategy::extremal(two_regime_boxes(), Monotonicity::Increasing);
    PathBatch a = simulate(p, strat, 4000, 0.01, 7);
    PathBatch b = simulate(p, strat, 4000, 0.01, 7);
    PathBatch c = simulate_serial(p, strat, 4000, 0.01, 7);
    REQUIRE(a.x.size() == b.x.size());
    CHECK(std::memcmp(a.x.data(), b.x.data(), a.x.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(a.y.data(), b.y.data(), a.y.size() * sizeof(std::int32_t)) == 0);
    CHECK(std::memcmp(a.x.data(), c.x.data(), a.x.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(a.y.data(), c.y.data(), a.y.size() * sizeof(std::int32_t)) == 0);

    PathBatch d = simulate(p, strat, 4000, 0.01, 8);
    CHECK(std::memcmp(a.x.data(), d.x.data(), a.x.size() * sizeof(double)) != 0);
}

TEST_CASE("paths start at the initial condition and regimes move by one at most") {
    ProblemSpec p = gbm_put({0.2, 0.3, 0.4});
    p.y0 = 2;
    RateBoxes boxes;
    boxes.plus = {{0.5, 2.0}, {0.4, 1.5}};
    boxes.minus = {{0.3, 1.0}, {0.6, 1.2}};
    PathBatch batch = simulate(p, RateStrategy::random_admissible(boxes, 3), 500, 0.01, 11);
    for (int pth = 0; pth < batch.n_paths; ++pth) {
        CHECK(batch.x[batch.idx(pth, 0)] == 100.0);
        CHECK(batch.y[batch.idx(pth, 0)] == 2);
        for (int s = 1; s <= batch.n_steps; ++s) {
            const int dy = batch.y[batch.idx(pth, s)] - batch.y[batch.idx(pth, s - 1)];
            CHECK(std::abs(dy) <= 1);
            CHECK(batch.y[batch.idx(pth, s)] >= 1);
            CHECK(batch.y[batch.idx(pth, s)] <= 3);
        }
    }
}

TEST_CASE("invalid step sizes are rejected") {
    ProblemSpec p = gbm_put({0.2});
    RateStrategy strat = RateStrategy::constant(RateMatrix(1));
    CHECK_THROWS_AS(simulate(p, strat, 10, 0.2, 1), std::invalid_argument);   // > T/10
    CHECK_THROWS_AS(simulate(p, strat, 10, 0.03, 1), std::invalid_argument);  // does not divide T
    CHECK_THROWS_AS(simulate(p, strat, 0, 0.01, 1), std::invalid_argument);
}

TEST_CASE("symmetric chain occupies both regimes equally in the long run") {
    ProblemSpec p = gbm_put({0.2, 0.2001});
    p.horizon_T = 100.0;
    RateStrategy strat = RateStrategy::constant(two_state(1.0, 1.0));
    PathBatch batch = simulate(p, strat, 4000, 0.1, 5);
    // second half of each path only, past the start transient
    std::vector<double> frac(static_cast<size_t>(batch.n_paths));
    const int s0 = batch.n_steps / 2;
    for (int pth = 0; pth < batch.n_paths; ++pth) {
        int in_low = 0;
        for (int s = s0; s <= batch.n_steps; ++s)
            if (batch.y[batch.idx(pth, s)] == 1) ++in_low;
        frac[static_cast<size_t>(pth)] = static_cast<double>(in_low) / (batch.n_steps - s0 + 1);
    }
    std::vector<double> scratch(frac.size());
    MeanSe ms = pairwise_mean_se(frac.data(), frac.size(), scratch.data());
    CHECK(std::abs(ms.mean - 0.5) <= 3.0 * ms.se);
}

TEST_CASE("switch counts match an exact exponential-clock chain") {
    ProblemSpec p = gbm_put({0.2, 0.4});
    const RateMatrix q = two_state(0.8, 1.3);
    const long n = 20000;
    PathBatch batch = simulate(p, RateStrategy::constant(q), n, 0.005, 17);
    std::vector<double> counts(static_cast<size_t>(n));
    for (int pth = 0; pth < batch.n_paths; ++pth) {
        int sw = 0;
        for (int s = 1; s <= batch.n_steps; ++s)
            if (batch.y[batch.idx(pth, s)] != batch.y[batch.idx(pth, s - 1)]) ++sw;
        counts[static_cast<size_t>(pth)] = sw;
    }
    std::vector<double> scratch(counts.size());
    MeanSe ours = pairwise_mean_se(counts.data(), counts.size(), scratch.data());

    std::mt19937_64 rng(1729);
    std::vector<double> oracle(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i)
        oracle[static_cast<size_t>(i)] = event_driven_switches(rng, q, 1, 1.0);
    MeanSe ref = pairwise_mean_se(oracle.data(), oracle.size(), scratch.data());

    const double gap = std::abs(ours.mean - ref.mean);
    const double se = std::sqrt(ours.se * ours.se + ref.se * ref.se);
    CHECK(gap <= 3.0 * se);
}

TEST_CASE("one-step transition frequencies match q*dt at binomial resolution") {
    ProblemSpec p = gbm_put({0.2, 0.4});
    const double dt = 0.01;
    const RateMatrix q = two_state(0.8, 1.3);
    PathBatch batch = simulate(p, RateStrategy::constant(q), 4000, dt, 23);
    long at_low = 0, low_up = 0;
    for (int pth = 0; pth < batch.n_paths; ++pth)
        for (int s = 0; s < batch.n_steps; ++s) {
            if (batch.y[batch.idx(pth, s)] != 1) continue;
            ++at_low;
            if (batch.y[batch.idx(pth, s + 1)] == 2) ++low_up;
        }
    const double expected = -std::expm1(-0.8 * dt);
    const double phat = static_cast<double>(low_up) / at_low;
    const double se = std::sqrt(expected * (1.0 - expected) / at_low);
    CHECK(std::abs(phat - expected) <= 3.0 * se);
}

TEST_CASE("immediate stopping pays the initial payoff exactly") {
    ProblemSpec p = gbm_put({0.2, 0.4});
    p.x0 = 80.0;  // in the money
    PathBatch batch =
        simulate(p, RateStrategy::extremal(two_regime_boxes(), Monotonicity::Increasing), 200, 0.01, 3);
    PriceEstimate e = price(batch, StoppingRule::immediate(), p.alpha, p.payoff);
    CHECK(e.estimate == 20.0);
    CHECK(e.std_error == 0.0);
}

TEST_CASE("optional sampling: linear payoff of a driftless process prices at par") {
    ProblemSpec p;
    p.dynamics = DynamicsType::Driftless;
    p.a.value = 1.0;
    p.sigma = {0.3};
    p.payoff = PayoffSpec::table({-1000.0, 3000.0}, {0.0, 4000.0});  // x + 1000 on the range
    p.horizon_T = 1.0;
    p.alpha = 0.0;
    p.x0 = 100.0;
    p.y0 = 1;
    PathBatch batch = simulate(p, RateStrategy::constant(RateMatrix(1)), 40000, 0.01, 31);
    PriceEstimate e = price(batch, StoppingRule::at_maturity(), 0.0, p.payoff);
    CHECK(std::abs(e.estimate - 1100.0) <= 3.0 * e.std_error);
}

TEST_CASE("boundary rule recovers the single-regime pde price") {
    ProblemSpec p = gbm_put({0.2});
    Grid g = build_grid(p, 201, 201, 5.0);
    ValueSurface sf = solve_constant(p, RateMatrix(1), g);
    StoppingRule rule = StoppingRule::boundary(extract_boundary(sf), p.horizon_T);

    PriceEstimate e = simulate_and_price(p, RateStrategy::constant(RateMatrix(1)), rule, 40000,
                                         1.0 / 200.0, 41);
    const double fine =
        solve_constant(p, RateMatrix(1), refine_grid(g)).price_at_start();
    const double bias = 2.0 * std::abs(fine - sf.price_at_start());
    CHECK(std::abs(e.estimate - sf.price_at_start()) <= 3.0 * e.std_error + bias + 0.02);
    CHECK(e.estimate >= sf.price_at_start() - 3.0 * e.std_error - bias);
}

TEST_CASE("fused pricing equals the simulate-then-price composition") {
    ProblemSpec p = gbm_put({0.2, 0.4});
    RateStrategy strat = RateStrategy::random_admissible(two_regime_boxes(), 5);
    Grid g = build_grid(p, 101, 81, 5.0);
    ValueSurface sf =
        solve_constant(p, extremal_matrix(two_regime_boxes(), Monotonicity::Increasing), g);
    StoppingRule rule = StoppingRule::boundary(extract_boundary(sf), p.horizon_T);

    PathBatch batch = simulate(p, strat, 3000, 0.01, 13);
    PriceEstimate split = price(batch, rule, p.alpha, p.payoff);
    PriceEstimate fused = simulate_and_price(p, strat, rule, 3000, 0.01, 13);
    CHECK(split.estimate == fused.estimate);
    CHECK(split.std_error == fused.std_error);
}

TEST_CASE("regression rule: zero payoff never stops early and prices at zero") {
    ProblemSpec p = gbm_put({0.2});
    p.payoff = PayoffSpec::table({1.0, 500.0}, {0.0, 0.0});
    PathBatch batch = simulate(p, RateStrategy::constant(RateMatrix(1)), 2000, 0.02, 19);
    StoppingRule rule = fit_regression_rule(batch, p.alpha, p.payoff, 3);
    PriceEstimate e = price(batch, rule, p.alpha, p.payoff);
    CHECK(e.estimate == 0.0);
    for (int s = 1; s < batch.n_steps; ++s)
        for (const auto& sl : rule.slices[static_cast<size_t>(s)]) CHECK(sl.coef.empty());
}

TEST_CASE("regression rule prices the single-regime put within 1% of the pde") {
    ProblemSpec p = gbm_put({0.2});
    Grid g = build_grid(p, 201, 201, 5.0);
    const double pde = solve_constant(p, RateMatrix(1), g).price_at_start();

    RateStrategy strat = RateStrategy::constant(RateMatrix(1));
    PathBatch fit_batch = simulate(p, strat, 20000, 0.02, 53);
    StoppingRule rule = fit_regression_rule(fit_batch, p.alpha, p.payoff, 3);

    PriceEstimate e = simulate_and_price(p, strat, rule, 50000, 0.02, 54);  // out of sample
    CHECK(std::abs(e.estimate - pde) / pde < 0.01);
}

TEST_CASE("regression fit is reproducible") {
    ProblemSpec p = gbm_put({0.2, 0.4});
    RateStrategy strat = RateStrategy::extremal(two_regime_boxes(), Monotonicity::Increasing);
    PathBatch a = simulate(p, strat, 4000, 0.02, 77);
    PathBatch b = simulate(p, strat, 4000, 0.02, 77);
    StoppingRule ra = fit_regression_rule(a, p.alpha, p.payoff, 3);
    StoppingRule rb = fit_regression_rule(b, p.alpha, p.payoff, 3);
    REQUIRE(ra.slices.size() == rb.slices.size());
    for (size_t s = 0; s < ra.slices.size(); ++s)
        for (size_t y = 0; y < ra.slices[s].size(); ++y) {
            CHECK(ra.slices[s][y].coef == rb.slices[s][y].coef);
            CHECK(ra.slices[s][y].center == rb.slices[s][y].center);
            CHECK(ra.slices[s][y].spread == rb.slices[s][y].spread);
        }
}

TEST_CASE("a collinear in-the-money design raises the degenerate-matrix error") {
    ProblemSpec p = gbm_put({1e-13}, 0.0);  // frozen paths: a single support point
    p.x0 = 80.0;
    PathBatch batch = simulate(p, RateStrategy::constant(RateMatrix(1)), 2000, 0.02, 12);
    CHECK_THROWS_WITH_AS(fit_regression_rule(batch, p.alpha, p.payoff, 3),
                         doctest::Contains("degenerate"), std::runtime_error);
}

TEST_CASE("regression preconditions") {
    ProblemSpec p = gbm_put({0.2});
    PathBatch small = simulate(p, RateStrategy::constant(RateMatrix(1)), 500, 0.02, 1);
    CHECK_THROWS_AS(fit_regression_rule(small, p.alpha, p.payoff, 3), std::invalid_argument);
    PathBatch ok = simulate(p, RateStrategy::constant(RateMatrix(1)), 1500, 0.02, 1);
    CHECK_THROWS_AS(fit_regression_rule(ok, p.alpha, p.payoff, 1), std::invalid_argument);
    CHECK_THROWS_AS(fit_regression_rule(ok, p.alpha, p.payoff, 6), std::invalid_argument);
}

TEST_CASE("perturbing the diffusion stream after a cutoff leaves the prefix untouched") {
    ProblemSpec p = gbm_put({0.2, 0.4});
    RateStrategy strat = RateStrategy::random_admissible(two_regime_boxes(), 9);
    const double dt = 0.01;
    const int steps = 100;
    const int cutoff = 60;
    const std::uint64_t seed = 2024;
    const std::uint64_t dkey = stream_key(seed, detail::kDiffusionStream);
    const std::uint64_t ckey = stream_key(seed, detail::kChainStream);

    struct Perturbed {
        std::uint64_t key;
        int cutoff;
        double operator()(std::uint64_t pth, std::uint64_t s) const {
            const double z = standard_normal(key, pth, s);
            return s >= static_cast<std::uint64_t>(cutoff) ? -z + 0.5 : z;
        }
    };

    detail::StrategyContext ctx(p, strat, dt, seed);
    for (std::uint64_t pth = 0; pth < 50; ++pth) {
        std::vector<double> x_base, x_pert;
        std::vector<int> y_base, y_pert;
        detail::walk_one_path(ctx, ckey, detail::PhiloxNormals{dkey}, pth, steps,
                              [&](int, double, double x, int y) {
                                  x_base.push_back(x);
                                  y_base.push_back(y);
                                  return true;
                              });
        detail::walk_one_path(ctx, ckey, Perturbed{dkey, cutoff}, pth, steps,
                              [&](int, double, double x, int y) {
                                  x_pert.push_back(x);
                                  y_pert.push_back(y);
                                  return true;
                              });
        for (int s = 0; s <= cutoff; ++s) {
            CHECK(x_base[static_cast<size_t>(s)] == x_pert[static_cast<size_t>(s)]);
            CHECK(y_base[static_cast<size_t>(s)] == y_pert[static_cast<size_t>(s)]);
        }
    }
}

TEST_CASE("feedback strategies see only the adapted summary and stay in the boxes") {
    ProblemSpec p = gbm_put({0.2, 0.4});
    RateBoxes boxes = two_regime_boxes();
    std::vector<double> seen_rates;
    RateStrategy strat = RateStrategy::feedback(
        boxes,
        [&seen_rates](double, double x, int y, double run_max) {
            PairRates r;
            r.up = x >= run_max ? 10.0 : 0.01;  // out-of-box on purpose, must be clamped
            r.down = 0.01;
            (void)y;
            seen_rates.push_back(r.up);
            return r;
        },
        "test-feedback");
    PathBatch batch = simulate_serial(p, strat, 50, 0.01, 6);
    CHECK(batch.n_paths == 50);
    CHECK_FALSE(seen_rates.empty());
}

TEST_CASE("moment bound: formula value, zeroth moment, and an honest gbm run") {
    ProblemSpec p = gbm_put({1.0}, 0.0, 0.0);
    p.x0 = 1.0;
    // K = 1, t = 1, q = 2: the bound is (1 + 4) e^{40}
    MomentReport formula = moment_bound_check(p, 1.0, 2.0, 1.0, 100, 0.02, 1);
    CHECK(formula.bound == doctest::Approx(5.0 * std::exp(40.0)).epsilon(1e-12));

    MomentReport zeroth = moment_bound_check(p, 1.0, 0.0, 1.0, 100, 0.02, 1);
    CHECK(zeroth.empirical == 1.0);
    CHECK(zeroth.bound == 1.0);
    CHECK(zeroth.pass);

    ProblemSpec g = gbm_put({0.2});
    g.x0 = 1.0;
    g.payoff = PayoffSpec::put(1.0);
    MomentReport rep = moment_bound_check(g, std::max(0.2, 0.05), 4.0, 1.0, 20000, 0.005, 2);
    CHECK(rep.pass);
    CHECK(rep.empirical * 100.0 < rep.bound);  // loose by orders of magnitude
}

TEST_CASE("moment bound rejects cev and understated growth constants") {
    ProblemSpec cev;
    cev.dynamics = DynamicsType::CEV;
    cev.gamma = 1.5;
    cev.sigma = {0.2};
    cev.payoff = PayoffSpec::put(1.0);
    cev.horizon_T = 1.0;
    cev.x0 = 1.0;
    CHECK_THROWS_AS(moment_bound_check(cev, 1.0, 2.0, 1.0, 100, 0.02, 1), std::invalid_argument);

    ProblemSpec g = gbm_put({0.2});
    CHECK_THROWS_AS(moment_bound_check(g, 0.1, 2.0, 1.0, 100, 0.02, 1), std::invalid_argument);
}

TEST_CASE("a boundary rule from a different horizon is rejected") {
    ProblemSpec p = gbm_put({0.2});
    Grid g = build_grid(p, 61, 21, 5.0);
    ValueSurface sf = solve_constant(p, RateMatrix(1), g);
    StoppingRule rule = StoppingRule::boundary(extract_boundary(sf), 2.0);  // wrong horizon
    PathBatch batch = simulate(p, RateStrategy::constant(RateMatrix(1)), 100, 0.01, 1);
    CHECK_THROWS_AS(price(batch, rule, p.alpha, p.payoff), std::invalid_argument);
}

TEST_CASE("violent cev dynamics set the floor warning") {
    ProblemSpec p;
    p.dynamics = DynamicsType::CEV;
    p.gamma = 1.5;
    p.sigma = {5.0};
    p.payoff = PayoffSpec::put(1.0);
    p.horizon_T = 1.0;
    p.alpha = 0.0;
    p.x0 = 1.0;
    p.y0 = 1;
    PathBatch batch = simulate(p, RateStrategy::constant(RateMatrix(1)), 2000, 0.1, 4);
    CHECK(batch.floor_events > 0);
    CHECK(batch.floor_warning);
    for (double x : batch.x) CHECK(x > 0.0);
}

TEST_CASE("cev paths stay positive with a negligible floor fraction") {
    ProblemSpec p;
    p.dynamics = DynamicsType::CEV;
    p.gamma = 1.5;
    p.sigma = {0.2, 0.4};
    p.payoff = PayoffSpec::put(1.0);
    p.horizon_T = 1.0;
    p.alpha = 0.0;
    p.x0 = 1.0;
    p.y0 = 1;
    PathBatch batch =
        simulate(p, RateStrategy::extremal(two_regime_boxes(), Monotonicity::Increasing), 5000, 0.005, 8);
    for (double x : batch.x) CHECK(x > 0.0);
    CHECK(batch.floor_fraction() < 0.01);
    CHECK_FALSE(batch.floor_warning);
}
