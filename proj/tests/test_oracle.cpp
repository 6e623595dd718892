#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rsq/extremal.hpp"
#include "rsq/oracle.hpp"

using namespace rsq;

namespace {

ProblemSpec two_regime_put(std::vector<double> sigma) {
    ProblemSpec p;
    p.dynamics = DynamicsType::GBM;
    p.mu = 0.05;
    p.sigma = std::move(sigma);
    p.payoff = PayoffSpec::put(100.0);
    p.horizon_T = 1.0;
    p.alpha = 0.05;
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

}  // namespace

TEST_CASE("one-step tree computed by hand") {
    const double K = 100.0, sigma = 0.2, T = 1.0;
    const double u = std::exp(sigma * std::sqrt(T));
    const double d = 1.0 / u;
    const double p = (1.0 - d) / (u - d);  // r = 0
    // at-the-money start: up leaf pays 0, down leaf pays K(1 - d)
    const double expected = std::max((1.0 - p) * K * (1.0 - d), 0.0);
    CHECK(binomial_american_put(K, K, 0.0, sigma, T, 1) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("vanishing volatility collapses to immediate exercise") {
    const double price = binomial_american_put(80.0, 100.0, 0.0, 1e-8, 1.0, 64);
    CHECK(price == doctest::Approx(20.0).epsilon(1e-6));
}

TEST_CASE("tree self-consistency: 2500 vs 5000 steps within 0.05%") {
    const double a = binomial_american_put(100.0, 100.0, 0.05, 0.2, 1.0, 2500);
    const double b = binomial_american_put(100.0, 100.0, 0.05, 0.2, 1.0, 5000);
    CHECK(std::abs(a - b) / b < 5e-4);
}

TEST_CASE("endpoint matrices enumerate all inf/sup combinations") {
    auto mats = endpoint_matrices(two_regime_boxes());
    REQUIRE(mats.size() == 4);
    int with_up_lo = 0, with_dn_hi = 0;
    for (const auto& q : mats) {
        CHECK(is_admissible(q, two_regime_boxes()));
        if (q.at(0, 1) == 0.5) ++with_up_lo;
        if (q.at(1, 0) == 1.0) ++with_dn_hi;
    }
    CHECK(with_up_lo == 2);
    CHECK(with_dn_hi == 2);
}

TEST_CASE("sampled matrices are admissible and deterministic in the seed") {
    auto a = sample_admissible_matrices(two_regime_boxes(), 10, 42);
    auto b = sample_admissible_matrices(two_regime_boxes(), 10, 42);
    auto c = sample_admissible_matrices(two_regime_boxes(), 10, 43);
    REQUIRE(a.size() == 10);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(is_admissible(a[i], two_regime_boxes()));
        CHECK(a[i].q == b[i].q);
    }
    CHECK(a[0].q != c[0].q);
}

TEST_CASE("brute force: singleton boxes hit the unique matrix in one evaluation") {
    ProblemSpec prob = two_regime_put({0.2, 0.4});
    RateBoxes b;
    b.plus = {{0.8, 0.8}};
    b.minus = {{0.6, 0.6}};
    Grid grid = build_grid(prob, 101, 81, 5.0);
    BruteForceResult res = brute_force_min(prob, b, grid, 2);
    CHECK(res.evaluated == 4);  // all samples coincide
    CHECK(res.argmin.at(0, 1) == 0.8);
    CHECK(res.argmin.at(1, 0) == 0.6);
}

TEST_CASE("brute force with endpoints certifies the extremal matrix") {
    ProblemSpec prob = two_regime_put({0.2, 0.4});
    Grid grid = build_grid(prob, 151, 101, 5.0);
    BruteForceResult res = brute_force_min(prob, two_regime_boxes(), grid, 2);
    RateMatrix pi_l = extremal_matrix(two_regime_boxes(), Monotonicity::Increasing);
    CHECK(res.evaluated == 4);
    CHECK(res.argmin.q == pi_l.q);

    ProblemSpec dec = two_regime_put({0.4, 0.2});
    BruteForceResult res_dec = brute_force_min(dec, two_regime_boxes(), build_grid(dec, 151, 101, 5.0), 2);
    RateMatrix pi_dec = extremal_matrix(two_regime_boxes(), Monotonicity::Decreasing);
    CHECK(res_dec.argmin.q == pi_dec.q);
}

TEST_CASE("indistinguishable regimes price equal within 1e-8") {
    ProblemSpec prob = two_regime_put({0.3, 0.3});
    Grid grid = build_grid(prob, 101, 81, 5.0);
    // evaluate every endpoint matrix directly
    double lo = 1e300, hi = -1e300;
    for (const auto& q : endpoint_matrices(two_regime_boxes())) {
        double price = solve_constant(prob, q, grid).price_at_start();
        lo = std::min(lo, price);
        hi = std::max(hi, price);
    }
    CHECK(hi - lo <= 1e-8);
}

TEST_CASE("endpoint brute force reproduces the extremal price to 1e-6") {
    ProblemSpec prob = two_regime_put({0.2, 0.4});
    Grid grid = build_grid(prob, 151, 101, 5.0);
    RateMatrix pi_l = extremal_matrix(two_regime_boxes(), Monotonicity::Increasing);
    const double direct = solve_constant(prob, pi_l, grid).price_at_start();
    BruteForceResult res = brute_force_min(prob, two_regime_boxes(), grid, 3);
    CHECK(res.evaluated == 9);
    CHECK(res.min_price >= direct - 1e-6);
    CHECK(std::abs(res.min_price - direct) <= 1e-6);
}

TEST_CASE("brute force refuses oversized sample products") {
    ProblemSpec prob = two_regime_put({0.2, 0.4});
    Grid grid = build_grid(prob, 51, 41, 5.0);
    CHECK_THROWS_AS(brute_force_min(prob, two_regime_boxes(), grid, 101), std::invalid_argument);
}
