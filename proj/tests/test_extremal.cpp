#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "rsq/extremal.hpp"

using namespace rsq;

namespace {

RateBoxes two_regime_boxes() {
    RateBoxes b;
    b.plus = {{0.5, 2.0}};
    b.minus = {{0.3, 1.0}};
    return b;
}

}  // namespace

TEST_CASE("extremal matrix, increasing sigma: inf of plus box, sup of minus box") {
    RateMatrix q = extremal_matrix(two_regime_boxes(), Monotonicity::Increasing);
    CHECK(q.at(0, 0) == -0.5);
    CHECK(q.at(0, 1) == 0.5);
    CHECK(q.at(1, 0) == 1.0);
    CHECK(q.at(1, 1) == -1.0);
    CHECK(validate_rate_matrix(q).ok);
    CHECK(is_admissible(q, two_regime_boxes()));
}

TEST_CASE("extremal matrix, decreasing sigma swaps inf and sup") {
    RateMatrix q = extremal_matrix(two_regime_boxes(), Monotonicity::Decreasing);
    CHECK(q.at(0, 1) == 2.0);
    CHECK(q.at(0, 0) == -2.0);
    CHECK(q.at(1, 0) == 0.3);
    CHECK(q.at(1, 1) == -0.3);
    CHECK(is_admissible(q, two_regime_boxes()));
}

TEST_CASE("singleton boxes give the unique admissible matrix under either tag") {
    RateBoxes b;
    b.plus = {{0.7, 0.7}};
    b.minus = {{1.3, 1.3}};
    RateMatrix inc = extremal_matrix(b, Monotonicity::Increasing);
    RateMatrix dec = extremal_matrix(b, Monotonicity::Decreasing);
    CHECK(inc.q == dec.q);
    CHECK(inc.at(0, 1) == 0.7);
    CHECK(inc.at(1, 0) == 1.3);
}

TEST_CASE("trivial tag (m=1) yields the 1x1 zero matrix") {
    RateBoxes b;  // no intervals
    RateMatrix q = extremal_matrix(b, Monotonicity::Trivial);
    CHECK(q.m == 1);
    CHECK(q.at(0, 0) == 0.0);
}

TEST_CASE("non-monotone sigma is refused with an explanatory error") {
    CHECK_THROWS_WITH_AS(extremal_matrix(two_regime_boxes(), Monotonicity::NonMonotone),
                         doctest::Contains("non-monotone"), std::invalid_argument);
}

TEST_CASE("pointwise rates minimize the rate-linear term") {
    RateBoxes b = two_regime_boxes();
    // positive difference: pick the infimum
    CHECK(pointwise_rates(0.2, 0.0, 1, b).lambda_plus == 0.5);
    // negative difference: pick the supremum
    CHECK(pointwise_rates(-0.1, 0.0, 1, b).lambda_plus == 2.0);
    // tie: objective constant in the rate, use the inf per the constant-matrix convention
    CHECK(pointwise_rates(0.0, 0.0, 1, b).lambda_plus == 0.5);

    // minus direction, regime 2 of 2
    CHECK(pointwise_rates(0.0, -0.4, 2, b).lambda_minus == 1.0);
    CHECK(pointwise_rates(0.0, 0.4, 2, b).lambda_minus == 0.3);
    // tie resolves to the increasing-case extremal entry (sup of the minus box)
    CHECK(pointwise_rates(0.0, 0.0, 2, b).lambda_minus == 1.0);
}

TEST_CASE("boundary regimes carry no outward rate") {
    RateBoxes b = two_regime_boxes();
    CHECK(pointwise_rates(0.1, 0.3, 1, b).lambda_minus == 0.0);
    CHECK(pointwise_rates(0.1, 0.3, 2, b).lambda_plus == 0.0);
}

TEST_CASE("bang-bang rates always sit at a box endpoint and extremal output is admissible") {
    std::mt19937_64 rng(321);
    std::uniform_real_distribution<double> unif(0.05, 4.0);
    std::uniform_real_distribution<double> dv(-1.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        const int m = 2 + static_cast<int>(rng() % 3);
        RateBoxes boxes;
        for (int k = 0; k + 1 < m; ++k) {
            double a = unif(rng), c = unif(rng);
            boxes.plus.push_back({std::min(a, c), std::max(a, c)});
            a = unif(rng);
            c = unif(rng);
            boxes.minus.push_back({std::min(a, c), std::max(a, c)});
        }
        for (Monotonicity mono : {Monotonicity::Increasing, Monotonicity::Decreasing}) {
            RateMatrix q = extremal_matrix(boxes, mono);
            CHECK(validate_rate_matrix(q).ok);
            CHECK(is_admissible(q, boxes));
        }
        for (int y = 1; y <= m; ++y) {
            PointRates pr = pointwise_rates(dv(rng), dv(rng), y, boxes);
            if (y < m) {
                const Interval& up = boxes.plus[static_cast<size_t>(y - 1)];
                CHECK((pr.lambda_plus == up.lo || pr.lambda_plus == up.hi));
            }
            if (y > 1) {
                const Interval& dn = boxes.minus[static_cast<size_t>(y - 2)];
                CHECK((pr.lambda_minus == dn.lo || pr.lambda_minus == dn.hi));
            }
        }
    }
}

TEST_CASE("a regime-monotone flat-or-increasing surface reproduces the extremal entries") {
    RateBoxes b = two_regime_boxes();
    RateMatrix pi_l = extremal_matrix(b, Monotonicity::Increasing);
    // monotone-in-regime node values, including exact ties
    const double levels[][2] = {{1.0, 2.0}, {3.0, 3.0}, {0.0, 1e-14}};
    for (const auto& lv : levels) {
        PointRates low = pointwise_rates(lv[1] - lv[0], 0.0, 1, b);
        PointRates high = pointwise_rates(0.0, lv[0] - lv[1], 2, b);
        CHECK(low.lambda_plus == pi_l.at(0, 1));
        CHECK(high.lambda_minus == pi_l.at(1, 0));
    }
}
