#pragma once

// Path-stepping kernel shared by simulate(), the fused pricers and the
// stream-replay tests. Everything is a pure function of (key, path, step),
// so paths can be generated in any order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "rsq/mc.hpp"
#include "rsq/rng.hpp"

namespace rsq::detail {

inline constexpr std::uint64_t kDiffusionStream = 1;
inline constexpr std::uint64_t kChainStream = 2;
inline constexpr std::uint64_t kRatesStream = 3;

struct PhiloxNormals {
    std::uint64_t key;
    double operator()(std::uint64_t p, std::uint64_t s) const {
        return standard_normal(key, p, s);
    }
};

/// Resolved per-run strategy data.
struct StrategyContext {
    const ProblemSpec* prob = nullptr;
    const RateStrategy* strat = nullptr;
    double dt = 0.0;
    double sqrt_dt = 0.0;
    double eps_floor = 0.0;
    int m = 1;
    std::uint64_t rates_key = 0;
    // Constant-strategy fast path: rates and switch probability per regime.
    std::vector<double> const_up, const_down, const_switch;

    StrategyContext(const ProblemSpec& p, const RateStrategy& s, double dt_, std::uint64_t seed)
        : prob(&p), strat(&s), dt(dt_), sqrt_dt(std::sqrt(dt_)),
          eps_floor(1e-12 * std::abs(p.x0)), m(p.regimes()),
          rates_key(stream_key(seed ^ mix64(s.rate_seed), kRatesStream)) {
        if (s.kind == RateStrategy::Kind::Constant || s.kind == RateStrategy::Kind::Extremal) {
            const_up.resize(static_cast<std::size_t>(m));
            const_down.resize(static_cast<std::size_t>(m));
            const_switch.resize(static_cast<std::size_t>(m));
            for (int y = 0; y < m; ++y) {
                const_up[y] = s.q.up_rate(y);
                const_down[y] = s.q.down_rate(y);
                const_switch[y] = -std::expm1(-(const_up[y] + const_down[y]) * dt);
            }
        }
    }

    PairRates rates_at(std::uint64_t p, std::uint64_t s, double t, double x, int y,
                       double run_max) const {
        PairRates r;
        switch (strat->kind) {
            case RateStrategy::Kind::Constant:
            case RateStrategy::Kind::Extremal:
                r.up = const_up[static_cast<std::size_t>(y - 1)];
                r.down = const_down[static_cast<std::size_t>(y - 1)];
                return r;
            case RateStrategy::Kind::RandomAdmissible: {
                if (y < m) {
                    const Interval& b = strat->boxes.plus[static_cast<std::size_t>(y - 1)];
                    r.up = b.lo + uniform_at(rates_key, p, s, 0) * (b.hi - b.lo);
                }
                if (y > 1) {
                    const Interval& b = strat->boxes.minus[static_cast<std::size_t>(y - 2)];
                    r.down = b.lo + uniform_at(rates_key, p, s, 1) * (b.hi - b.lo);
                }
                return r;
            }
            case RateStrategy::Kind::Feedback: {
                PairRates raw = strat->rule(t, x, y, run_max);
                if (y < m) {
                    const Interval& b = strat->boxes.plus[static_cast<std::size_t>(y - 1)];
                    r.up = std::clamp(raw.up, b.lo, b.hi);
                }
                if (y > 1) {
                    const Interval& b = strat->boxes.minus[static_cast<std::size_t>(y - 2)];
                    r.down = std::clamp(raw.down, b.lo, b.hi);
                }
                return r;
            }
        }
        return r;
    }
};

/// Walks one path, invoking visit(step, t, x, y) at every recorded state.
/// A false return stops the walk early. Returns the number of floor events.
template <class Normals, class Visit>
std::int64_t walk_one_path(const StrategyContext& ctx, std::uint64_t chain_key,
                           const Normals& normals, std::uint64_t p, int n_steps, Visit&& visit) {
    const ProblemSpec& prob = *ctx.prob;
    const bool cev = prob.dynamics == DynamicsType::CEV;
    const bool constant_rates = !ctx.const_switch.empty();

    double x = prob.x0;
    int y = prob.y0;
    double run_max = x;
    std::int64_t floors = 0;

    for (int s = 0;; ++s) {
        const double t = s * ctx.dt;
        if (!visit(s, t, x, y)) return floors;
        if (s == n_steps) return floors;

        // diffusion step with the current regime's sigma
        const double sig = prob.sigma[static_cast<std::size_t>(y - 1)];
        const double z = normals(p, static_cast<std::uint64_t>(s));
        double xn = x + prob.drift_coeff(x) * ctx.dt + prob.diffusion_coeff(x) * sig *
                                                           ctx.sqrt_dt * z;
        if (cev && xn < ctx.eps_floor) {
            xn = ctx.eps_floor;
            ++floors;
        }

        // regime step: at most one move, probability 1 - exp(-rate*dt)
        double p_switch, lam_up, lam_dn;
        if (constant_rates) {
            lam_up = ctx.const_up[static_cast<std::size_t>(y - 1)];
            lam_dn = ctx.const_down[static_cast<std::size_t>(y - 1)];
            p_switch = ctx.const_switch[static_cast<std::size_t>(y - 1)];
        } else {
            PairRates r = ctx.rates_at(p, static_cast<std::uint64_t>(s), t, x, y, run_max);
            lam_up = r.up;
            lam_dn = r.down;
            p_switch = -std::expm1(-(lam_up + lam_dn) * ctx.dt);
        }
        const UnitPair u = uniform_pair(chain_key, p, static_cast<std::uint64_t>(s));
        int yn = y;
        if (u.u1 < p_switch) {
            const double tot = lam_up + lam_dn;
            yn = (u.u2 < lam_up / tot) ? y + 1 : y - 1;
        }

        x = xn;
        y = yn;
        if (x > run_max) run_max = x;
    }
}

}  // namespace rsq::detail
