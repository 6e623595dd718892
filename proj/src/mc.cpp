#include "rsq/mc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rsq/extremal.hpp"
#include "rsq/mc_kernel.hpp"
#include "rsq/stats.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rsq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int checked_steps(double horizon, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("simulate: dt must be > 0");
    if (dt > horizon / 10.0 * (1.0 + 1e-12))
        throw std::invalid_argument("simulate: dt must be <= T/10");
    const long long steps = std::llround(horizon / dt);
    if (steps < 1 || std::abs(steps * dt - horizon) > 1e-9 * std::max(1.0, horizon))
        throw std::invalid_argument("simulate: dt must divide the horizon");
    return static_cast<int>(steps);
}

PathBatch simulate_impl(const ProblemSpec& problem, const RateStrategy& strategy, long n,
                        double dt, std::uint64_t seed, bool parallel) {
    problem.validate();
    if (n < 1) throw std::invalid_argument("simulate: n must be >= 1");
    const int steps = checked_steps(problem.horizon_T, dt);

    PathBatch batch;
    batch.n_paths = static_cast<int>(n);
    batch.n_steps = steps;
    batch.m = problem.regimes();
    batch.dt = dt;
    batch.seed = seed;
    batch.diffusion_key = stream_key(seed, detail::kDiffusionStream);
    batch.chain_key = stream_key(seed, detail::kChainStream);
    batch.times.resize(static_cast<std::size_t>(steps) + 1);
    for (int s = 0; s <= steps; ++s) batch.times[static_cast<std::size_t>(s)] = s * dt;
    batch.x.resize(static_cast<std::size_t>(n) * (steps + 1));
    batch.y.resize(static_cast<std::size_t>(n) * (steps + 1));

    const detail::StrategyContext ctx(problem, strategy, dt, seed);
    const detail::PhiloxNormals normals{batch.diffusion_key};

    std::int64_t floors = 0;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : floors) if (parallel)
#endif
    for (long p = 0; p < n; ++p) {
        double* xrow = batch.x.data() + batch.idx(static_cast<int>(p), 0);
        std::int32_t* yrow = batch.y.data() + batch.idx(static_cast<int>(p), 0);
        floors += detail::walk_one_path(ctx, batch.chain_key, normals,
                                        static_cast<std::uint64_t>(p), steps,
                                        [&](int s, double, double x, int y) {
                                            xrow[s] = x;
                                            yrow[s] = static_cast<std::int32_t>(y);
                                            return true;
                                        });
    }
    (void)parallel;
    batch.floor_events = floors;
    batch.floor_warning = batch.floor_fraction() > 0.01;
    return batch;
}

void check_rule_compat(const StoppingRule& rule, const std::vector<double>& times) {
    if (rule.kind == StoppingRule::Kind::Boundary) {
        if (std::abs(times.back() - rule.horizon) > 1e-9 * std::max(1.0, rule.horizon))
            throw std::invalid_argument("price: boundary rule horizon does not match the batch");
    }
    if (rule.kind == StoppingRule::Kind::Regression) {
        if (rule.fit_times.size() != times.size())
            throw std::invalid_argument("price: regression rule step grid does not match");
    }
}

double poly_eval(const std::vector<double>& coef, double u) {
    double acc = 0.0;
    for (std::size_t j = coef.size(); j-- > 0;) acc = acc * u + coef[j];
    return acc;
}

/// Gaussian elimination with partial pivoting for the small normal systems.
std::vector<double> solve_dense(std::vector<double> A, std::vector<double> b, int n) {
    double scale = 0.0;
    for (int c = 0; c < n; ++c)
        scale = std::max(scale, std::abs(A[static_cast<std::size_t>(c) * n + c]));
    const double pivot_tol = 1e-13 * std::max(1.0, scale);
    for (int c = 0; c < n; ++c) {
        int piv = c;
        for (int r = c + 1; r < n; ++r)
            if (std::abs(A[static_cast<std::size_t>(r) * n + c]) >
                std::abs(A[static_cast<std::size_t>(piv) * n + c]))
                piv = r;
        if (std::abs(A[static_cast<std::size_t>(piv) * n + c]) < pivot_tol)
            throw std::runtime_error("degenerate regression matrix");
        if (piv != c) {
            for (int j = c; j < n; ++j)
                std::swap(A[static_cast<std::size_t>(c) * n + j],
                          A[static_cast<std::size_t>(piv) * n + j]);
            std::swap(b[static_cast<std::size_t>(c)], b[static_cast<std::size_t>(piv)]);
        }
        for (int r = c + 1; r < n; ++r) {
            const double f =
                A[static_cast<std::size_t>(r) * n + c] / A[static_cast<std::size_t>(c) * n + c];
            if (f == 0.0) continue;
            for (int j = c; j < n; ++j)
                A[static_cast<std::size_t>(r) * n + j] -=
                    f * A[static_cast<std::size_t>(c) * n + j];
            b[static_cast<std::size_t>(r)] -= f * b[static_cast<std::size_t>(c)];
        }
    }
    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double acc = b[static_cast<std::size_t>(r)];
        for (int j = r + 1; j < n; ++j)
            acc -= A[static_cast<std::size_t>(r) * n + j] * x[static_cast<std::size_t>(j)];
        x[static_cast<std::size_t>(r)] = acc / A[static_cast<std::size_t>(r) * n + r];
    }
    return x;
}

}  // namespace

RateStrategy RateStrategy::constant(RateMatrix q, std::string name) {
    ValidationReport rep = validate_rate_matrix(q);
    if (!rep.ok)
        throw std::invalid_argument("RateStrategy::constant: invalid rate matrix: " +
                                    rep.violations.front().what);
    RateStrategy s;
    s.kind = Kind::Constant;
    s.q = std::move(q);
    s.name = std::move(name);
    return s;
}

RateStrategy RateStrategy::extremal(const RateBoxes& boxes, Monotonicity mono) {
    RateStrategy s;
    s.kind = Kind::Extremal;
    s.q = extremal_matrix(boxes, mono);
    s.boxes = boxes;
    s.name = std::string("extremal(") + to_string(mono) + ")";
    return s;
}

RateStrategy RateStrategy::random_admissible(RateBoxes boxes, std::uint64_t seed) {
    boxes.validate();
    RateStrategy s;
    s.kind = Kind::RandomAdmissible;
    s.boxes = std::move(boxes);
    s.rate_seed = seed;
    s.name = "random-admissible(seed=" + std::to_string(seed) + ")";
    return s;
}

RateStrategy RateStrategy::feedback(RateBoxes boxes, FeedbackFn rule, std::string name) {
    boxes.validate();
    RateStrategy s;
    s.kind = Kind::Feedback;
    s.boxes = std::move(boxes);
    s.rule = std::move(rule);
    s.name = std::move(name);
    return s;
}

StoppingRule StoppingRule::immediate() {
    StoppingRule r;
    r.kind = Kind::Immediate;
    r.name = "immediate";
    return r;
}

StoppingRule StoppingRule::at_maturity() {
    StoppingRule r;
    r.kind = Kind::AtMaturity;
    r.name = "at-maturity";
    return r;
}

StoppingRule StoppingRule::boundary(BoundaryCurves curves, double horizon) {
    StoppingRule r;
    r.kind = Kind::Boundary;
    r.curves = std::move(curves);
    r.horizon = horizon;
    r.name = "pde-boundary";
    return r;
}

double StoppingRule::boundary_level(double remaining, int y) const {
    const auto& ts = curves.t_nodes;
    const auto& sy = curves.s[static_cast<std::size_t>(y - 1)];
    if (ts.size() < 2) return kNaN;
    if (remaining <= ts[1]) return sy[1];  // layer 0 is undefined by construction
    if (remaining >= ts.back()) return sy.back();
    auto it = std::upper_bound(ts.begin(), ts.end(), remaining);
    const std::size_t k = static_cast<std::size_t>(it - ts.begin());
    const double a = sy[k - 1], b = sy[k];
    if (std::isnan(a)) return b;
    if (std::isnan(b)) return a;
    const double w = (remaining - ts[k - 1]) / (ts[k] - ts[k - 1]);
    return a + w * (b - a);
}

bool StoppingRule::stops(int step, int last_step, double t, double x, int y,
                         const PayoffSpec& g) const {
    if (step >= last_step) return true;
    switch (kind) {
        case Kind::Immediate:
            return true;
        case Kind::AtMaturity:
            return false;
        case Kind::Boundary: {
            const double level = boundary_level(horizon - t, y);
            return !std::isnan(level) && x <= level;
        }
        case Kind::Regression: {
            if (step == 0) return false;
            const RegressionSlice& sl =
                slices[static_cast<std::size_t>(step)][static_cast<std::size_t>(y - 1)];
            if (sl.coef.empty()) return false;
            const double gx = g(x);
            if (gx <= 0.0) return false;
            return gx >= poly_eval(sl.coef, (x - sl.center) / sl.spread);
        }
    }
    return false;
}

PathBatch simulate(const ProblemSpec& problem, const RateStrategy& strategy, long n, double dt,
                   std::uint64_t seed) {
    return simulate_impl(problem, strategy, n, dt, seed, true);
}

PathBatch simulate_serial(const ProblemSpec& problem, const RateStrategy& strategy, long n,
                          double dt, std::uint64_t seed) {
    return simulate_impl(problem, strategy, n, dt, seed, false);
}

PriceEstimate price(const PathBatch& batch, const StoppingRule& rule, double alpha,
                    const PayoffSpec& payoff) {
    check_rule_compat(rule, batch.times);
    const int last = batch.n_steps;
    std::vector<double> payoffs(static_cast<std::size_t>(batch.n_paths));

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int p = 0; p < batch.n_paths; ++p) {
        int tau = last;
        for (int s = 0; s <= last; ++s) {
            const double x = batch.x[batch.idx(p, s)];
            const int y = batch.y[batch.idx(p, s)];
            if (rule.stops(s, last, batch.times[static_cast<std::size_t>(s)], x, y, payoff)) {
                tau = s;
                break;
            }
        }
        payoffs[static_cast<std::size_t>(p)] =
            std::exp(-alpha * batch.times[static_cast<std::size_t>(tau)]) *
            payoff(batch.x[batch.idx(p, tau)]);
    }

    std::vector<double> scratch(payoffs.size());
    MeanSe ms = pairwise_mean_se(payoffs.data(), payoffs.size(), scratch.data());
    return {ms.mean, ms.se};
}

PriceEstimate simulate_and_price(const ProblemSpec& problem, const RateStrategy& strategy,
                                 const StoppingRule& rule, long n, double dt,
                                 std::uint64_t seed) {
    problem.validate();
    if (n < 1) throw std::invalid_argument("simulate_and_price: n must be >= 1");
    const int steps = checked_steps(problem.horizon_T, dt);
    std::vector<double> times(static_cast<std::size_t>(steps) + 1);
    for (int s = 0; s <= steps; ++s) times[static_cast<std::size_t>(s)] = s * dt;
    check_rule_compat(rule, times);

    const std::uint64_t diffusion_key = stream_key(seed, detail::kDiffusionStream);
    const std::uint64_t chain_key = stream_key(seed, detail::kChainStream);
    const detail::StrategyContext ctx(problem, strategy, dt, seed);
    const detail::PhiloxNormals normals{diffusion_key};
    const double alpha = problem.alpha;
    const PayoffSpec& payoff = problem.payoff;

    std::vector<double> payoffs(static_cast<std::size_t>(n));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long p = 0; p < n; ++p) {
        double value = 0.0;
        detail::walk_one_path(ctx, chain_key, normals, static_cast<std::uint64_t>(p), steps,
                              [&](int s, double t, double x, int y) {
                                  if (rule.stops(s, steps, t, x, y, payoff)) {
                                      value = std::exp(-alpha * t) * payoff(x);
                                      return false;
                                  }
                                  return true;
                              });
        payoffs[static_cast<std::size_t>(p)] = value;
    }

    std::vector<double> scratch(payoffs.size());
    MeanSe ms = pairwise_mean_se(payoffs.data(), payoffs.size(), scratch.data());
    return {ms.mean, ms.se};
}

StoppingRule fit_regression_rule(const PathBatch& batch, double alpha, const PayoffSpec& payoff,
                                 int basis_degree) {
    if (basis_degree < 2 || basis_degree > 5)
        throw std::invalid_argument("fit_regression_rule: basis_degree must be in {2..5}");
    if (batch.n_paths < 1000)
        throw std::invalid_argument("fit_regression_rule: need at least 1000 paths");

    const int last = batch.n_steps;
    const int m = batch.m;
    const int nb = basis_degree + 1;

    StoppingRule rule;
    rule.kind = StoppingRule::Kind::Regression;
    rule.degree = basis_degree;
    rule.fit_times = batch.times;
    rule.name = "regression(degree=" + std::to_string(basis_degree) + ")";
    rule.slices.assign(static_cast<std::size_t>(last) + 1,
                       std::vector<RegressionSlice>(static_cast<std::size_t>(m)));

    std::vector<double> cash(static_cast<std::size_t>(batch.n_paths));
    std::vector<int> tstop(static_cast<std::size_t>(batch.n_paths), last);
    for (int p = 0; p < batch.n_paths; ++p)
        cash[static_cast<std::size_t>(p)] = payoff(batch.x[batch.idx(p, last)]);

    std::vector<int> itm;
    std::vector<double> G(static_cast<std::size_t>(nb) * nb);
    std::vector<double> rhsv(static_cast<std::size_t>(nb));
    std::vector<double> phi(static_cast<std::size_t>(nb));

    for (int s = last - 1; s >= 1; --s) {
        for (int y = 1; y <= m; ++y) {
            itm.clear();
            for (int p = 0; p < batch.n_paths; ++p) {
                if (batch.y[batch.idx(p, s)] != y) continue;
                if (payoff(batch.x[batch.idx(p, s)]) > 0.0) itm.push_back(p);
            }
            // too little data to support the basis: leave the slice non-stopping
            if (static_cast<int>(itm.size()) < 4 * nb) continue;

            // standardize the regressor over the slice sample
            double mean = 0.0;
            for (int p : itm) mean += batch.x[batch.idx(p, s)];
            mean /= static_cast<double>(itm.size());
            double var = 0.0;
            for (int p : itm) {
                const double d = batch.x[batch.idx(p, s)] - mean;
                var += d * d;
            }
            const double spread = std::sqrt(var / static_cast<double>(itm.size()));
            if (!(spread > 1e-12 * payoff.scale()))
                throw std::runtime_error("degenerate regression matrix: collinear design");

            std::fill(G.begin(), G.end(), 0.0);
            std::fill(rhsv.begin(), rhsv.end(), 0.0);
            for (int p : itm) {
                const double z = (batch.x[batch.idx(p, s)] - mean) / spread;
                phi[0] = 1.0;
                for (int j = 1; j < nb; ++j) phi[static_cast<std::size_t>(j)] =
                    phi[static_cast<std::size_t>(j - 1)] * z;
                const double target =
                    std::exp(-alpha * (batch.times[static_cast<std::size_t>(
                                           tstop[static_cast<std::size_t>(p)])] -
                                       batch.times[static_cast<std::size_t>(s)])) *
                    cash[static_cast<std::size_t>(p)];
                for (int a = 0; a < nb; ++a) {
                    for (int b = 0; b < nb; ++b)
                        G[static_cast<std::size_t>(a) * nb + b] +=
                            phi[static_cast<std::size_t>(a)] * phi[static_cast<std::size_t>(b)];
                    rhsv[static_cast<std::size_t>(a)] += phi[static_cast<std::size_t>(a)] * target;
                }
            }
            RegressionSlice sl;
            sl.center = mean;
            sl.spread = spread;
            sl.coef = solve_dense(G, rhsv, nb);

            for (int p : itm) {
                const double x = batch.x[batch.idx(p, s)];
                const double gx = payoff(x);
                if (gx >= poly_eval(sl.coef, (x - mean) / spread)) {
                    cash[static_cast<std::size_t>(p)] = gx;
                    tstop[static_cast<std::size_t>(p)] = s;
                }
            }
            rule.slices[static_cast<std::size_t>(s)][static_cast<std::size_t>(y - 1)] =
                std::move(sl);
        }
    }
    return rule;
}

MomentReport moment_bound_check(const ProblemSpec& problem, double k_growth, double q_exp,
                                double t, long n, double dt, std::uint64_t seed,
                                const RateMatrix* chain) {
    problem.validate();
    if (problem.dynamics == DynamicsType::CEV)
        throw std::invalid_argument(
            "moment_bound_check: CEV has superlinear growth and is not supported");
    if (q_exp < 0.0) throw std::invalid_argument("moment_bound_check: q must be >= 0");
    if (!(t > 0.0)) throw std::invalid_argument("moment_bound_check: t must be > 0");

    double k_required = 0.0;
    if (problem.dynamics == DynamicsType::GBM)
        k_required = std::max(problem.sigma_max(), problem.mu);
    else
        k_required = problem.sigma_max() * problem.a.max_value();
    if (k_growth + 1e-12 < k_required)
        throw std::invalid_argument(
            "moment_bound_check: declared K_growth is below the linear-growth constant");

    RateStrategy strategy;
    if (problem.regimes() == 1) {
        strategy = RateStrategy::constant(RateMatrix(1), "single-regime");
    } else {
        if (!chain)
            throw std::invalid_argument(
                "moment_bound_check: multi-regime problems need an explicit chain matrix");
        strategy = RateStrategy::constant(*chain, "moment-chain");
    }

    ProblemSpec local = problem;
    local.horizon_T = t;
    const int steps = checked_steps(t, dt);
    const std::uint64_t diffusion_key = stream_key(seed, detail::kDiffusionStream);
    const std::uint64_t chain_key = stream_key(seed, detail::kChainStream);
    const detail::StrategyContext ctx(local, strategy, dt, seed);
    const detail::PhiloxNormals normals{diffusion_key};

    std::vector<double> sup_pow(static_cast<std::size_t>(n));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long p = 0; p < n; ++p) {
        double sup_abs = std::abs(local.x0);
        detail::walk_one_path(ctx, chain_key, normals, static_cast<std::uint64_t>(p), steps,
                              [&](int, double, double x, int) {
                                  const double a = std::abs(x);
                                  if (a > sup_abs) sup_abs = a;
                                  return true;
                              });
        sup_pow[static_cast<std::size_t>(p)] = std::pow(sup_abs, q_exp);
    }

    MomentReport rep;
    rep.q = q_exp;
    rep.k_growth = k_growth;
    rep.empirical = pairwise_sum(sup_pow.data(), sup_pow.size()) / static_cast<double>(n);
    rep.bound = std::pow((1.0 + 4.0 * local.x0 * local.x0) *
                             std::exp(8.0 * k_growth * k_growth * t * (4.0 + t)),
                         q_exp / 2.0);
    rep.pass = rep.empirical <= rep.bound;
    return rep;
}

}  // namespace rsq
