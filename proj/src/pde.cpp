#include "rsq/pde.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>

#include "rsq/extremal.hpp"

namespace rsq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

/// Uniform nodes covering [lo, hi] with the anchor exactly on a node.
std::vector<double> balanced_nodes(double lo, double hi, double anchor, int n,
                                   int* anchor_index = nullptr) {
    double frac = (anchor - lo) / (hi - lo);
    int k_anchor = static_cast<int>(std::llround(frac * (n - 1)));
    k_anchor = std::clamp(k_anchor, 1, n - 2);
    double h = std::max((anchor - lo) / k_anchor, (hi - anchor) / (n - 1 - k_anchor));
    std::vector<double> nodes(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) nodes[j] = anchor + (j - k_anchor) * h;
    nodes[static_cast<size_t>(k_anchor)] = anchor;
    if (anchor_index) *anchor_index = k_anchor;
    return nodes;
}

/// Spatial operator coefficients per (regime, node), discount included:
/// (L v)_i = lo v_{i-1} + cen v_i + up v_{i+1}  (+ regime coupling).
struct Stencil {
    std::vector<double> lo, up, cen;  // size m*nx, interior entries meaningful
};

Stencil build_stencil(const ProblemSpec& prob, const Grid& grid) {
    const int nx = grid.nx();
    const int m = prob.regimes();
    const bool log_coords = grid.transform == Transform::Log;

    std::vector<double> psi(static_cast<size_t>(nx));
    for (int i = 0; i < nx; ++i)
        psi[i] = log_coords ? std::log(grid.x_nodes[i]) : grid.x_nodes[i];

    Stencil st;
    st.lo.assign(static_cast<size_t>(m) * nx, 0.0);
    st.up.assign(static_cast<size_t>(m) * nx, 0.0);
    st.cen.assign(static_cast<size_t>(m) * nx, 0.0);

    for (int y = 0; y < m; ++y) {
        const double sig2 = prob.sigma[y] * prob.sigma[y];
        for (int i = 1; i + 1 < nx; ++i) {
            const double x = grid.x_nodes[i];
            const double ax = prob.diffusion_coeff(x);
            double diff, drift;
            if (log_coords) {
                const double r = ax / x;
                diff = 0.5 * sig2 * r * r;
                drift = prob.drift_coeff(x) / x - diff;
            } else {
                diff = 0.5 * sig2 * ax * ax;
                drift = prob.drift_coeff(x);
            }
            const double hm = psi[i] - psi[i - 1];
            const double hp = psi[i + 1] - psi[i];
            const size_t n = static_cast<size_t>(y) * nx + i;
            st.lo[n] = diff * 2.0 / (hm * (hm + hp)) - drift * hp / (hm * (hm + hp));
            st.up[n] = diff * 2.0 / (hp * (hm + hp)) + drift * hm / (hp * (hm + hp));
            st.cen[n] = -diff * 2.0 / (hm * hp) + drift * (hp - hm) / (hm * hp) - prob.alpha;
        }
    }
    return st;
}

struct BoundaryValues {
    double left = 0.0, right = 0.0;  // Dirichlet, applied at layers k >= 1
};

BoundaryValues boundary_values(const ProblemSpec& prob, const Grid& grid) {
    BoundaryValues bc;
    const double x_lo = grid.x_nodes.front();
    const double x_hi = grid.x_nodes.back();
    const bool priced_asset =
        prob.dynamics == DynamicsType::GBM || prob.dynamics == DynamicsType::CEV;
    if (prob.payoff.is_put() && priced_asset) {
        bc.left = prob.payoff.strike;  // deep in-the-money end: immediate exercise pays ~K
        bc.right = x_hi >= prob.payoff.strike ? 0.0 : prob.payoff(x_hi);
    } else {
        bc.left = prob.payoff(x_lo);
        bc.right = prob.payoff(x_hi);
    }
    return bc;
}

struct PsorOutcome {
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;
};

/// Projected SOR over the full regime block, regimes in index order.
PsorOutcome psor_layer(const Stencil& st, const std::vector<double>& g,
                       const std::vector<double>& rhs, std::vector<double>& cur,
                       const std::vector<double>& lamP, const std::vector<double>& lamM,
                       double theta_dt, int nx, int m, const SolverParams& prm) {
    const double stop_tol = prm.tol * 0.1;
    PsorOutcome out;
    for (int iter = 1; iter <= prm.max_iter; ++iter) {
        double max_diff = 0.0;
        for (int y = 0; y < m; ++y) {
            const size_t base = static_cast<size_t>(y) * nx;
            const double* vup = (y + 1 < m) ? cur.data() + base + nx : nullptr;
            const double* vdn = (y > 0) ? cur.data() + base - nx : nullptr;
            for (int i = 1; i + 1 < nx; ++i) {
                const size_t n = base + i;
                const double lp = lamP[n];
                const double lm = lamM[n];
                double num = rhs[n] + theta_dt * (st.lo[n] * cur[n - 1] + st.up[n] * cur[n + 1]);
                if (vup) num += theta_dt * lp * vup[i];
                if (vdn) num += theta_dt * lm * vdn[i];
                const double diag = 1.0 - theta_dt * (st.cen[n] - lp - lm);
                const double vold = cur[n];
                double vnew = vold + prm.omega * (num / diag - vold);
                if (vnew < g[i]) vnew = g[i];
                const double d = std::abs(vnew - vold);
                if (d > max_diff) max_diff = d;
                cur[n] = vnew;
            }
        }
        out.iterations = iter;
        out.residual = max_diff;
        if (max_diff <= stop_tol) {
            out.converged = true;
            return out;
        }
    }
    return out;
}

void fill_constant_field(const RateMatrix& q, int nx, std::vector<double>& lamP,
                         std::vector<double>& lamM) {
    for (int y = 0; y < q.m; ++y) {
        const double up = q.up_rate(y);
        const double dn = q.down_rate(y);
        std::fill_n(lamP.begin() + static_cast<size_t>(y) * nx, nx, up);
        std::fill_n(lamM.begin() + static_cast<size_t>(y) * nx, nx, dn);
    }
}

void bang_bang_field(const std::vector<double>& layer, const RateBoxes& boxes, int nx, int m,
                     std::vector<double>& lamP, std::vector<double>& lamM) {
    for (int y = 0; y < m; ++y) {
        const size_t base = static_cast<size_t>(y) * nx;
        for (int i = 0; i < nx; ++i) {
            const double dv_up = (y + 1 < m) ? layer[base + nx + i] - layer[base + i] : 0.0;
            const double dv_dn = (y > 0) ? layer[base - nx + i] - layer[base + i] : 0.0;
            const PointRates pr = pointwise_rates(dv_up, dv_dn, y + 1, boxes);
            lamP[base + i] = (y + 1 < m) ? pr.lambda_plus : 0.0;
            lamM[base + i] = (y > 0) ? pr.lambda_minus : 0.0;
        }
    }
}

struct MarchOutput {
    ValueSurface surface;
    RateField field;
};

MarchOutput march(const ProblemSpec& prob, const Grid& grid, const SolverParams& prm,
                  const RateMatrix* q_const, const RateBoxes* boxes) {
    prob.validate();
    grid.validate();
    const int nx = grid.nx();
    const int nt = grid.nt();
    const int m = prob.regimes();
    const size_t slab = static_cast<size_t>(m) * nx;
    const bool hjb = boxes != nullptr;

    if (prob.dynamics == DynamicsType::CEV && grid.x_nodes.front() <= 0.0)
        throw std::invalid_argument("solve: CEV requires a grid with x_min > 0");
    if (grid.transform == Transform::Log && grid.x_nodes.front() <= 0.0)
        throw std::invalid_argument("solve: log transform requires positive x nodes");

    if (q_const) {
        if (q_const->m != m)
            throw std::invalid_argument("solve_constant: rate matrix regime count mismatch");
        ValidationReport rep = validate_rate_matrix(*q_const);
        if (!rep.ok)
            throw std::invalid_argument("solve_constant: rate matrix failed validation: " +
                                        rep.violations.front().what);
    }
    if (hjb) {
        boxes->validate();
        if (boxes->regimes() != m)
            throw std::invalid_argument("solve_worstcase_hjb: box regime count mismatch");
    }

    std::vector<double> g(static_cast<size_t>(nx));
    for (int i = 0; i < nx; ++i) g[i] = prob.payoff(grid.x_nodes[i]);
    const double mask_tol = kMaskTolRel * prob.payoff.scale();

    const Stencil st = build_stencil(prob, grid);
    const BoundaryValues bc = boundary_values(prob, grid);

    MarchOutput out;
    ValueSurface& sf = out.surface;
    sf.grid = grid;
    sf.problem = prob;
    sf.nx = nx;
    sf.m = m;
    sf.nt = nt;
    sf.v.assign(slab * nt, 0.0);
    sf.exercise_mask.assign(slab * nt, 0);

    RateField& rf = out.field;
    if (hjb) {
        rf.nx = nx;
        rf.m = m;
        rf.nt = nt;
        rf.lambda_plus.assign(slab * nt, 0.0);
        rf.lambda_minus.assign(slab * nt, 0.0);
    }

    std::vector<double> prev(slab), cur(slab), rhs(slab);
    std::vector<double> lamP(slab, 0.0), lamM(slab, 0.0), lamP2, lamM2;
    if (q_const) fill_constant_field(*q_const, nx, lamP, lamM);
    if (hjb) {
        lamP2.assign(slab, 0.0);
        lamM2.assign(slab, 0.0);
    }

    // layer 0: v = g exactly
    for (int y = 0; y < m; ++y)
        std::copy(g.begin(), g.end(), prev.begin() + static_cast<size_t>(y) * nx);
    std::copy(prev.begin(), prev.end(), sf.v.begin());
    for (size_t n = 0; n < slab; ++n) sf.exercise_mask[n] = 1;
    if (hjb) {
        bang_bang_field(prev, *boxes, nx, m, lamP, lamM);
        std::copy(lamP.begin(), lamP.end(), rf.lambda_plus.begin());
        std::copy(lamM.begin(), lamM.end(), rf.lambda_minus.begin());
    }

    for (int k = 1; k < nt; ++k) {
        const double dt = grid.t_nodes[k] - grid.t_nodes[k - 1];
        const double theta = (k <= prm.rannacher_layers) ? 1.0 : 0.5;
        const double theta_dt = theta * dt;
        const double expl_dt = (1.0 - theta) * dt;

        if (hjb) bang_bang_field(prev, *boxes, nx, m, lamP, lamM);

        for (int sweep = 0;; ++sweep) {
            // explicit side on the previous layer with the current rate field
            if (expl_dt == 0.0) {
                std::copy(prev.begin(), prev.end(), rhs.begin());
            } else {
                for (int y = 0; y < m; ++y) {
                    const size_t base = static_cast<size_t>(y) * nx;
                    for (int i = 1; i + 1 < nx; ++i) {
                        const size_t n = base + i;
                        double Lv = st.lo[n] * prev[n - 1] + st.cen[n] * prev[n] +
                                    st.up[n] * prev[n + 1];
                        if (y + 1 < m) Lv += lamP[n] * (prev[n + nx] - prev[n]);
                        if (y > 0) Lv += lamM[n] * (prev[n - nx] - prev[n]);
                        rhs[n] = prev[n] + expl_dt * Lv;
                    }
                    rhs[base] = prev[base];
                    rhs[base + nx - 1] = prev[base + nx - 1];
                }
            }

            std::copy(prev.begin(), prev.end(), cur.begin());
            for (int y = 0; y < m; ++y) {
                cur[static_cast<size_t>(y) * nx] = bc.left;
                cur[static_cast<size_t>(y) * nx + nx - 1] = bc.right;
            }

            PsorOutcome ps = psor_layer(st, g, rhs, cur, lamP, lamM, theta_dt, nx, m, prm);
            if (!ps.converged)
                throw std::runtime_error(
                    "PSOR did not converge at layer " + std::to_string(k) + " (residual " +
                    std::to_string(ps.residual) + ", " + std::to_string(ps.iterations) +
                    " iterations)");

            if (!hjb) break;
            bang_bang_field(cur, *boxes, nx, m, lamP2, lamM2);
            if (lamP2 == lamP && lamM2 == lamM) break;
            if (sweep + 1 >= prm.max_policy_sweeps)
                throw std::runtime_error("policy iteration did not stabilize at layer " +
                                         std::to_string(k));
            lamP.swap(lamP2);
            lamM.swap(lamM2);
        }

        double* layer_v = sf.v.data() + slab * k;
        std::uint8_t* layer_mask = sf.exercise_mask.data() + slab * k;
        for (int y = 0; y < m; ++y) {
            const size_t base = static_cast<size_t>(y) * nx;
            for (int i = 0; i < nx; ++i) {
                layer_v[base + i] = cur[base + i];
                layer_mask[base + i] = (cur[base + i] - g[i] < mask_tol) ? 1 : 0;
            }
        }
        if (hjb) {
            std::copy(lamP.begin(), lamP.end(), rf.lambda_plus.begin() + slab * k);
            std::copy(lamM.begin(), lamM.end(), rf.lambda_minus.begin() + slab * k);
        }
        prev.swap(cur);
    }
    return out;
}

}  // namespace

void Grid::validate() const {
    require(x_nodes.size() >= 3, "grid: need at least 3 space nodes");
    require(t_nodes.size() >= 2, "grid: need at least 2 time nodes");
    for (size_t i = 1; i < x_nodes.size(); ++i)
        require(x_nodes[i] > x_nodes[i - 1], "grid: x nodes must be strictly increasing");
    require(t_nodes.front() == 0.0, "grid: time nodes must start at 0");
    const double dt = t_nodes[1] - t_nodes[0];
    for (size_t k = 1; k < t_nodes.size(); ++k) {
        double step = t_nodes[k] - t_nodes[k - 1];
        require(step > 0.0 && std::abs(step - dt) <= 1e-12 * t_nodes.back(),
                "grid: time nodes must be uniform and increasing");
    }
    if (transform == Transform::Log)
        require(x_nodes.front() > 0.0, "grid: log transform requires positive x nodes");
}

Grid build_grid(const ProblemSpec& problem, int nx, int nt, double width_mult) {
    problem.validate();
    require(nx >= 3, "build_grid: nx must be >= 3");
    require(nt >= 2, "build_grid: nt must be >= 2");
    require(width_mult > 0.0, "build_grid: width_mult must be > 0");

    const double W = width_mult * problem.sigma_max() * std::sqrt(problem.horizon_T);
    Grid grid;
    switch (problem.dynamics) {
        case DynamicsType::GBM: {
            const double c = std::log(problem.x0);
            int k0 = 0;
            grid.x_nodes = balanced_nodes(c - W, c + W, c, nx, &k0);
            for (double& v : grid.x_nodes) v = std::exp(v);
            grid.x_nodes[static_cast<size_t>(k0)] = problem.x0;
            grid.transform = Transform::Log;
            break;
        }
        case DynamicsType::CEV: {
            const double xlo = problem.x0 * std::exp(-W);
            const double xhi = problem.x0 * std::exp(W);
            grid.x_nodes = balanced_nodes(xlo, xhi, problem.x0, nx);
            if (grid.x_nodes.front() <= 0.0)
                throw std::invalid_argument(
                    "build_grid: CEV grid has x_min <= 0; increase nx or reduce width_mult");
            grid.transform = Transform::Identity;
            break;
        }
        case DynamicsType::Driftless: {
            const double half = width_mult * problem.a(problem.x0) * problem.sigma_max() *
                                std::sqrt(problem.horizon_T);
            grid.x_nodes = balanced_nodes(problem.x0 - half, problem.x0 + half, problem.x0, nx);
            grid.transform = Transform::Identity;
            break;
        }
    }
    grid.t_nodes.resize(static_cast<size_t>(nt));
    for (int k = 0; k < nt; ++k)
        grid.t_nodes[static_cast<size_t>(k)] = problem.horizon_T * k / (nt - 1);
    grid.validate();
    return grid;
}

double ValueSurface::value_at(double x, int y, int k) const {
    const auto& xs = grid.x_nodes;
    if (x <= xs.front()) return at(0, y, k);
    if (x >= xs.back()) return at(nx - 1, y, k);
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    int j = static_cast<int>(it - xs.begin());
    double w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    return at(j - 1, y, k) + w * (at(j, y, k) - at(j - 1, y, k));
}

double ValueSurface::price_at_start() const {
    return value_at(problem.x0, problem.y0 - 1, nt - 1);
}

bool RateField::constant_entries(RateMatrix* implied) const {
    RateMatrix q(m);
    for (int y = 0; y < m; ++y) {
        const double up0 = lambda_plus[idx(0, y, 0)];
        const double dn0 = lambda_minus[idx(0, y, 0)];
        for (int k = 0; k < nt; ++k)
            for (int i = 0; i < nx; ++i) {
                if (lambda_plus[idx(i, y, k)] != up0) return false;
                if (lambda_minus[idx(i, y, k)] != dn0) return false;
            }
        if (y + 1 < m) q.at(y, y + 1) = up0;
        if (y > 0) q.at(y, y - 1) = dn0;
    }
    for (int y = 0; y < m; ++y) {
        double off = 0.0;
        for (int j = 0; j < m; ++j)
            if (j != y) off += q.at(y, j);
        q.at(y, y) = -off;
    }
    if (implied) *implied = q;
    return true;
}

ValueSurface solve_constant(const ProblemSpec& problem, const RateMatrix& q, const Grid& grid,
                            const SolverParams& params) {
    return march(problem, grid, params, &q, nullptr).surface;
}

std::pair<ValueSurface, RateField> solve_worstcase_hjb(const ProblemSpec& problem,
                                                       const RateBoxes& boxes, const Grid& grid,
                                                       const SolverParams& params) {
    MarchOutput out = march(problem, grid, params, nullptr, &boxes);
    return {std::move(out.surface), std::move(out.field)};
}

BoundaryCurves extract_boundary(const ValueSurface& surface) {
    if (!surface.problem.payoff.is_put())
        throw std::invalid_argument(
            "extract_boundary: only the put payoff has threshold-type exercise regions");

    const int nx = surface.nx, m = surface.m, nt = surface.nt;
    const double mask_tol = kMaskTolRel * surface.problem.payoff.scale();
    BoundaryCurves curves;
    curves.t_nodes = surface.grid.t_nodes;
    curves.s.assign(static_cast<size_t>(m), std::vector<double>(static_cast<size_t>(nt), kNaN));

    for (int y = 0; y < m; ++y) {
        for (int k = 1; k < nt; ++k) {
            // The put exercises below a threshold, so the genuine exercise
            // block lives where the payoff is positive; nodes far out of the
            // money sit below mask resolution (v ~ 0 = g) and are skipped.
            int top = -1;
            for (int i = nx - 1; i >= 0; --i) {
                if (surface.problem.payoff(surface.grid.x_nodes[static_cast<size_t>(i)]) <=
                    0.0)
                    continue;
                if (surface.exercised(i, y, k)) {
                    top = i;
                    break;
                }
            }
            if (top < 0) continue;  // empty exercise region at this layer
            if (top == nx - 1) {
                curves.s[y][k] = surface.grid.x_nodes.back();
                continue;
            }
            const double gi = surface.problem.payoff(surface.grid.x_nodes[top]);
            const double gn = surface.problem.payoff(surface.grid.x_nodes[top + 1]);
            const double d0 = surface.at(top, y, k) - gi;
            const double d1 = surface.at(top + 1, y, k) - gn;
            const double w = (d1 > d0) ? (mask_tol - d0) / (d1 - d0) : 0.0;
            curves.s[y][k] = surface.grid.x_nodes[top] +
                             w * (surface.grid.x_nodes[top + 1] - surface.grid.x_nodes[top]);
        }
    }
    return curves;
}

Grid refine_grid(const Grid& grid) {
    Grid fine;
    fine.transform = grid.transform;
    const bool log_coords = grid.transform == Transform::Log;
    fine.x_nodes.reserve(grid.x_nodes.size() * 2 - 1);
    for (size_t i = 0; i + 1 < grid.x_nodes.size(); ++i) {
        fine.x_nodes.push_back(grid.x_nodes[i]);
        if (log_coords)
            fine.x_nodes.push_back(std::sqrt(grid.x_nodes[i] * grid.x_nodes[i + 1]));
        else
            fine.x_nodes.push_back(0.5 * (grid.x_nodes[i] + grid.x_nodes[i + 1]));
    }
    fine.x_nodes.push_back(grid.x_nodes.back());
    const int nt = grid.nt();
    const double T = grid.t_nodes.back();
    const int fine_nt = 2 * (nt - 1) + 1;
    fine.t_nodes.resize(static_cast<size_t>(fine_nt));
    for (int k = 0; k < fine_nt; ++k)
        fine.t_nodes[static_cast<size_t>(k)] = T * k / (fine_nt - 1);
    fine.validate();
    return fine;
}

double surface_sup_diff(const ValueSurface& a, const ValueSurface& b) {
    if (a.nx != b.nx || a.m != b.m || a.nt != b.nt || a.grid.x_nodes != b.grid.x_nodes ||
        a.grid.t_nodes != b.grid.t_nodes)
        throw std::invalid_argument("surface_sup_diff: shape or grid mismatch");
    double sup = 0.0;
    for (size_t n = 0; n < a.v.size(); ++n) sup = std::max(sup, std::abs(a.v[n] - b.v[n]));
    return sup;
}

SurfaceCheck check_surface_invariants(const ValueSurface& sf) {
    SurfaceCheck chk;
    const int nx = sf.nx, m = sf.m, nt = sf.nt;

    double worst_obstacle = 0.0;
    for (int k = 0; k < nt; ++k)
        for (int y = 0; y < m; ++y)
            for (int i = 0; i < nx; ++i) {
                double gap = sf.problem.payoff(sf.grid.x_nodes[i]) - sf.at(i, y, k);
                if (gap > worst_obstacle) worst_obstacle = gap;
            }
    chk.worst_obstacle = worst_obstacle;
    chk.obstacle_ok = worst_obstacle <= 1e-10;

    double worst_initial = 0.0;
    for (int y = 0; y < m; ++y)
        for (int i = 0; i < nx; ++i)
            worst_initial = std::max(
                worst_initial, std::abs(sf.at(i, y, 0) - sf.problem.payoff(sf.grid.x_nodes[i])));
    chk.initial_ok = worst_initial == 0.0;

    double worst_time = 0.0;
    for (int k = 1; k < nt; ++k)
        for (int y = 0; y < m; ++y)
            for (int i = 0; i < nx; ++i) {
                double drop = sf.at(i, y, k - 1) - sf.at(i, y, k);
                if (drop > worst_time) worst_time = drop;
            }
    chk.worst_time = worst_time;
    chk.time_monotone_ok = worst_time <= 1e-10;

    Monotonicity mono = sigma_monotonicity(sf.problem.sigma);
    if (m >= 2 && (mono == Monotonicity::Increasing || mono == Monotonicity::Decreasing)) {
        chk.regime_checked = true;
        double worst = 0.0;
        for (int k = 0; k < nt; ++k)
            for (int y = 0; y + 1 < m; ++y)
                for (int i = 0; i < nx; ++i) {
                    double gap = (mono == Monotonicity::Increasing)
                                     ? sf.at(i, y, k) - sf.at(i, y + 1, k)
                                     : sf.at(i, y + 1, k) - sf.at(i, y, k);
                    if (gap > worst) worst = gap;
                }
        chk.worst_regime = worst;
        chk.regime_monotone_ok = worst <= 1e-8;
    }
    return chk;
}

}  // namespace rsq
