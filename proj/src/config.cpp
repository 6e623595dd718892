#include "rsq/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace rsq {

namespace {

const ordered_json& field(const ordered_json& j, const std::string& key,
                          const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(path + key + ": required field is missing");
    return *it;
}

double num_at(const ordered_json& j, const std::string& key, const std::string& path) {
    const ordered_json& v = field(j, key, path);
    if (!v.is_number()) throw ConfigError(path + key + ": expected a number");
    return v.get<double>();
}

double num_or(const ordered_json& j, const std::string& key, double fallback) {
    auto it = j.find(key);
    return it == j.end() ? fallback : it->get<double>();
}

std::vector<double> num_list(const ordered_json& j, const std::string& key,
                             const std::string& path) {
    const ordered_json& v = field(j, key, path);
    if (!v.is_array() || v.empty())
        throw ConfigError(path + key + ": expected a non-empty array of numbers");
    std::vector<double> out;
    for (const auto& e : v) out.push_back(e.get<double>());
    return out;
}

std::vector<Interval> interval_list(const ordered_json& v, const std::string& path) {
    std::vector<Interval> out;
    for (size_t i = 0; i < v.size(); ++i) {
        const auto& e = v[i];
        if (!e.is_array() || e.size() != 2)
            throw ConfigError(path + "[" + std::to_string(i) + "]: expected [lo, hi]");
        out.push_back({e[0].get<double>(), e[1].get<double>()});
    }
    return out;
}

}  // namespace

Config parse_config(const ordered_json& j) {
    Config cfg;

    const ordered_json& model = field(j, "model", "");
    const std::string type = field(model, "type", "model.").get<std::string>();
    ProblemSpec& p = cfg.problem;
    if (type == "gbm") {
        p.dynamics = DynamicsType::GBM;
        p.mu = num_at(model, "mu", "model.");
    } else if (type == "cev") {
        p.dynamics = DynamicsType::CEV;
        p.gamma = num_at(model, "gamma", "model.");
    } else if (type == "driftless") {
        p.dynamics = DynamicsType::Driftless;
        if (model.contains("a_table")) {
            const auto& tbl = model["a_table"];
            for (size_t i = 0; i < tbl.size(); ++i) {
                if (!tbl[i].is_array() || tbl[i].size() != 2)
                    throw ConfigError("model.a_table[" + std::to_string(i) +
                                      "]: expected [x, a]");
                p.a.xs.push_back(tbl[i][0].get<double>());
                p.a.vs.push_back(tbl[i][1].get<double>());
            }
        } else {
            p.a.value = num_or(model, "a_const", 1.0);
        }
    } else {
        throw ConfigError("model.type: expected \"gbm\", \"cev\" or \"driftless\"");
    }
    p.sigma = num_list(model, "sigma", "model.");

    const ordered_json& payoff = field(j, "payoff", "");
    const std::string pkind = field(payoff, "type", "payoff.").get<std::string>();
    const double beta = num_or(payoff, "holder_beta", 1.0);
    if (pkind == "put") {
        p.payoff = PayoffSpec::put(num_at(payoff, "strike", "payoff."), beta);
    } else if (pkind == "table") {
        const ordered_json& pts = field(payoff, "points", "payoff.");
        std::vector<double> xs, vs;
        for (size_t i = 0; i < pts.size(); ++i) {
            if (!pts[i].is_array() || pts[i].size() != 2)
                throw ConfigError("payoff.points[" + std::to_string(i) + "]: expected [x, v]");
            xs.push_back(pts[i][0].get<double>());
            vs.push_back(pts[i][1].get<double>());
        }
        p.payoff = PayoffSpec::table(std::move(xs), std::move(vs), beta);
    } else {
        throw ConfigError("payoff.type: expected \"put\" or \"table\"");
    }

    p.horizon_T = num_at(j, "horizon", "");
    p.alpha = num_at(j, "alpha", "");
    p.x0 = num_at(j, "x0", "");
    p.y0 = static_cast<int>(num_or(j, "y0", 1));

    if (j.contains("boxes")) {
        const ordered_json& b = j["boxes"];
        cfg.boxes.plus = interval_list(field(b, "plus", "boxes."), "boxes.plus");
        cfg.boxes.minus = interval_list(field(b, "minus", "boxes."), "boxes.minus");
        cfg.has_boxes = true;
        try {
            cfg.boxes.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("boxes: ") + e.what());
        }
        if (cfg.boxes.regimes() != p.regimes())
            throw ConfigError("boxes: interval count does not match the regime count");
    }

    if (j.contains("grid")) {
        const ordered_json& g = j["grid"];
        cfg.grid.nx = static_cast<int>(num_or(g, "nx", cfg.grid.nx));
        cfg.grid.nt = static_cast<int>(num_or(g, "nt", cfg.grid.nt));
        cfg.grid.width_mult = num_or(g, "width_mult", cfg.grid.width_mult);
    }
    if (j.contains("mc")) {
        const ordered_json& m = j["mc"];
        cfg.mc.n_paths = static_cast<long>(num_or(m, "n_paths", static_cast<double>(cfg.mc.n_paths)));
        cfg.mc.dt = num_or(m, "dt", cfg.mc.dt);
        cfg.mc.seed = static_cast<std::uint64_t>(num_or(m, "seed", 12345.0));
    }
    if (j.contains("checks")) {
        const ordered_json& c = j["checks"];
        cfg.checks.dominance_matrices =
            static_cast<int>(num_or(c, "dominance_matrices", cfg.checks.dominance_matrices));
        if (c.contains("dominance_endpoints"))
            cfg.checks.dominance_endpoints = c["dominance_endpoints"].get<bool>();
        cfg.checks.brute_force_samples =
            static_cast<int>(num_or(c, "brute_force_samples", cfg.checks.brute_force_samples));
        if (c.contains("moment_orders")) {
            cfg.checks.moment_orders.clear();
            for (const auto& e : c["moment_orders"])
                cfg.checks.moment_orders.push_back(e.get<double>());
        }
        cfg.checks.moment_k_growth = num_or(c, "moment_k_growth", cfg.checks.moment_k_growth);
    }
    if (j.contains("rate_matrix")) {
        const ordered_json& q = j["rate_matrix"];
        const int m = p.regimes();
        if (!q.is_array() || static_cast<int>(q.size()) != m)
            throw ConfigError("rate_matrix: expected an m x m array of rows");
        cfg.rate_matrix = RateMatrix(m);
        for (int i = 0; i < m; ++i) {
            if (!q[static_cast<size_t>(i)].is_array() ||
                static_cast<int>(q[static_cast<size_t>(i)].size()) != m)
                throw ConfigError("rate_matrix[" + std::to_string(i) + "]: expected m entries");
            for (int c2 = 0; c2 < m; ++c2)
                cfg.rate_matrix.at(i, c2) =
                    q[static_cast<size_t>(i)][static_cast<size_t>(c2)].get<double>();
        }
        ValidationReport rep = validate_rate_matrix(cfg.rate_matrix);
        if (!rep.ok)
            throw ConfigError("rate_matrix: " + rep.violations.front().what + " at (" +
                              std::to_string(rep.violations.front().row) + "," +
                              std::to_string(rep.violations.front().col) + ")");
        cfg.has_rate_matrix = true;
    }

    try {
        cfg.problem.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not readable: " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return parse_config(j);
}

std::string format_sig(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_surface_csv(std::ostream& os, const ValueSurface& sf) {
    os << "x,regime,t,v,exercised\n";
    for (int k = 0; k < sf.nt; ++k)
        for (int y = 0; y < sf.m; ++y)
            for (int i = 0; i < sf.nx; ++i)
                os << format_sig(sf.grid.x_nodes[static_cast<size_t>(i)]) << ',' << (y + 1) << ','
                   << format_sig(sf.grid.t_nodes[static_cast<size_t>(k)]) << ','
                   << format_sig(sf.at(i, y, k)) << ',' << (sf.exercised(i, y, k) ? 1 : 0)
                   << '\n';
}

void write_boundary_csv(std::ostream& os, const BoundaryCurves& curves) {
    os << "t,regime,s_star\n";
    for (size_t k = 0; k < curves.t_nodes.size(); ++k)
        for (size_t y = 0; y < curves.s.size(); ++y)
            os << format_sig(curves.t_nodes[k]) << ',' << (y + 1) << ','
               << format_sig(curves.s[y][k]) << '\n';
}

void write_batch_summary_csv(std::ostream& os, const PathBatch& batch) {
    os << "n_paths,n_steps,dt,floor_events,floor_fraction,floor_warning\n";
    os << batch.n_paths << ',' << batch.n_steps << ',' << format_sig(batch.dt) << ','
       << batch.floor_events << ',' << format_sig(batch.floor_fraction()) << ','
       << (batch.floor_warning ? 1 : 0) << '\n';
}

void write_paths_csv(std::ostream& os, const PathBatch& batch) {
    os << "path,step,t,x,y\n";
    for (int p = 0; p < batch.n_paths; ++p)
        for (int s = 0; s <= batch.n_steps; ++s)
            os << p << ',' << s << ',' << format_sig(batch.times[static_cast<size_t>(s)]) << ','
               << format_sig(batch.x[batch.idx(p, s)]) << ',' << batch.y[batch.idx(p, s)]
               << '\n';
}

ordered_json problem_to_json(const ProblemSpec& p) {
    ordered_json model;
    switch (p.dynamics) {
        case DynamicsType::GBM:
            model["type"] = "gbm";
            model["mu"] = p.mu;
            break;
        case DynamicsType::CEV:
            model["type"] = "cev";
            model["gamma"] = p.gamma;
            break;
        case DynamicsType::Driftless:
            model["type"] = "driftless";
            if (p.a.xs.empty()) {
                model["a_const"] = p.a.value;
            } else {
                ordered_json tbl = ordered_json::array();
                for (size_t i = 0; i < p.a.xs.size(); ++i)
                    tbl.push_back({p.a.xs[i], p.a.vs[i]});
                model["a_table"] = tbl;
            }
            break;
    }
    model["sigma"] = p.sigma;

    ordered_json payoff;
    if (p.payoff.kind == PayoffSpec::Kind::Put) {
        payoff["type"] = "put";
        payoff["strike"] = p.payoff.strike;
    } else {
        payoff["type"] = "table";
        ordered_json pts = ordered_json::array();
        for (size_t i = 0; i < p.payoff.xs.size(); ++i)
            pts.push_back({p.payoff.xs[i], p.payoff.vs[i]});
        payoff["points"] = pts;
    }
    payoff["holder_beta"] = p.payoff.holder_beta;

    ordered_json j;
    j["model"] = model;
    j["payoff"] = payoff;
    j["horizon"] = p.horizon_T;
    j["alpha"] = p.alpha;
    j["x0"] = p.x0;
    j["y0"] = p.y0;
    return j;
}

ordered_json boxes_to_json(const RateBoxes& boxes) {
    ordered_json plus = ordered_json::array();
    ordered_json minus = ordered_json::array();
    for (const auto& iv : boxes.plus) plus.push_back({iv.lo, iv.hi});
    for (const auto& iv : boxes.minus) minus.push_back({iv.lo, iv.hi});
    return ordered_json{{"plus", plus}, {"minus", minus}};
}

ordered_json rate_matrix_to_json(const RateMatrix& q) {
    ordered_json rows = ordered_json::array();
    for (int i = 0; i < q.m; ++i) {
        ordered_json row = ordered_json::array();
        for (int j = 0; j < q.m; ++j) row.push_back(q.at(i, j));
        rows.push_back(row);
    }
    return rows;
}

ordered_json surface_summary_json(const ValueSurface& sf, const BoundaryCurves* curves) {
    ordered_json j;
    j["schema_version"] = 1;
    j["problem"] = problem_to_json(sf.problem);
    j["grid"] = {{"nx", sf.nx}, {"nt", sf.nt}};
    ordered_json prices = ordered_json::array();
    for (int y = 0; y < sf.m; ++y)
        prices.push_back(sf.value_at(sf.problem.x0, y, sf.nt - 1));
    j["price_at_x0_per_regime"] = prices;
    j["price_at_start"] = sf.price_at_start();
    if (curves) {
        ordered_json b;
        b["t"] = curves->t_nodes;
        ordered_json per_regime = ordered_json::array();
        for (const auto& sy : curves->s) {
            ordered_json arr = ordered_json::array();
            for (double v : sy) {
                if (std::isnan(v))
                    arr.push_back(nullptr);
                else
                    arr.push_back(v);
            }
            per_regime.push_back(arr);
        }
        b["s_star"] = per_regime;
        j["boundary"] = b;
    }
    return j;
}

ordered_json saddle_to_json(const SaddleReport& rep) {
    auto challenger_json = [](const Challenger& c) {
        return ordered_json{{"description", c.description},
                            {"value", c.value},
                            {"std_error", c.std_error},
                            {"margin", c.margin},
                            {"pass", c.pass}};
    };
    ordered_json j;
    j["schema_version"] = 1;
    j["center"] = {{"description", rep.center_desc},
                   {"value", rep.center.estimate},
                   {"std_error", rep.center.std_error}};
    j["pde_value"] = rep.pde_value;
    j["grid_bias_allowance"] = rep.grid_bias;
    ordered_json left = ordered_json::array();
    for (const auto& c : rep.left) left.push_back(challenger_json(c));
    ordered_json right = ordered_json::array();
    for (const auto& c : rep.right) right.push_back(challenger_json(c));
    j["left_challengers"] = left;
    j["right_challengers"] = right;
    j["left_ok"] = rep.left_ok;
    j["right_ok"] = rep.right_ok;
    j["center_consistent"] = rep.center_consistent;
    j["pass"] = rep.pass;
    return j;
}

}  // namespace rsq
