// Command-line driver: pricing, worst-case verification, boundary export,
// dominance/brute-force certification, saddle-point check, moment bound.
// Exit codes: 0 all enabled checks pass, 1 a check failed (named on stdout),
// 2 configuration error.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rsq/config.hpp"
#include "rsq/extremal.hpp"
#include "rsq/game.hpp"
#include "rsq/mc.hpp"
#include "rsq/oracle.hpp"
#include "rsq/pde.hpp"

namespace fs = std::filesystem;
using namespace rsq;

namespace {

struct CliOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::string format = "both";  // csv | json | both
    std::optional<std::uint64_t> seed_override;
    int threads = 0;
    bool dump_paths = false;
};

bool want_csv(const CliOptions& o) { return o.format == "csv" || o.format == "both"; }
bool want_json(const CliOptions& o) { return o.format == "json" || o.format == "both"; }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_json_file(const fs::path& path, const ordered_json& j) {
    write_text(path, j.dump(2) + "\n");
}

int fail_check(const std::string& name, const std::string& detail) {
    std::cout << "CHECK FAILED [" << name << "]: " << detail << "\n";
    return 1;
}

/// Matrix for `price`/`boundary`: explicit rate_matrix wins, single-regime
/// problems get the trivial generator, otherwise the extremal matrix.
RateMatrix select_matrix(const Config& cfg) {
    if (cfg.has_rate_matrix) return cfg.rate_matrix;
    if (cfg.problem.regimes() == 1) return RateMatrix(1);
    if (!cfg.has_boxes)
        throw ConfigError("rate_matrix: required for multi-regime configs without boxes");
    return extremal_matrix(cfg.boxes, sigma_monotonicity(cfg.problem.sigma));
}

ordered_json check_json(const SurfaceCheck& chk) {
    return ordered_json{{"obstacle_ok", chk.obstacle_ok},
                        {"initial_ok", chk.initial_ok},
                        {"time_monotone_ok", chk.time_monotone_ok},
                        {"regime_monotone_ok", chk.regime_monotone_ok},
                        {"regime_checked", chk.regime_checked},
                        {"worst_obstacle", chk.worst_obstacle},
                        {"worst_time_decrease", chk.worst_time},
                        {"worst_regime_gap", chk.worst_regime}};
}

/// Raw trajectories plus their summary statistics, gated behind --dump-paths.
/// Builds the batch under the extremal (or explicit) matrix with the config's
/// Monte Carlo parameters.
void dump_paths(const Config& cfg, const CliOptions& opt) {
    const RateMatrix q = select_matrix(cfg);
    PathBatch batch = simulate(cfg.problem, RateStrategy::constant(q, "dump"), cfg.mc.n_paths,
                               cfg.mc.dt, cfg.mc.seed);
    {
        std::ofstream os(fs::path(opt.out_dir) / "paths_summary.csv", std::ios::binary);
        write_batch_summary_csv(os, batch);
    }
    {
        std::ofstream os(fs::path(opt.out_dir) / "paths.csv", std::ios::binary);
        write_paths_csv(os, batch);
    }
    std::cout << "dumped " << batch.n_paths << " paths (" << batch.n_steps
              << " steps, floor fraction " << format_sig(batch.floor_fraction()) << ")\n";
}

int check_surface(const ValueSurface& sf, const char* label) {
    SurfaceCheck chk = check_surface_invariants(sf);
    if (!chk.obstacle_ok)
        return fail_check("obstacle", std::string(label) + ": worst payoff shortfall " +
                                          format_sig(chk.worst_obstacle));
    if (!chk.initial_ok) return fail_check("initial-condition", label);
    if (!chk.time_monotone_ok)
        return fail_check("time-monotonicity", std::string(label) + ": worst decrease " +
                                                   format_sig(chk.worst_time));
    if (!chk.regime_monotone_ok)
        return fail_check("regime-monotonicity", std::string(label) + ": worst gap " +
                                                     format_sig(chk.worst_regime));
    return 0;
}

int cmd_price(const Config& cfg, const CliOptions& opt) {
    const RateMatrix q = select_matrix(cfg);
    const Grid grid = build_grid(cfg.problem, cfg.grid.nx, cfg.grid.nt, cfg.grid.width_mult);
    const ValueSurface sf = solve_constant(cfg.problem, q, grid);

    std::optional<BoundaryCurves> curves;
    if (cfg.problem.payoff.is_put()) curves = extract_boundary(sf);

    if (want_csv(opt)) {
        std::ofstream os(fs::path(opt.out_dir) / "price_surface.csv", std::ios::binary);
        write_surface_csv(os, sf);
    }
    if (want_json(opt)) {
        ordered_json j = surface_summary_json(sf, curves ? &*curves : nullptr);
        j["rate_matrix"] = rate_matrix_to_json(q);
        j["checks"] = check_json(check_surface_invariants(sf));
        write_json_file(fs::path(opt.out_dir) / "price_summary.json", j);
    }
    std::cout << "price(x0=" << format_sig(cfg.problem.x0) << ", y0=" << cfg.problem.y0
              << ", T=" << format_sig(cfg.problem.horizon_T)
              << ") = " << format_sig(sf.price_at_start()) << "\n";
    return check_surface(sf, "price surface");
}

int cmd_worstcase(const Config& cfg, const CliOptions& opt) {
    if (!cfg.has_boxes) throw ConfigError("boxes: required for worstcase");
    const Monotonicity mono = sigma_monotonicity(cfg.problem.sigma);
    const RateMatrix pi_l = extremal_matrix(cfg.boxes, mono);
    const Grid grid = build_grid(cfg.problem, cfg.grid.nx, cfg.grid.nt, cfg.grid.width_mult);

    const ValueSurface sf_const = solve_constant(cfg.problem, pi_l, grid);
    auto [sf_hjb, field] = solve_worstcase_hjb(cfg.problem, cfg.boxes, grid);

    const double sup_diff = surface_sup_diff(sf_hjb, sf_const);
    RateMatrix implied;
    const bool field_constant = field.constant_entries(&implied);
    bool field_matches = field_constant;
    if (field_constant)
        for (int i = 0; i < pi_l.m && field_matches; ++i)
            for (int j = 0; j < pi_l.m; ++j)
                if (implied.at(i, j) != pi_l.at(i, j)) {
                    field_matches = false;
                    break;
                }

    if (want_csv(opt)) {
        std::ofstream os(fs::path(opt.out_dir) / "worstcase_surface.csv", std::ios::binary);
        write_surface_csv(os, sf_const);
    }
    if (want_json(opt)) {
        ordered_json j;
        j["schema_version"] = 1;
        j["monotonicity"] = to_string(mono);
        j["extremal_matrix"] = rate_matrix_to_json(pi_l);
        j["boxes"] = boxes_to_json(cfg.boxes);
        j["price_constant"] = sf_const.price_at_start();
        j["price_hjb"] = sf_hjb.price_at_start();
        j["sup_diff"] = sup_diff;
        j["sup_diff_tolerance"] = 10.0 * kSolverTol;
        j["rate_field_constant"] = field_constant;
        j["rate_field_matches_extremal"] = field_matches;
        j["checks"] = check_json(check_surface_invariants(sf_const));
        write_json_file(fs::path(opt.out_dir) / "worstcase.json", j);
    }
    std::cout << "worst-case price = " << format_sig(sf_const.price_at_start())
              << " (hjb cross-check diff " << format_sig(sup_diff) << ")\n";

    if (int rc = check_surface(sf_const, "constant-matrix surface")) return rc;
    if (int rc = check_surface(sf_hjb, "hjb surface")) return rc;
    if (sup_diff > 10.0 * kSolverTol)
        return fail_check("hjb-constant-equality", "sup diff " + format_sig(sup_diff));
    if (!field_matches)
        return fail_check("rate-field-constancy", "bang-bang field not the extremal matrix");
    return 0;
}

int cmd_boundary(const Config& cfg, const CliOptions& opt) {
    if (!cfg.problem.payoff.is_put())
        throw ConfigError("payoff.type: boundary extraction needs the put payoff");
    const RateMatrix q = select_matrix(cfg);
    const Grid grid = build_grid(cfg.problem, cfg.grid.nx, cfg.grid.nt, cfg.grid.width_mult);
    const ValueSurface sf = solve_constant(cfg.problem, q, grid);
    const BoundaryCurves curves = extract_boundary(sf);

    if (want_csv(opt)) {
        std::ofstream os(fs::path(opt.out_dir) / "boundary.csv", std::ios::binary);
        write_boundary_csv(os, curves);
    }
    if (want_json(opt)) {
        ordered_json j = surface_summary_json(sf, &curves);
        j["rate_matrix"] = rate_matrix_to_json(q);
        write_json_file(fs::path(opt.out_dir) / "boundary.json", j);
    }

    const Monotonicity mono = sigma_monotonicity(cfg.problem.sigma);
    if (cfg.problem.regimes() >= 2 &&
        (mono == Monotonicity::Increasing || mono == Monotonicity::Decreasing)) {
        const double dt = grid.t_nodes[1];
        for (size_t k = 0; k < curves.t_nodes.size(); ++k) {
            if (curves.t_nodes[k] < 2.0 * dt - 1e-15) continue;
            for (size_t y = 0; y + 1 < curves.s.size(); ++y) {
                const double lo_vol = curves.s[y][k];
                const double hi_vol = curves.s[y + 1][k];
                if (std::isnan(lo_vol) || std::isnan(hi_vol)) continue;
                const bool ok =
                    mono == Monotonicity::Increasing ? lo_vol > hi_vol : lo_vol < hi_vol;
                if (!ok)
                    return fail_check("boundary-ordering",
                                      "regimes " + std::to_string(y + 1) + "/" +
                                          std::to_string(y + 2) + " at t=" +
                                          format_sig(curves.t_nodes[k]));
            }
        }
        std::cout << "boundary ordering check: ok\n";
    }
    return 0;
}

int cmd_verify_extremal(const Config& cfg, const CliOptions& opt) {
    if (!cfg.has_boxes) throw ConfigError("boxes: required for verify-extremal");
    const Monotonicity mono = sigma_monotonicity(cfg.problem.sigma);
    const RateMatrix pi_l = extremal_matrix(cfg.boxes, mono);
    const Grid grid = build_grid(cfg.problem, cfg.grid.nx, cfg.grid.nt, cfg.grid.width_mult);
    const ValueSurface sf_l = solve_constant(cfg.problem, pi_l, grid);

    std::vector<RateMatrix> challengers =
        sample_admissible_matrices(cfg.boxes, cfg.checks.dominance_matrices, cfg.mc.seed);
    if (cfg.checks.dominance_endpoints)
        for (auto& q : endpoint_matrices(cfg.boxes)) challengers.push_back(std::move(q));

    double worst_margin = 0.0;  // most negative of min over nodes of (v_q - v_l)
    int worst_index = -1;
    std::vector<double> margins(challengers.size(), 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int c = 0; c < static_cast<int>(challengers.size()); ++c) {
        const ValueSurface sf_q =
            solve_constant(cfg.problem, challengers[static_cast<size_t>(c)], grid);
        double min_gap = 0.0;
        for (size_t nidx = 0; nidx < sf_q.v.size(); ++nidx)
            min_gap = std::min(min_gap, sf_q.v[nidx] - sf_l.v[nidx]);
        margins[static_cast<size_t>(c)] = min_gap;
    }
    for (size_t c = 0; c < margins.size(); ++c)
        if (margins[c] < worst_margin) {
            worst_margin = margins[c];
            worst_index = static_cast<int>(c);
        }
    const bool dominance_ok = worst_margin >= -1e-6;

    BruteForceResult bf =
        brute_force_min(cfg.problem, cfg.boxes, grid, cfg.checks.brute_force_samples);
    bool argmin_matches = true;
    for (int i = 0; i < pi_l.m && argmin_matches; ++i)
        for (int j = 0; j < pi_l.m; ++j)
            if (bf.argmin.at(i, j) != pi_l.at(i, j)) {
                argmin_matches = false;
                break;
            }

    if (want_json(opt)) {
        ordered_json j;
        j["schema_version"] = 1;
        j["extremal_matrix"] = rate_matrix_to_json(pi_l);
        j["extremal_price"] = sf_l.price_at_start();
        j["challengers"] = static_cast<int>(challengers.size());
        j["worst_dominance_margin"] = worst_margin;
        j["worst_challenger_index"] = worst_index;
        j["dominance_ok"] = dominance_ok;
        j["brute_force"] = {{"evaluated", bf.evaluated},
                            {"min_price", bf.min_price},
                            {"argmin", rate_matrix_to_json(bf.argmin)},
                            {"argmin_matches_extremal", argmin_matches}};
        write_json_file(fs::path(opt.out_dir) / "verify_extremal.json", j);
    }
    std::cout << "dominance margin over " << challengers.size()
              << " matrices: " << format_sig(worst_margin)
              << "; brute-force argmin matches: " << (argmin_matches ? "yes" : "no") << "\n";

    if (!dominance_ok)
        return fail_check("extremal-dominance", "worst margin " + format_sig(worst_margin));
    if (!argmin_matches) return fail_check("brute-force-argmin", "argmin differs from extremal");
    return 0;
}

int cmd_game(const Config& cfg, const CliOptions& opt) {
    if (!cfg.has_boxes) throw ConfigError("boxes: required for game");
    if (opt.dump_paths) dump_paths(cfg, opt);
    const Grid grid = build_grid(cfg.problem, cfg.grid.nx, cfg.grid.nt, cfg.grid.width_mult);
    SaddleReport rep = saddle_check(cfg.problem, cfg.boxes, {}, {}, cfg.mc.n_paths, cfg.mc.dt,
                                    cfg.mc.seed, grid);
    std::cout << rep.to_table();
    if (want_json(opt)) write_json_file(fs::path(opt.out_dir) / "saddle.json", saddle_to_json(rep));

    if (!rep.left_ok) return fail_check("saddle-left", "a stopping-rule challenger beat the center");
    if (!rep.right_ok)
        return fail_check("saddle-right", "a strategy challenger undercut the center");
    if (!rep.center_consistent)
        return fail_check("saddle-consistency", "center disagrees with the PDE value");
    return 0;
}

int cmd_moments(const Config& cfg, const CliOptions& opt) {
    if (opt.dump_paths) dump_paths(cfg, opt);
    double k_growth = cfg.checks.moment_k_growth;
    if (k_growth <= 0.0) {
        if (cfg.problem.dynamics == DynamicsType::GBM)
            k_growth = std::max(cfg.problem.sigma_max(), cfg.problem.mu);
        else if (cfg.problem.dynamics == DynamicsType::Driftless)
            k_growth = cfg.problem.sigma_max() * cfg.problem.a.max_value();
        else
            throw ConfigError("model.type: moment bound does not support cev");
    }
    const RateMatrix* chain = nullptr;
    RateMatrix pi_l;
    if (cfg.problem.regimes() > 1) {
        if (cfg.has_rate_matrix) {
            chain = &cfg.rate_matrix;
        } else if (cfg.has_boxes) {
            pi_l = extremal_matrix(cfg.boxes, sigma_monotonicity(cfg.problem.sigma));
            chain = &pi_l;
        } else {
            throw ConfigError("rate_matrix: required for multi-regime moment checks");
        }
    }

    bool all_pass = true;
    ordered_json rows = ordered_json::array();
    try {
        for (double q : cfg.checks.moment_orders) {
            MomentReport rep = moment_bound_check(cfg.problem, k_growth, q,
                                                  cfg.problem.horizon_T, cfg.mc.n_paths,
                                                  cfg.mc.dt, cfg.mc.seed, chain);
            std::cout << "moment q=" << format_sig(q) << ": empirical "
                      << format_sig(rep.empirical) << " <= bound " << format_sig(rep.bound)
                      << " : " << (rep.pass ? "ok" : "VIOLATED") << "\n";
            rows.push_back(ordered_json{{"q", rep.q},
                                        {"k_growth", rep.k_growth},
                                        {"empirical", rep.empirical},
                                        {"bound", rep.bound},
                                        {"pass", rep.pass}});
            all_pass = all_pass && rep.pass;
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (want_json(opt)) {
        ordered_json j;
        j["schema_version"] = 1;
        j["k_growth"] = k_growth;
        j["results"] = rows;
        j["pass"] = all_pass;
        write_json_file(fs::path(opt.out_dir) / "moments.json", j);
    }
    return all_pass ? 0 : fail_check("moment-bound", "an empirical moment exceeded the bound");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Worst-case pricing engine for regime-switching American options"};
    app.require_subcommand(1);

    CliOptions opt;
    std::uint64_t seed_value = 0;
    bool seed_set = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "JSON config path")->required();
        sub->add_option("--out", opt.out_dir, "output directory (default .)");
        sub->add_option("--format", opt.format, "csv|json|both (default both)")
            ->check(CLI::IsMember({"csv", "json", "both"}));
        sub->add_option("--seed", seed_value, "override the config seed")
            ->each([&](const std::string&) { seed_set = true; });
        sub->add_option("--threads", opt.threads, "OpenMP thread count (0 = runtime default)");
        sub->add_flag("--dump-paths", opt.dump_paths,
                      "persist raw simulated paths and their summary (game, moments)");
    };

    CLI::App* c_price = app.add_subcommand("price", "solve at a fixed rate matrix");
    CLI::App* c_worst = app.add_subcommand("worstcase", "extremal matrix + HJB cross-check");
    CLI::App* c_bound = app.add_subcommand("boundary", "exercise boundary export + ordering");
    CLI::App* c_verify =
        app.add_subcommand("verify-extremal", "dominance sweep + brute-force argmin");
    CLI::App* c_game = app.add_subcommand("game", "saddle-point verification");
    CLI::App* c_mom = app.add_subcommand("moments", "moment-bound check");
    for (CLI::App* sub : {c_price, c_worst, c_bound, c_verify, c_game, c_mom}) add_common(sub);

    CLI11_PARSE(app, argc, argv);

    try {
        Config cfg = load_config(opt.config_path);
        if (seed_set) cfg.mc.seed = seed_value;
        if (opt.threads > 0) {
#ifdef _OPENMP
            omp_set_num_threads(opt.threads);
#endif
        }
        fs::create_directories(opt.out_dir);

        if (app.got_subcommand(c_price)) return cmd_price(cfg, opt);
        if (app.got_subcommand(c_worst)) return cmd_worstcase(cfg, opt);
        if (app.got_subcommand(c_bound)) return cmd_boundary(cfg, opt);
        if (app.got_subcommand(c_verify)) return cmd_verify_extremal(cfg, opt);
        if (app.got_subcommand(c_game)) return cmd_game(cfg, opt);
        if (app.got_subcommand(c_mom)) return cmd_moments(cfg, opt);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
