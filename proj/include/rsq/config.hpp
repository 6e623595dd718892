#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "rsq/game.hpp"
#include "rsq/mc.hpp"
#include "rsq/model.hpp"
#include "rsq/pde.hpp"

namespace rsq {

using ordered_json = nlohmann::ordered_json;

struct GridParams {
    int nx = 400;
    int nt = 400;
    double width_mult = 5.0;
};

struct McParams {
    long n_paths = 100000;
    double dt = 0.002;
    std::uint64_t seed = 12345;
};

struct CheckParams {
    int dominance_matrices = 20;
    bool dominance_endpoints = true;
    int brute_force_samples = 2;
    std::vector<double> moment_orders = {2.0, 4.0};
    double moment_k_growth = -1.0;  // < 0: derive the smallest admissible constant
};

/// One config file drives every subcommand. `boxes` and `rate_matrix` are
/// optional; subcommands that need them fail with the field path.
struct Config {
    ProblemSpec problem;
    bool has_boxes = false;
    RateBoxes boxes;
    GridParams grid;
    McParams mc;
    CheckParams checks;
    bool has_rate_matrix = false;
    RateMatrix rate_matrix;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Config parse_config(const ordered_json& j);
Config load_config(const std::string& path);

/// 12 significant digits, fixed across platforms for byte-stable CSV.
std::string format_sig(double v);

void write_surface_csv(std::ostream& os, const ValueSurface& surface);
void write_boundary_csv(std::ostream& os, const BoundaryCurves& curves);
void write_batch_summary_csv(std::ostream& os, const PathBatch& batch);
void write_paths_csv(std::ostream& os, const PathBatch& batch);

ordered_json problem_to_json(const ProblemSpec& problem);
ordered_json boxes_to_json(const RateBoxes& boxes);
ordered_json rate_matrix_to_json(const RateMatrix& q);
ordered_json surface_summary_json(const ValueSurface& surface, const BoundaryCurves* curves);
ordered_json saddle_to_json(const SaddleReport& report);

}  // namespace rsq
