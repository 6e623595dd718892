#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "rsq/config.hpp"
#include "rsq/oracle.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string stdout_text;
};

RunResult run_cli(const std::string& args, const std::string& capture_name) {
    const fs::path tmp = fs::path(RSQ_TEST_TMPDIR);
    fs::create_directories(tmp);
    const fs::path out = tmp / (capture_name + ".stdout");
    const std::string cmd =
        std::string(RSQ_CLI_BIN) + " " + args + " > " + out.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    RunResult res;
    res.exit_code = WEXITSTATUS(rc);
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    res.stdout_text = ss.str();
    return res;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path config_dir() { return fs::path(RSQ_CONFIG_DIR); }
fs::path tmp_dir() { return fs::path(RSQ_TEST_TMPDIR); }

void write_config_without_boxes(const fs::path& path) {
    ordered_json j;
    j["model"] = {{"type", "gbm"}, {"sigma", {0.2, 0.4}}, {"mu", 0.05}};
    j["payoff"] = {{"type", "put"}, {"strike", 100.0}};
    j["horizon"] = 1.0;
    j["alpha"] = 0.05;
    j["x0"] = 100.0;
    j["y0"] = 1;
    j["grid"] = {{"nx", 60}, {"nt", 40}, {"width_mult", 5.0}};
    std::ofstream out(path);
    out << j.dump(2);
}

}  // namespace

TEST_CASE("missing boxes for worstcase exits 2 and names the field") {
    const fs::path cfg = tmp_dir() / "no_boxes.json";
    fs::create_directories(tmp_dir());
    write_config_without_boxes(cfg);
    RunResult r = run_cli("worstcase --config " + cfg.string() + " --out " +
                              (tmp_dir() / "nb_out").string(),
                          "no_boxes");
    CHECK(r.exit_code == 2);
    CHECK(r.stdout_text.find("boxes") != std::string::npos);
}

TEST_CASE("unparseable config exits 2") {
    const fs::path cfg = tmp_dir() / "broken.json";
    fs::create_directories(tmp_dir());
    {
        std::ofstream out(cfg);
        out << "{ not json";
    }
    RunResult r = run_cli("price --config " + cfg.string(), "broken");
    CHECK(r.exit_code == 2);
}

TEST_CASE("worstcase emits the extremal matrix entries") {
    const fs::path out = tmp_dir() / "wc_out";
    RunResult r = run_cli("worstcase --config " + (config_dir() / "smoke.json").string() +
                              " --out " + out.string(),
                          "wc");
    REQUIRE(r.exit_code == 0);
    ordered_json j = ordered_json::parse(slurp(out / "worstcase.json"));
    CHECK(j["extremal_matrix"][0][1].get<double>() == 0.5);   // inf of the plus box
    CHECK(j["extremal_matrix"][1][0].get<double>() == 1.0);   // sup of the minus box
    CHECK(j["rate_field_matches_extremal"].get<bool>());
    CHECK(j["sup_diff"].get<double>() <= 1e-7);
}

TEST_CASE("price on the single-regime config tracks the binomial oracle within 0.5%") {
    const fs::path out = tmp_dir() / "price_out";
    RunResult r = run_cli("price --config " + (config_dir() / "gbm_single.json").string() +
                              " --out " + out.string(),
                          "price");
    REQUIRE(r.exit_code == 0);
    ordered_json j = ordered_json::parse(slurp(out / "price_summary.json"));
    const double pde = j["price_at_start"].get<double>();
    const double tree = rsq::binomial_american_put(100.0, 100.0, 0.05, 0.2, 1.0, 5000);
    CHECK(std::abs(pde - tree) / tree < 5e-3);

    // CSV shape: header plus nx*nt*m rows
    std::string csv = slurp(out / "price_surface.csv");
    CHECK(csv.rfind("x,regime,t,v,exercised\n", 0) == 0);
}

TEST_CASE("reruns with the same config and seed are byte-identical") {
    for (const char* sub : {"price", "worstcase", "boundary", "verify-extremal", "game",
                            "moments"}) {
        const fs::path out_a = tmp_dir() / (std::string("det_a_") + sub);
        const fs::path out_b = tmp_dir() / (std::string("det_b_") + sub);
        fs::remove_all(out_a);
        fs::remove_all(out_b);
        RunResult ra = run_cli(std::string(sub) + " --config " +
                                   (config_dir() / "smoke.json").string() + " --out " +
                                   out_a.string(),
                               std::string("det_a_") + sub);
        RunResult rb = run_cli(std::string(sub) + " --config " +
                                   (config_dir() / "smoke.json").string() + " --out " +
                                   out_b.string(),
                               std::string("det_b_") + sub);
        CHECK(ra.exit_code == rb.exit_code);
        CHECK(ra.stdout_text == rb.stdout_text);
        for (const auto& entry : fs::directory_iterator(out_a)) {
            const fs::path twin = out_b / entry.path().filename();
            REQUIRE_MESSAGE(fs::exists(twin), entry.path().string());
            CHECK_MESSAGE(slurp(entry.path()) == slurp(twin), entry.path().string());
        }
    }
}

TEST_CASE("seed override changes monte carlo outputs but not pde ones") {
    const fs::path out_a = tmp_dir() / "seed_a";
    const fs::path out_b = tmp_dir() / "seed_b";
    run_cli("moments --config " + (config_dir() / "gbm_single.json").string() + " --out " +
                out_a.string() + " --seed 1",
            "seed_a");
    run_cli("moments --config " + (config_dir() / "gbm_single.json").string() + " --out " +
                out_b.string() + " --seed 2",
            "seed_b");
    CHECK(slurp(out_a / "moments.json") != slurp(out_b / "moments.json"));
}

TEST_CASE("problem and boxes serialize to the config schema and re-parse identically") {
    rsq::Config cfg = rsq::load_config((config_dir() / "gbm_tworegime.json").string());
    ordered_json round;
    round = rsq::problem_to_json(cfg.problem);
    round["boxes"] = rsq::boxes_to_json(cfg.boxes);
    rsq::Config again = rsq::parse_config(round);
    CHECK(again.problem.sigma == cfg.problem.sigma);
    CHECK(again.problem.mu == cfg.problem.mu);
    CHECK(again.problem.payoff.strike == cfg.problem.payoff.strike);
    CHECK(again.problem.horizon_T == cfg.problem.horizon_T);
    CHECK(again.problem.alpha == cfg.problem.alpha);
    CHECK(again.problem.x0 == cfg.problem.x0);
    CHECK(again.problem.y0 == cfg.problem.y0);
    REQUIRE(again.has_boxes);
    CHECK(again.boxes.plus[0].lo == cfg.boxes.plus[0].lo);
    CHECK(again.boxes.minus[0].hi == cfg.boxes.minus[0].hi);
}

TEST_CASE("dump-paths flag persists trajectories and their summary") {
    const fs::path out = tmp_dir() / "dump_out";
    fs::remove_all(out);
    RunResult r = run_cli("moments --config " + (config_dir() / "smoke.json").string() +
                              " --out " + out.string() + " --dump-paths",
                          "dump");
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(out / "paths.csv"));
    std::string summary = slurp(out / "paths_summary.csv");
    CHECK(summary.rfind("n_paths,n_steps,dt,", 0) == 0);
    std::string paths = slurp(out / "paths.csv");
    CHECK(paths.rfind("path,step,t,x,y\n", 0) == 0);

    // default runs do not persist raw paths
    const fs::path out2 = tmp_dir() / "nodump_out";
    fs::remove_all(out2);
    run_cli("moments --config " + (config_dir() / "smoke.json").string() + " --out " +
                out2.string(),
            "nodump");
    CHECK_FALSE(fs::exists(out2 / "paths.csv"));
}

TEST_CASE("format selects the artifact set") {
    const fs::path out_csv = tmp_dir() / "fmt_csv";
    const fs::path out_json = tmp_dir() / "fmt_json";
    fs::remove_all(out_csv);
    fs::remove_all(out_json);
    run_cli("price --config " + (config_dir() / "smoke.json").string() + " --out " +
                out_csv.string() + " --format csv",
            "fmt_csv");
    CHECK(fs::exists(out_csv / "price_surface.csv"));
    CHECK_FALSE(fs::exists(out_csv / "price_summary.json"));
    run_cli("price --config " + (config_dir() / "smoke.json").string() + " --out " +
                out_json.string() + " --format json",
            "fmt_json");
    CHECK(fs::exists(out_json / "price_summary.json"));
    CHECK_FALSE(fs::exists(out_json / "price_surface.csv"));
}

TEST_CASE("thread count does not change the artifacts") {
    const fs::path out_1 = tmp_dir() / "thr_1";
    const fs::path out_n = tmp_dir() / "thr_n";
    fs::remove_all(out_1);
    fs::remove_all(out_n);
    run_cli("game --config " + (config_dir() / "smoke.json").string() + " --out " +
                out_1.string() + " --threads 1",
            "thr_1");
    run_cli("game --config " + (config_dir() / "smoke.json").string() + " --out " +
                out_n.string() + " --threads 2",
            "thr_n");
    CHECK(slurp(out_1 / "saddle.json") == slurp(out_n / "saddle.json"));
}

TEST_CASE("emitted reports re-parse under the same schema") {
    const fs::path out = tmp_dir() / "roundtrip";
    RunResult r = run_cli("boundary --config " + (config_dir() / "smoke.json").string() +
                              " --out " + out.string(),
                          "roundtrip");
    REQUIRE(r.exit_code == 0);
    ordered_json j = ordered_json::parse(slurp(out / "boundary.json"));
    CHECK(j["schema_version"].get<int>() == 1);
    CHECK(j.contains("boundary"));
    // and the problem block itself is a valid config fragment
    CHECK(j["problem"]["model"]["type"].get<std::string>() == "gbm");
}
