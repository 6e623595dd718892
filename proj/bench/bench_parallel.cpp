// Compares the OpenMP path kernel and matrix sweep against their serial
// references. Run manually: ./rsq_bench [n_paths] [n_steps_denominator]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rsq/extremal.hpp"
#include "rsq/mc.hpp"
#include "rsq/oracle.hpp"
#include "rsq/pde.hpp"

using namespace rsq;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

ProblemSpec two_regime_put() {
    ProblemSpec p;
    p.dynamics = DynamicsType::GBM;
    p.mu = 0.05;
    p.sigma = {0.2, 0.4};
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

int main(int argc, char** argv) {
    long n_paths = argc > 1 ? std::atol(argv[1]) : 100000;
    int denom = argc > 2 ? std::atoi(argv[2]) : 250;

    const ProblemSpec prob = two_regime_put();
    const RateBoxes boxes = two_regime_boxes();
    const RateStrategy strat = RateStrategy::extremal(boxes, Monotonicity::Increasing);
    const double dt = prob.horizon_T / denom;

#ifdef _OPENMP
    std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
    std::printf("openmp: not enabled\n");
#endif

    auto t0 = Clock::now();
    PathBatch serial = simulate_serial(prob, strat, n_paths, dt, 42);
    const double t_serial = seconds_since(t0);

    t0 = Clock::now();
    PathBatch parallel = simulate(prob, strat, n_paths, dt, 42);
    const double t_parallel = seconds_since(t0);

    const bool identical =
        serial.x.size() == parallel.x.size() &&
        std::memcmp(serial.x.data(), parallel.x.data(), serial.x.size() * sizeof(double)) == 0 &&
        std::memcmp(serial.y.data(), parallel.y.data(), serial.y.size() * sizeof(int32_t)) == 0;

    std::printf("simulate %ld paths x %d steps: serial %.3fs, parallel %.3fs, speedup %.2fx, "
                "bit-identical: %s\n",
                n_paths, serial.n_steps, t_serial, t_parallel, t_serial / t_parallel,
                identical ? "yes" : "NO");

    // matrix sweep: independent PDE solves
    const Grid grid = build_grid(prob, 150, 150, 5.0);
    auto matrices = sample_admissible_matrices(boxes, 8, 7);

    t0 = Clock::now();
    double acc = 0.0;
    for (const auto& q : matrices) acc += solve_constant(prob, q, grid).price_at_start();
    const double t_sweep_serial = seconds_since(t0);

    t0 = Clock::now();
    double acc_par = 0.0;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) reduction(+ : acc_par)
#endif
    for (int i = 0; i < static_cast<int>(matrices.size()); ++i)
        acc_par += solve_constant(prob, matrices[static_cast<size_t>(i)], grid).price_at_start();
    const double t_sweep_parallel = seconds_since(t0);

    std::printf("matrix sweep (%zu solves): serial %.3fs, parallel %.3fs, speedup %.2fx, "
                "sums agree: %s\n",
                matrices.size(), t_sweep_serial, t_sweep_parallel,
                t_sweep_serial / t_sweep_parallel,
                std::abs(acc - acc_par) < 1e-9 ? "yes" : "NO");
    return identical ? 0 : 1;
}
