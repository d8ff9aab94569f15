#include "doctest.h"

#include <cmath>
#include <random>

#include "flc/bench.hpp"
#include "flc/kalman.hpp"
#include "flc/ode.hpp"
#include "support/linalg.hpp"

using namespace flc;

namespace {

// Independent covariance recursion using the elimination-based inverse.
testlin::Mat kalman_oracle_step(const KalmanModel& m, const testlin::Mat& p) {
    const int n = m.n;
    const int obs = m.m;
    testlin::Mat ft = testlin::transpose(n, n, m.F);
    testlin::Mat pred = testlin::matmul(n, n, n, m.F, testlin::matmul(n, n, n, p, ft));
    for (int i = 0; i < n * n; ++i)
        pred[i] += m.Q[i];
    testlin::Mat pred_inv;
    REQUIRE(testlin::gauss_inverse(n, pred, pred_inv));
    testlin::Mat r_inv;
    REQUIRE(testlin::gauss_inverse(obs, m.R, r_inv));
    testlin::Mat ht = testlin::transpose(obs, n, m.H);
    testlin::Mat info = testlin::matmul(n, obs, n, testlin::matmul(n, obs, obs, ht, r_inv), m.H);
    for (int i = 0; i < n * n; ++i)
        pred_inv[i] += info[i];
    testlin::Mat next;
    REQUIRE(testlin::gauss_inverse(n, pred_inv, next));
    return next;
}

KalmanModel random_model(int n, int obs, std::mt19937_64& rng) {
    KalmanModel m;
    m.n = n;
    m.m = obs;
    std::uniform_real_distribution<double> small(-0.2, 0.2);
    m.F = testlin::identity(n);
    for (double& x : m.F)
        x += small(rng) * 0.5;
    m.Q = testlin::random_spd(n, rng, 0.05, 0.2);
    m.H.resize(obs * n);
    std::uniform_real_distribution<double> hdist(-1.0, 1.0);
    for (double& x : m.H)
        x = hdist(rng);
    m.R = testlin::random_spd(obs, rng, 0.5, 2.0);
    return m;
}

} // namespace

TEST_CASE("scalar Kalman step reproduces the hand values exactly") {
    KalmanModel m;
    m.n = 1;
    m.m = 1;
    m.F = {1.0};
    m.Q = {0.1};
    m.H = {1.0};
    m.R = {1.0};
    KalmanStep step = build_kalman_step(m);
    Value p = Value::matrix(1, 1, {0.9});
    Value pred = step.run_predict(p);
    CHECK(pred.elems[0] == 1.0);
    Value next = step.run_update(pred);
    CHECK(next.elems[0] == 0.5);
}

TEST_CASE("identity dynamics with zero noise leave the covariance unchanged") {
    KalmanModel m;
    m.n = 2;
    m.m = 1;
    m.F = {1, 0, 0, 1};
    m.Q = {0, 0, 0, 0};
    m.H = {1, 0};
    m.R = {1.0};
    KalmanStep step = build_kalman_step(m);
    Value p = Value::matrix(2, 2, {0.4, 0.1, 0.1, 0.3});
    Value pred = step.run_predict(p);
    CHECK(pred.elems == p.elems);
}

TEST_CASE("compiled filter tracks the independent oracle over 100 steps") {
    std::mt19937_64 rng(4242);
    for (int n = 2; n <= 4; ++n) {
        KalmanModel m = random_model(n, std::min(n, 2), rng);
        KalmanStep step = build_kalman_step(m);
        testlin::Mat p_oracle = testlin::random_spd(n, rng, 0.5, 2.0);
        Value p_tape = Value::matrix(n, n, p_oracle);
        for (int k = 0; k < 100; ++k) {
            p_oracle = kalman_oracle_step(m, p_oracle);
            p_tape = step.run_update(step.run_predict(p_tape));
        }
        CHECK(testlin::max_abs_diff(p_oracle, p_tape.elems) <= 1e-10);
        // symmetry and positive definiteness of the compiled result
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                CHECK(std::fabs(p_tape.at(i, j) - p_tape.at(j, i)) <= 1e-10);
        for (int k = 1; k <= n; ++k)
            CHECK(testlin::leading_minor(n, p_tape.elems, k) > 0.0);
    }
}

TEST_CASE("model validation rejects inconsistent shapes") {
    KalmanModel bad;
    bad.n = 2;
    bad.m = 1;
    bad.F = {1, 0, 0, 1};
    bad.Q = {0.1, 0.0, 0.0};
    bad.H = {1, 0};
    bad.R = {1};
    CHECK_THROWS_AS(build_kalman_step(bad), CompileError);
    bad.Q = {0.1, 0.2, 0.3, 0.4}; // asymmetric
    CHECK_THROWS_WITH_AS(build_kalman_step(bad), doctest::Contains("symmetric"), CompileError);
}

TEST_CASE("RK4 on x' = x reaches e to 1e-8") {
    Project rhs = parse_project("input x: real\noutput dx = x\n");
    OdeSystem sys = make_ode_system(rhs, 0.01, 100);
    double x0[] = {1.0};
    Trajectory traj = integrate_rk4(sys, x0);
    CHECK(traj.states() == 101);
    CHECK(std::fabs(traj.back()[0] - std::exp(1.0)) <= 1e-8);
}

TEST_CASE("RK4 order: halving the step shrinks the error about 16x") {
    Project rhs = parse_project("input x: real\noutput dx = x\n");
    const double e = std::exp(1.0);
    double errs[3];
    const double hs[3] = {0.02, 0.01, 0.005};
    for (int i = 0; i < 3; ++i) {
        OdeSystem sys = make_ode_system(rhs, hs[i], static_cast<int>(1.0 / hs[i] + 0.5));
        double x0[] = {1.0};
        errs[i] = std::fabs(integrate_rk4(sys, x0).back()[0] - e);
    }
    for (int i = 0; i + 1 < 3; ++i) {
        const double ratio = errs[i] / errs[i + 1];
        CHECK(ratio >= 12.0);
        CHECK(ratio <= 20.0);
    }
}

TEST_CASE("zero field keeps the trajectory constant") {
    Project rhs = parse_project("input x: real\noutput dx = 0 * x\n");
    OdeSystem sys = make_ode_system(rhs, 0.1, 25);
    double x0[] = {7.5};
    Trajectory traj = integrate_rk4(sys, x0);
    for (int k = 0; k <= 25; ++k)
        CHECK(traj.state(k)[0] == 7.5);
}

TEST_CASE("time-dependent right-hand side advances t through the stages") {
    // x' = cos(t) from x(0) = 0 gives x(1) = sin(1)
    Project rhs = parse_project("input t: real\ninput x: real\noutput dx = cos(t)\n");
    OdeSystem sys = make_ode_system(rhs, 0.001, 1000);
    double x0[] = {0.0};
    Trajectory traj = integrate_rk4(sys, x0);
    CHECK(std::fabs(traj.back()[0] - std::sin(1.0)) <= 1e-10);
}

TEST_CASE("inputs without matching outputs are rejected") {
    Project rhs =
        parse_project("input t: real\ninput x: real\ninput c: real\noutput dx = c * x\n");
    CHECK_THROWS_WITH_AS(make_ode_system(rhs, 0.01, 10), doctest::Contains("state input"),
                         CompileError);
}

TEST_CASE("second-order motion rewritten to first order: harmonic oscillator") {
    // x'' = -x as [x, v]' = [v, -x]; energy stays on the unit circle.
    Project rhs = parse_project("input x: real\ninput v: real\n"
                                "output dx = v\noutput dv = -x\n");
    OdeSystem sys = make_ode_system(rhs, 0.001, 6283);
    double x0[] = {1.0, 0.0};
    Trajectory traj = integrate_rk4(sys, x0);
    const double x = traj.back()[0];
    const double v = traj.back()[1];
    CHECK(std::fabs(x * x + v * v - 1.0) < 1e-8);
}

TEST_CASE("delta-bearing right-hand side is rejected with the discontinuity message") {
    Project rhs = parse_project("input t: real\ninput x: real\n"
                                "output dx = cos(t) * delta(t - 1)\n");
    CHECK_THROWS_WITH_AS(make_ode_system(rhs, 0.01, 100), doctest::Contains("not continuous"),
                         ExecError);
}

TEST_CASE("non-finite states abort integration") {
    Project rhs = parse_project("input x: real\noutput dx = x * x * 1e100\n");
    OdeSystem sys = make_ode_system(rhs, 0.5, 50);
    double x0[] = {1.0};
    CHECK_THROWS_WITH_AS(integrate_rk4(sys, x0), doctest::Contains("non-finite"), ExecError);
}

TEST_CASE("bench produces a well-formed report even on a trivial project") {
    Compiled c = compile_text("input t: real\noutput y = t\n");
    BenchReport r = bench_compare(c, "trivial", 10000, 42);
    CHECK(r.iterations == 10000);
    CHECK(r.tape_ns_per_iter > 0.0);
    CHECK(r.ast_ns_per_iter > 0.0);
    CHECK(r.instruction_count == 0); // pure aliasing tape
    std::string json = r.to_json();
    for (const char* key : {"\"project\"", "\"iterations\"", "\"tape_ns_per_iter\"",
                            "\"ast_ns_per_iter\"", "\"speedup\"", "\"instruction_count\"",
                            "\"allocations_per_iter\""})
        CHECK(json.find(key) != std::string::npos);
}

TEST_CASE("bench rejects too few iterations") {
    Compiled c = compile_text("input t: real\noutput y = t\n");
    CHECK_THROWS_AS(bench_compare(c, "trivial", 100), std::invalid_argument);
}

TEST_CASE("threaded bench agrees across threads") {
    Compiled c = compile_text("input a: matrix[2,2]\noutput y = a * a\n");
    auto reports = bench_threads(c, "mm2", 20000, 3);
    CHECK(reports.size() == 3);
    for (const auto& r : reports)
        CHECK(r.instruction_count == reports[0].instruction_count);
}
