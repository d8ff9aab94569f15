#include "doctest.h"

#include <cmath>
#include <cstring>
#include <random>
#include <thread>

#include "flc/compile.hpp"
#include "support/alloc_count.hpp"
#include "support/linalg.hpp"
#include "support/random_expr.hpp"

using namespace flc;

TEST_CASE("identity tape copies a vector through") {
    Compiled c = compile_text("input v: vector[3]\noutput y = v\n");
    Bindings b{{"v", Value::vector({1, 2, 3})}};
    Value y = eval_tape(c.tape, b)[0];
    CHECK(y.elems == std::vector<double>{1, 2, 3});
}

TEST_CASE("2x2 product with the identity returns the other factor") {
    Compiled c = compile_text("input a: matrix[2,2]\ninput b: matrix[2,2]\noutput c = a * b\n");
    Bindings b{{"a", Value::matrix(2, 2, {1, 0, 0, 1})},
               {"b", Value::matrix(2, 2, {5, 6, 7, 8})}};
    Value y = eval_tape(c.tape, b)[0];
    CHECK(y.elems == std::vector<double>{5, 6, 7, 8});
}

TEST_CASE("information-form update of a diagonal model gives the identity") {
    Compiled c = compile_text("input q: matrix[2,2]\ninput h: matrix[2,2]\n"
                              "output p = (q^-1 + h)^-1\n");
    Bindings b{{"q", Value::matrix(2, 2, {2, 0, 0, 2})},
               {"h", Value::matrix(2, 2, {0.5, 0, 0, 0.5})}};
    Value p = eval_tape(c.tape, b)[0];
    CHECK(std::fabs(p.at(0, 0) - 1.0) < 1e-14);
    CHECK(std::fabs(p.at(1, 1) - 1.0) < 1e-14);
    CHECK(std::fabs(p.at(0, 1)) < 1e-14);
    CHECK(std::fabs(p.at(1, 0)) < 1e-14);
}

TEST_CASE("sin maps componentwise over a vector") {
    Compiled c = compile_text("input v: vector[2]\noutput y = sin(v)\n");
    Bindings b{{"v", Value::vector({0.0, 3.14159265358979323846 / 2}) }};
    Value y = eval_tape(c.tape, b)[0];
    CHECK(y.elems[0] == 0.0);
    CHECK(std::fabs(y.elems[1] - 1.0) < 1e-15);
}

TEST_CASE("quadratic form evaluates to a 1x1 matrix") {
    Compiled c = compile_text("input f: vector[2]\ninput a: matrix[2,2]\n"
                              "output q = f^T * a * f\n");
    Bindings b{{"f", Value::vector({1, 1})}, {"a", Value::matrix(2, 2, {1, 0, 0, 1})}};
    Value q = eval_ast(c.outputs[0].expr, b);
    CHECK(q.tag == Value::Tag::Matrix);
    CHECK(q.rows == 1);
    CHECK(q.cols == 1);
    CHECK(q.elems[0] == 2.0);
    Value qt = eval_tape(c.tape, b)[0];
    CHECK(qt.elems[0] == 2.0);
}

TEST_CASE("delta evaluates to zero pointwise") {
    Project p = parse_project("input t: real\noutput y = delta(t - 1) + 2\n");
    auto checked = check_project(p);
    Bindings b{{"t", Value::real(0.5)}};
    CHECK(eval_ast(checked[0].expr, b).r == 2.0);
}

TEST_CASE("detect_discontinuity scans structurally") {
    CHECK(detect_discontinuity(parse_formula("f(t) * delta(t)")));
    CHECK_FALSE(detect_discontinuity(parse_formula("sin(t)")));
    CHECK(detect_discontinuity(parse_formula("cond(t > 0, delta(t - 1), 0)")));
}

TEST_CASE("unbound and mis-shaped bindings are runtime errors") {
    Compiled c = compile_text("input a: vector[2]\noutput y = sum(a)\n");
    Bindings none;
    CHECK_THROWS_WITH_AS(eval_tape(c.tape, none), doctest::Contains("'a' unbound"), ExecError);
    Bindings wrong{{"a", Value::vector({1, 2, 3})}};
    CHECK_THROWS_WITH_AS(eval_tape(c.tape, wrong), doctest::Contains("expected vector[2]"),
                         ExecError);
}

TEST_CASE("singularity guard trips on a singular matrix") {
    Compiled c = compile_text("input a: matrix[2,2]\noutput inv = a^-1\n");
    Bindings singular{{"a", Value::matrix(2, 2, {1, 1, 1, 1})}};
    CHECK_THROWS_WITH_AS(eval_tape(c.tape, singular), doctest::Contains("singular"), ExecError);
    CHECK_THROWS_AS(eval_ast(c.outputs[0].expr, singular), ExecError);
    // scale-aware: a tiny but well-conditioned matrix passes
    Bindings tiny{{"a", Value::matrix(2, 2, {1e-3, 0, 0, 1e-3})}};
    CHECK_NOTHROW(eval_tape(c.tape, tiny));
}

TEST_CASE("check-finite mode reports non-finite results") {
    Compiled c = compile_text("input x: real\noutput y = log(x)\n");
    Bindings b{{"x", Value::real(-1.0)}};
    std::vector<double> scratch;
    std::vector<Value> outs;
    CHECK_NOTHROW(eval_tape(c.tape, b, scratch, outs, false));
    CHECK_THROWS_WITH_AS(eval_tape(c.tape, b, scratch, outs, true),
                         doctest::Contains("non-finite"), ExecError);
}

TEST_CASE("bool and int outputs extract with their tags") {
    Compiled c = compile_text("input x: real\ninput i: int\n"
                              "output p = x > 1\noutput k = i * i\n");
    Bindings b{{"x", Value::real(2.0)}, {"i", Value::integer(-3)}};
    auto outs = eval_tape(c.tape, b);
    CHECK(outs[0].tag == Value::Tag::Bool);
    CHECK(outs[0].b);
    CHECK(outs[1].tag == Value::Tag::Int);
    CHECK(outs[1].i == 9);
}

TEST_CASE("execution is deterministic and thread-safe on a shared tape") {
    Compiled c = compile_text("input a: matrix[3,3]\ninput t: real\n"
                              "output y = (a * a^T + t) * a\n");
    std::mt19937_64 rng(8);
    Bindings b = random_bindings(c.tape.inputs, rng);

    auto run_once = [&]() {
        std::vector<double> scratch(c.tape.slot_count);
        bind_inputs(c.tape, b, scratch);
        run_tape(c.tape, scratch);
        std::vector<double> out;
        for (int s : c.tape.outputs[0].slots)
            out.push_back(scratch[s]);
        return out;
    };
    std::vector<double> ref = run_once();
    CHECK(run_once() == ref);

    std::vector<std::vector<double>> results(4);
    std::vector<std::thread> pool;
    for (int i = 0; i < 4; ++i)
        pool.emplace_back([&, i] { results[i] = run_once(); });
    for (auto& th : pool)
        th.join();
    for (const auto& r : results)
        CHECK(std::memcmp(r.data(), ref.data(), ref.size() * sizeof(double)) == 0);
}

TEST_CASE("steady-state execution performs no allocation") {
    Compiled c = compile_text("input a: matrix[4,4]\ninput b: matrix[4,4]\noutput c = a * b\n");
    std::mt19937_64 rng(9);
    Bindings b = random_bindings(c.tape.inputs, rng);
    std::vector<double> scratch;
    std::vector<Value> outs;
    eval_tape(c.tape, b, scratch, outs); // warm: sizes buffers
    const long long before = test_alloc_count();
    for (int i = 0; i < 100000; ++i)
        eval_tape(c.tape, b, scratch, outs);
    const long long after = test_alloc_count();
    CHECK(after == before);
}

TEST_CASE("inverse of well-conditioned matrices is accurate") {
    std::mt19937_64 rng(17);
    for (int n = 1; n <= 4; ++n) {
        std::string text = "input a: matrix[" + std::to_string(n) + "," + std::to_string(n) +
                           "]\noutput inv = a^-1\n";
        Compiled c = compile_text(text);
        for (int round = 0; round < 25; ++round) {
            testlin::Mat a = testlin::random_well_conditioned(n, rng);
            Bindings b{{"a", Value::matrix(n, n, a)}};
            Value inv = eval_tape(c.tape, b)[0];
            testlin::Mat prod = testlin::matmul(n, n, n, a, inv.elems);
            CHECK(testlin::max_abs_diff(prod, testlin::identity(n)) <= 1e-9);
            // agreement with the independent elimination inverse
            testlin::Mat gauss;
            REQUIRE(testlin::gauss_inverse(n, a, gauss));
            CHECK(testlin::max_abs_diff(gauss, inv.elems) <= 1e-9);
        }
    }
}

TEST_CASE("tape matches oracle on random expressions") {
    std::mt19937_64 rng(321);
    for (int round = 0; round < 80; ++round) {
        testgen::RandomCase c = testgen::gen_case(rng, 4, 6, 4);
        Tape tape = optimize(lower_outputs(c.checked, c.project.inputs));
        for (const auto& b : c.bindings) {
            Value oracle = eval_ast(c.checked[0].expr, b);
            Value tape_v = eval_tape(tape, b)[0];
            CHECK(testgen::rel_diff(oracle, tape_v) <= 1e-12);
        }
    }
}

TEST_CASE("fused execution plan matches plain instruction execution bitwise") {
    std::mt19937_64 rng(777);
    for (int round = 0; round < 60; ++round) {
        testgen::RandomCase c = testgen::gen_case(rng, 3, 6, 4);
        Tape fused = optimize(lower_outputs(c.checked, c.project.inputs));
        Tape plain = fused;
        plain.plan.clear(); // falls back to one dispatch per instruction
        plain.plan_terms.clear();
        for (const auto& b : c.bindings) {
            auto v1 = eval_tape(fused, b);
            auto v2 = eval_tape(plain, b);
            for (size_t i = 0; i < v1.size(); ++i)
                CHECK(testgen::rel_diff(v1[i], v2[i]) == 0.0);
        }
    }
}
