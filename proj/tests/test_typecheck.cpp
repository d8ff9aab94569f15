#include "doctest.h"

#include <cmath>

#include <random>

#include "flc/exec.hpp"
#include "flc/parser.hpp"
#include "flc/typecheck.hpp"
#include "support/random_expr.hpp"

using namespace flc;

namespace {

TypedExprPtr infer_text(const char* text, const TypeEnv& env) {
    return infer(parse_formula(text), env);
}

TypeEnv env_of(std::initializer_list<std::pair<const char*, SemType>> vars) {
    TypeEnv env;
    for (const auto& [name, type] : vars) {
        env.vars.emplace(name, type);
        env.inputs.emplace(name, type);
    }
    return env;
}

} // namespace

TEST_CASE("scalar broadcast over a vector carries the annotation") {
    TypeEnv env = env_of({{"a", SemType::real()}, {"b", SemType::vector(3)}});
    TypedExprPtr t = infer_text("a + b", env);
    CHECK(t->type == SemType::vector(3));
    CHECK(t->broadcast == Broadcast::LeftScalar);
    TypedExprPtr swapped = infer_text("b + a", env);
    CHECK(swapped->type == SemType::vector(3));
    CHECK(swapped->broadcast == Broadcast::RightScalar);
}

TEST_CASE("4x4 matrix product types as matrix(4,4)") {
    TypeEnv env = env_of({{"a", SemType::matrix(4, 4)}, {"b", SemType::matrix(4, 4)}});
    CHECK(infer_text("a * b", env)->type == SemType::matrix(4, 4));
}

TEST_CASE("inner dimension mismatch reports both shapes") {
    TypeEnv env = env_of({{"a", SemType::matrix(2, 3)}, {"b", SemType::matrix(2, 3)}});
    try {
        infer_text("a * b", env);
        FAIL("expected shape mismatch");
    } catch (const CompileError& err) {
        std::string msg = err.what();
        CHECK(msg.find("matrix[2,3]") != std::string::npos);
        CHECK(msg.find("shape mismatch") != std::string::npos);
    }
}

TEST_CASE("f^T * a * f types as matrix(1,1)") {
    TypeEnv env = env_of({{"f", SemType::vector(4)}, {"a", SemType::matrix(4, 4)}});
    CHECK(infer_text("f^T * a * f", env)->type == SemType::matrix(1, 1));
}

TEST_CASE("matrix times vector is a vector for two or more rows") {
    TypeEnv env = env_of({{"m", SemType::matrix(3, 2)}, {"v", SemType::vector(2)}});
    CHECK(infer_text("m * v", env)->type == SemType::vector(3));
}

TEST_CASE("transpose shapes") {
    TypeEnv env = env_of({{"m", SemType::matrix(2, 3)}, {"v", SemType::vector(4)}});
    CHECK(infer_text("m^T", env)->type == SemType::matrix(3, 2));
    CHECK(infer_text("v^T", env)->type == SemType::matrix(1, 4));
    CHECK_THROWS_AS(infer_text("(1.0)^T", env), CompileError);
}

TEST_CASE("inverse requires a small square matrix") {
    TypeEnv env = env_of({{"s", SemType::matrix(3, 3)},
                          {"r", SemType::matrix(2, 3)},
                          {"big", SemType::matrix(5, 5)}});
    CHECK(infer_text("s^-1", env)->type == SemType::matrix(3, 3));
    CHECK_THROWS_WITH_AS(infer_text("r^-1", env), doctest::Contains("non-square"), CompileError);
    CHECK_THROWS_WITH_AS(infer_text("big^-1", env), doctest::Contains("up to matrix[4,4]"),
                         CompileError);
}

TEST_CASE("cross and sum rules") {
    TypeEnv env = env_of({{"u", SemType::vector(3)}, {"v", SemType::vector(3)},
                          {"w", SemType::vector(4)}});
    CHECK(infer_text("cross(u, v)", env)->type == SemType::vector(3));
    CHECK_THROWS_AS(infer_text("cross(u, w)", env), CompileError);
    CHECK(infer_text("sum(w)", env)->type == SemType::real());
    CHECK_THROWS_AS(infer_text("sum(1.0)", env), CompileError);
}

TEST_CASE("elementwise builtins map over shapes") {
    TypeEnv env = env_of({{"x", SemType::real()}, {"v", SemType::vector(2)},
                          {"m", SemType::matrix(2, 2)}, {"k", SemType::integer()}});
    CHECK(infer_text("sin(x)", env)->type == SemType::real());
    CHECK(infer_text("sin(k)", env)->type == SemType::real());
    CHECK(infer_text("sin(v)", env)->type == SemType::vector(2));
    CHECK(infer_text("exp(m)", env)->type == SemType::matrix(2, 2));
}

TEST_CASE("integer promotion and true division") {
    TypeEnv env = env_of({{"i", SemType::integer()}, {"j", SemType::integer()},
                          {"x", SemType::real()}});
    CHECK(infer_text("i + j", env)->type == SemType::integer());
    CHECK(infer_text("i + x", env)->type == SemType::real());
    CHECK(infer_text("i / j", env)->type == SemType::real());
    CHECK(infer_text("i^3", env)->type == SemType::integer());
}

TEST_CASE("comparisons need scalars; cond needs matching branches") {
    TypeEnv env = env_of({{"v", SemType::vector(2)}, {"x", SemType::real()},
                          {"p", SemType::boolean()}});
    CHECK(infer_text("x < 1", env)->type == SemType::boolean());
    CHECK_THROWS_WITH_AS(infer_text("v < x", env), doctest::Contains("scalar"), CompileError);
    CHECK(infer_text("cond(p, x, 2)", env)->type == SemType::real());
    CHECK(infer_text("cond(p, v, v)", env)->type == SemType::vector(2));
    CHECK_THROWS_AS(infer_text("cond(p, v, x)", env), CompileError);
    CHECK_THROWS_AS(infer_text("cond(x, x, x)", env), CompileError);
}

TEST_CASE("calling a non-function and using a function as a value") {
    Project p = parse_project("input t: real\n"
                              "def f(x: real) = sin(x)\n"
                              "output bad = t\n");
    TypeEnv env = TypeEnv::for_project(p);
    CHECK_THROWS_WITH_AS(infer(parse_formula("t(3)"), env), doctest::Contains("not a function"),
                         CompileError);
    CHECK_THROWS_WITH_AS(infer(parse_formula("f + 1"), env),
                         doctest::Contains("used as a runtime value"), CompileError);
    CHECK_THROWS_WITH_AS(infer(parse_formula("f(f)"), env),
                         doctest::Contains("used as a runtime value"), CompileError);
}

TEST_CASE("derivative node typing") {
    TypeEnv env = env_of({{"t", SemType::real()}, {"k", SemType::integer()},
                          {"v", SemType::vector(2)}});
    CHECK(infer_text("D(sin(t), t)", env)->type == SemType::real());
    CHECK(infer_text("D(v + t, t)", env)->type == SemType::vector(2));
    CHECK_THROWS_AS(infer_text("D(t > 1, t)", env), CompileError);
    CHECK_THROWS_WITH_AS(infer_text("D(t, k)", env), doctest::Contains("must be real"),
                         CompileError);
    CHECK_THROWS_AS(infer_text("D(t, missing)", env), CompileError);
}

TEST_CASE("inline: single substitution") {
    Project p = parse_project("input t: real\n"
                              "def f(x: real) = sin(x)\n"
                              "output y = f(t)\n");
    Project inl = inline_functions(p);
    CHECK(structurally_equal(inl.outputs[0].expr, parse_formula("sin(t)")));
}

TEST_CASE("inline: composition f(g(t))") {
    Project p = parse_project("input t: real\n"
                              "def f(x: real) = x^2\n"
                              "def g(x: real) = sin(x)\n"
                              "output y = f(g(t))\n");
    Project inl = inline_functions(p);
    CHECK(structurally_equal(inl.outputs[0].expr, parse_formula("sin(t)^2")));
}

TEST_CASE("inline: duplication f(f(t)) with f(x) = x + x") {
    Project p = parse_project("input t: real\n"
                              "def f(x: real) = x + x\n"
                              "output y = f(f(t))\n");
    Project inl = inline_functions(p);
    CHECK(structurally_equal(inl.outputs[0].expr, parse_formula("(t + t) + (t + t)")));
    // both forms evaluate to 6 at t = 1.5, exactly
    TypeEnv env_pre = TypeEnv::for_project(p);
    TypeEnv env_post = TypeEnv::for_project(inl);
    Bindings b{{"t", Value::real(1.5)}};
    Value before = eval_ast(infer(p.outputs[0].expr, env_pre), b, &env_pre);
    Value after = eval_ast(infer(inl.outputs[0].expr, env_post), b);
    CHECK(before.r == 6.0);
    CHECK(after.r == 6.0);
}

TEST_CASE("inline: defs may reference inputs alongside formals") {
    Project p = parse_project("input t: real\n"
                              "input c: real\n"
                              "def f(x: real) = x * c\n"
                              "output y = f(t + 1)\n");
    Project inl = inline_functions(p);
    CHECK(structurally_equal(inl.outputs[0].expr, parse_formula("(t + 1) * c")));
}

TEST_CASE("inline: argument type mismatch is rejected") {
    Project p = parse_project("input v: vector[2]\n"
                              "def f(x: real) = sin(x)\n"
                              "output y = f(v)\n");
    CHECK_THROWS_WITH_AS(inline_functions(p), doctest::Contains("expected real"), CompileError);
}

TEST_CASE("inline: differentiation variable substitutes only to a variable") {
    Project ok = parse_project("input t: real\n"
                               "def f(x: real) = D(x^2, x)\n"
                               "output y = f(t)\n");
    Project inl = inline_functions(ok);
    CHECK(inl.outputs[0].expr->kind == ExprKind::Deriv);
    CHECK(inl.outputs[0].expr->name == "t");

    Project bad = parse_project("input t: real\n"
                                "def f(x: real) = D(x^2, x)\n"
                                "output y = f(t + 1)\n");
    CHECK_THROWS_WITH_AS(inline_functions(bad), doctest::Contains("plain variable"),
                         CompileError);
}

TEST_CASE("declared return types are checked") {
    CHECK_THROWS_WITH_AS(
        check_project(parse_project("input t: real\n"
                                    "def f(x: real) :: vector[2] = sin(x)\n"
                                    "output y = f(t)\n")),
        doctest::Contains("declares return type"), CompileError);
}

TEST_CASE("inlining preserves evaluation exactly on random projects") {
    std::mt19937_64 rng(77);
    for (int round = 0; round < 40; ++round) {
        testgen::RandomCase c = testgen::gen_case(rng, 3, 4, 3);
        Project inl = inline_functions(c.project); // no defs: must be a no-op semantically
        TypeEnv env = TypeEnv::for_project(inl);
        for (const auto& b : c.bindings) {
            Value before = eval_ast(c.checked[0].expr, b);
            Value after = eval_ast(infer(inl.outputs[0].expr, env), b);
            CHECK(testgen::rel_diff(before, after) == 0.0);
        }
    }
}

TEST_CASE("soundness: inferred type matches evaluated shape on random cases") {
    std::mt19937_64 rng(500);
    for (int round = 0; round < 60; ++round) {
        testgen::RandomCase c = testgen::gen_case(rng, 2, 5, 4);
        for (const auto& b : c.bindings) {
            Value v = eval_ast(c.checked[0].expr, b);
            CHECK(v.matches(c.checked[0].expr->type));
        }
    }
}

TEST_CASE("matrix(1,1) demotes to real only in scalar-only contexts") {
    TypeEnv env = env_of({{"f", SemType::vector(2)}, {"a", SemType::matrix(2, 2)}});
    // scalar-only contexts demote
    CHECK(infer_text("sin(f^T * a * f)", env)->type == SemType::real());
    CHECK(infer_text("(f^T * a * f) > 0", env)->type == SemType::boolean());
    CHECK(infer_text("min(f^T * a * f, 2)", env)->type == SemType::real());
    CHECK(infer_text("(f^T * a * f)^2", env)->type == SemType::real());
    // elsewhere the 1x1 stays a matrix
    CHECK(infer_text("f^T * a * f + 1", env)->type == SemType::matrix(1, 1));
    CHECK(infer_text("(f^T * a * f)^T", env)->type == SemType::matrix(1, 1));
    CHECK_THROWS_AS(infer_text("(f^T * a * f) + f", env), CompileError);

    // end to end through both evaluators
    Project p = parse_project("input f: vector[2]\ninput a: matrix[2,2]\n"
                              "output y = exp(f^T * a * f)\n");
    Compiled c = compile_project(p);
    Bindings b{{"f", Value::vector({1, 1})}, {"a", Value::matrix(2, 2, {1, 0, 0, 1})}};
    Value tape_v = eval_tape(c.tape, b)[0];
    Value ast_v = eval_ast(c.outputs[0].expr, b);
    CHECK(tape_v.tag == Value::Tag::Real);
    CHECK(tape_v.r == std::exp(2.0));
    CHECK(ast_v.r == tape_v.r);
}

TEST_CASE("zero-argument defs inline") {
    Project p = parse_project("input t: real\n"
                              "def k() = 2.5\n"
                              "output y = k() * t\n");
    Project inl = inline_functions(p);
    CHECK(structurally_equal(inl.outputs[0].expr, parse_formula("2.5 * t")));
}

TEST_CASE("min/max do not broadcast over shapes") {
    TypeEnv env = env_of({{"v", SemType::vector(2)}, {"x", SemType::real()}});
    CHECK_THROWS_WITH_AS(infer_text("min(v, x)", env), doctest::Contains("numeric scalars"),
                         CompileError);
}
