#include "doctest.h"

#include <random>

#include "flc/parser.hpp"
#include "support/random_expr.hpp"

using namespace flc;

TEST_CASE("sin(t^2) parses to call(sin, pow(t, 2))") {
    ExprPtr e = parse_formula("sin(t^2)");
    REQUIRE(e->kind == ExprKind::Call);
    CHECK(e->name == "sin");
    REQUIRE(e->children.size() == 1);
    const Expr& pow = *e->children[0];
    REQUIRE(pow.kind == ExprKind::Pow);
    CHECK(pow.children[0]->kind == ExprKind::Var);
    CHECK(pow.children[0]->name == "t");
    CHECK(pow.children[1]->kind == ExprKind::IntLit);
    CHECK(pow.children[1]->int_value == 2);
}

TEST_CASE("a single identifier is a variable reference") {
    ExprPtr e = parse_formula("a");
    CHECK(e->kind == ExprKind::Var);
    CHECK(e->name == "a");
}

TEST_CASE("f^T * a * f is left associative with a transpose head") {
    ExprPtr e = parse_formula("f^T * a * f");
    // (((f^T) * a) * f)
    REQUIRE(e->kind == ExprKind::Mul);
    CHECK(e->children[1]->name == "f");
    const Expr& left = *e->children[0];
    REQUIRE(left.kind == ExprKind::Mul);
    CHECK(left.children[0]->kind == ExprKind::Transpose);
    CHECK(left.children[0]->children[0]->name == "f");
    CHECK(left.children[1]->name == "a");
}

TEST_CASE("postfix ^ forms: transpose, inverse, power") {
    CHECK(parse_formula("a^T")->kind == ExprKind::Transpose);
    CHECK(parse_formula("a^-1")->kind == ExprKind::Inverse);
    CHECK(parse_formula("a^3")->kind == ExprKind::Pow);
    CHECK(parse_formula("a^-1^T")->kind == ExprKind::Transpose);
    CHECK_THROWS_AS(parse_formula("a^-2"), CompileError);
    CHECK_THROWS_AS(parse_formula("a^b"), CompileError);
}

TEST_CASE("builtin desugaring and arity checks") {
    CHECK(parse_formula("sum(a)")->kind == ExprKind::Sum);
    CHECK(parse_formula("cross(a, b)")->kind == ExprKind::Cross);
    CHECK(parse_formula("delta(t)")->kind == ExprKind::Delta);
    CHECK(parse_formula("cond(a < b, a, b)")->kind == ExprKind::Select);
    ExprPtr d = parse_formula("D(sin(t), t)");
    REQUIRE(d->kind == ExprKind::Deriv);
    CHECK(d->name == "t");
    CHECK_THROWS_AS(parse_formula("sum(a, b)"), CompileError);
    CHECK_THROWS_AS(parse_formula("cross(a)"), CompileError);
    CHECK_THROWS_AS(parse_formula("D(sin(t), t + 1)"), CompileError);
    CHECK_THROWS_AS(parse_formula("sin"), CompileError);
}

TEST_CASE("case sensitivity: A and a are distinct") {
    ExprPtr e = parse_formula("A+a");
    REQUIRE(e->kind == ExprKind::Add);
    CHECK(e->children[0]->name == "A");
    CHECK(e->children[1]->name == "a");
    CHECK(e->children[0]->name != e->children[1]->name);
}

TEST_CASE("parsing is deterministic") {
    ExprPtr a = parse_formula("sin(x) + cos(y) * 2 - z^2");
    ExprPtr b = parse_formula("sin(x) + cos(y) * 2 - z^2");
    CHECK(structurally_equal(a, b));
}

TEST_CASE("syntax errors carry positions and expectations") {
    try {
        parse_formula("a + ");
        FAIL("expected a syntax error");
    } catch (const CompileError& err) {
        CHECK(std::string(err.what()).find("expected an expression") != std::string::npos);
        CHECK(err.span().line == 1);
    }
    CHECK_THROWS_AS(parse_formula("(a + b"), CompileError);
    CHECK_THROWS_AS(parse_formula("a b"), CompileError);
    CHECK_THROWS_AS(parse_formula("1.2.3"), CompileError);
}

TEST_CASE("minimal project parses") {
    Project p = parse_project("input t: real\noutput y = sin(t)\n");
    REQUIRE(p.inputs.size() == 1);
    CHECK(p.inputs[0].name == "t");
    CHECK(p.inputs[0].type == SemType::real());
    CHECK(p.defs.empty());
    REQUIRE(p.outputs.size() == 1);
    CHECK(p.outputs[0].name == "y");
}

TEST_CASE("nested application of a def is accepted") {
    Project p = parse_project("input t: real\n"
                              "def f(x: real) = sin(x)\n"
                              "output y = f(f(t))\n");
    REQUIRE(p.defs.size() == 1);
    CHECK(p.defs[0].params.size() == 1);
    CHECK(p.outputs[0].expr->kind == ExprKind::Call);
}

TEST_CASE("unresolved and duplicate names are parse errors") {
    CHECK_THROWS_WITH_AS(parse_project("output y = z\n"),
                         doctest::Contains("unresolved identifier 'z'"), CompileError);
    CHECK_THROWS_WITH_AS(parse_project("input a: real\ninput a: int\n"),
                         doctest::Contains("duplicate name 'a'"), CompileError);
    // defs are visible only after their declaration
    CHECK_THROWS_AS(parse_project("input t: real\noutput y = f(t)\ndef f(x: real) = x\n"),
                    CompileError);
    // outputs are not referenceable
    CHECK_THROWS_AS(parse_project("input t: real\noutput y = t\noutput z = y\n"), CompileError);
    // builtin names are reserved
    CHECK_THROWS_AS(parse_project("input sin: real\n"), CompileError);
}

TEST_CASE("project files allow comments, blank lines, and types with dims") {
    Project p = parse_project("# comment\n\n"
                              "input m: matrix[2,3]\n"
                              "input v: vector[4]   # trailing comment\n"
                              "input flag: bool\n"
                              "input k: int\n"
                              "output o = m\n");
    CHECK(p.inputs[0].type == SemType::matrix(2, 3));
    CHECK(p.inputs[1].type == SemType::vector(4));
    CHECK(p.inputs[2].type == SemType::boolean());
    CHECK(p.inputs[3].type == SemType::integer());
    CHECK_THROWS_AS(parse_project("input v: vector[0]\n"), CompileError);
}

TEST_CASE("pretty_print round trips representative formulas") {
    for (const char* text : {"sin(t)", "a+b*c", "D(sin(t^2), t)", "f^T * a * f",
                             "cond(a < b and c >= d, -x, y / (z - 1))", "not p or q",
                             "cross(u, v) + w", "sum(a) * 2.5e-3", "a^-1^T^2"}) {
        ExprPtr e = parse_formula(text);
        ExprPtr again = parse_formula(pretty_print(e));
        CHECK_MESSAGE(structurally_equal(e, again), "round trip failed for: ", text);
    }
}

TEST_CASE("pretty_print round trips random expressions") {
    std::mt19937_64 rng(1234);
    testgen::ExprGen gen(rng);
    for (int i = 0; i < 200; ++i) {
        SemType t = gen.random_data_type();
        ExprPtr e = gen.gen(t, 5);
        ExprPtr again = parse_formula(pretty_print(e));
        CHECK_MESSAGE(structurally_equal(e, again), "round trip failed for: ", pretty_print(e));
    }
}
