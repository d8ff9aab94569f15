#pragma once

#include <bit>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "flc/diagnostics.hpp"
#include "flc/numfmt.hpp"

namespace flc {

enum class ExprKind {
    RealLit,
    IntLit,
    BoolLit,
    Var,
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow, // exponent child is always an IntLit (grammar guarantees it)
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
    And,
    Or,
    Not,
    Call, // builtin or user-defined function; callee kept by name
    Transpose,
    Inverse,
    Cross,
    Sum,
    Select, // children: condition, then, else
    Delta,
    Deriv, // children: body; `name` holds the differentiation variable
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

// Immutable formula tree. Sharing subtrees is fine; nothing mutates them.
struct Expr {
    ExprKind kind;
    std::vector<ExprPtr> children;
    std::string name;     // Var, Call (callee), Deriv (diff variable)
    double real_value = 0.0;
    std::int64_t int_value = 0;
    bool bool_value = false;
    SourceSpan span;
};

inline ExprPtr make_expr(ExprKind kind, std::vector<ExprPtr> children = {}, SourceSpan span = {}) {
    auto e = std::make_shared<Expr>();
    e->kind = kind;
    e->children = std::move(children);
    e->span = span;
    return e;
}

inline ExprPtr make_real(double v, SourceSpan span = {}) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::RealLit;
    e->real_value = v;
    e->span = span;
    return e;
}

inline ExprPtr make_int(std::int64_t v, SourceSpan span = {}) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::IntLit;
    e->int_value = v;
    e->span = span;
    return e;
}

inline ExprPtr make_bool(bool v, SourceSpan span = {}) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::BoolLit;
    e->bool_value = v;
    e->span = span;
    return e;
}

inline ExprPtr make_var(std::string name, SourceSpan span = {}) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Var;
    e->name = std::move(name);
    e->span = span;
    return e;
}

inline ExprPtr make_call(std::string callee, std::vector<ExprPtr> args, SourceSpan span = {}) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Call;
    e->children = std::move(args);
    e->name = std::move(callee);
    e->span = span;
    return e;
}

inline ExprPtr make_deriv(ExprPtr body, std::string var, SourceSpan span = {}) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Deriv;
    e->children = {std::move(body)};
    e->name = std::move(var);
    e->span = span;
    return e;
}

inline ExprPtr make_binary(ExprKind kind, ExprPtr lhs, ExprPtr rhs, SourceSpan span = {}) {
    return make_expr(kind, {std::move(lhs), std::move(rhs)}, span);
}

inline bool is_literal(const Expr& e) {
    return e.kind == ExprKind::RealLit || e.kind == ExprKind::IntLit || e.kind == ExprKind::BoolLit;
}

// Structural equality, ignoring source spans.
inline bool structurally_equal(const Expr& a, const Expr& b) {
    if (a.kind != b.kind || a.children.size() != b.children.size())
        return false;
    switch (a.kind) {
    case ExprKind::RealLit:
        // bit comparison so NaN literals compare equal to themselves
        if (std::bit_cast<std::uint64_t>(a.real_value) !=
            std::bit_cast<std::uint64_t>(b.real_value))
            return false;
        break;
    case ExprKind::IntLit:
        if (a.int_value != b.int_value)
            return false;
        break;
    case ExprKind::BoolLit:
        if (a.bool_value != b.bool_value)
            return false;
        break;
    case ExprKind::Var:
    case ExprKind::Call:
    case ExprKind::Deriv:
        if (a.name != b.name)
            return false;
        break;
    default:
        break;
    }
    for (size_t i = 0; i < a.children.size(); ++i)
        if (!structurally_equal(*a.children[i], *b.children[i]))
            return false;
    return true;
}

inline bool structurally_equal(const ExprPtr& a, const ExprPtr& b) {
    return structurally_equal(*a, *b);
}

inline size_t node_count(const Expr& e) {
    size_t n = 1;
    for (const auto& c : e.children)
        n += node_count(*c);
    return n;
}

// True iff a delta node is present anywhere in the tree. A delta on the
// right-hand side of an ODE marks the solution as discontinuous.
inline bool detect_discontinuity(const Expr& e) {
    if (e.kind == ExprKind::Delta)
        return true;
    for (const auto& c : e.children)
        if (detect_discontinuity(*c))
            return true;
    return false;
}

inline bool detect_discontinuity(const ExprPtr& e) { return detect_discontinuity(*e); }

namespace detail {

// Grammar nesting levels, tighter binds higher. Unary sits inside the
// postfix (^) level, so -x^2 reads as (-x)^2.
enum : int {
    prec_or = 1,
    prec_and = 2,
    prec_cmp = 3,
    prec_add = 4,
    prec_mul = 5,
    prec_post = 6,
    prec_unary = 7,
    prec_atom = 8,
};

inline int precedence_of(ExprKind k) {
    switch (k) {
    case ExprKind::Or: return prec_or;
    case ExprKind::And: return prec_and;
    case ExprKind::Lt:
    case ExprKind::Le:
    case ExprKind::Eq:
    case ExprKind::Ne:
    case ExprKind::Ge:
    case ExprKind::Gt: return prec_cmp;
    case ExprKind::Add:
    case ExprKind::Sub: return prec_add;
    case ExprKind::Mul:
    case ExprKind::Div: return prec_mul;
    case ExprKind::Pow:
    case ExprKind::Transpose:
    case ExprKind::Inverse: return prec_post;
    case ExprKind::Neg:
    case ExprKind::Not: return prec_unary;
    default: return prec_atom;
    }
}

void print_expr(std::string& out, const Expr& e);

inline void print_child(std::string& out, const Expr& e, int min_prec) {
    const bool parens = precedence_of(e.kind) < min_prec;
    if (parens)
        out += '(';
    print_expr(out, e);
    if (parens)
        out += ')';
}

inline void print_binary(std::string& out, const Expr& e, const char* op, int prec) {
    print_child(out, *e.children[0], prec);
    out += op;
    print_child(out, *e.children[1], prec + 1);
}

inline void print_call_like(std::string& out, const Expr& e, const std::string& callee) {
    out += callee;
    out += '(';
    for (size_t i = 0; i < e.children.size(); ++i) {
        if (i)
            out += ", ";
        print_expr(out, *e.children[i]);
    }
    out += ')';
}

} // namespace detail

// Canonical text form; parsing it back yields a structurally equal tree for
// any parser-produced input. (Negative literals, which only constant folding
// can create, print as value-equal negations.)
std::string pretty_print(const Expr& e);

namespace detail {

inline void print_expr(std::string& out, const Expr& e) {
    switch (e.kind) {
    case ExprKind::RealLit: {
        std::string s = format_double(e.real_value);
        out += s;
        if (s.find_first_of(".einfa") == std::string::npos)
            out += ".0";
        break;
    }
    case ExprKind::IntLit:
        out += std::to_string(e.int_value);
        break;
    case ExprKind::BoolLit:
        out += e.bool_value ? "true" : "false";
        break;
    case ExprKind::Var:
        out += e.name;
        break;
    case ExprKind::Neg:
        out += '-';
        print_child(out, *e.children[0], prec_unary);
        break;
    case ExprKind::Not:
        out += "not ";
        print_child(out, *e.children[0], prec_unary);
        break;
    case ExprKind::Add: print_binary(out, e, " + ", prec_add); break;
    case ExprKind::Sub: print_binary(out, e, " - ", prec_add); break;
    case ExprKind::Mul: print_binary(out, e, " * ", prec_mul); break;
    case ExprKind::Div: print_binary(out, e, " / ", prec_mul); break;
    case ExprKind::Lt: print_binary(out, e, " < ", prec_cmp + 1); break;
    case ExprKind::Le: print_binary(out, e, " <= ", prec_cmp + 1); break;
    case ExprKind::Eq: print_binary(out, e, " == ", prec_cmp + 1); break;
    case ExprKind::Ne: print_binary(out, e, " != ", prec_cmp + 1); break;
    case ExprKind::Ge: print_binary(out, e, " >= ", prec_cmp + 1); break;
    case ExprKind::Gt: print_binary(out, e, " > ", prec_cmp + 1); break;
    case ExprKind::And: print_binary(out, e, " and ", prec_and); break;
    case ExprKind::Or: print_binary(out, e, " or ", prec_or); break;
    case ExprKind::Pow:
        print_child(out, *e.children[0], prec_post);
        out += '^';
        out += std::to_string(e.children[1]->int_value);
        break;
    case ExprKind::Transpose:
        print_child(out, *e.children[0], prec_post);
        out += "^T";
        break;
    case ExprKind::Inverse:
        print_child(out, *e.children[0], prec_post);
        out += "^-1";
        break;
    case ExprKind::Call: print_call_like(out, e, e.name); break;
    case ExprKind::Cross: print_call_like(out, e, "cross"); break;
    case ExprKind::Sum: print_call_like(out, e, "sum"); break;
    case ExprKind::Select: print_call_like(out, e, "cond"); break;
    case ExprKind::Delta: print_call_like(out, e, "delta"); break;
    case ExprKind::Deriv:
        out += "D(";
        print_expr(out, *e.children[0]);
        out += ", ";
        out += e.name;
        out += ')';
        break;
    }
}

} // namespace detail

inline std::string pretty_print(const Expr& e) {
    std::string out;
    detail::print_expr(out, e);
    return out;
}

inline std::string pretty_print(const ExprPtr& e) { return pretty_print(*e); }

} // namespace flc
