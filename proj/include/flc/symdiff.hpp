#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "flc/ast.hpp"
#include "flc/typecheck.hpp"

namespace flc {

ExprPtr differentiate(const TypedExpr& e, const std::string& var);

namespace detail {

inline bool is_scalar_class(const SemType& t) { return t.is_numeric_scalar(); }

inline ExprPtr zero_of(const TypedExpr& e) {
    // There is no vector/matrix literal syntax, so a shaped zero is written
    // as a broadcast 0 * x. simplify leaves it alone (shape-preserving) and
    // the tape optimizer cannot misread it.
    if (e.type.is_shaped())
        return make_binary(ExprKind::Mul, make_real(0.0), strip_types(e));
    return make_real(0.0);
}

inline ExprPtr d_unary_builtin(UnaryBuiltin b, const TypedExpr& node, const ExprPtr& u,
                               const ExprPtr& du) {
    auto mul = [](ExprPtr a, ExprPtr b2) { return make_binary(ExprKind::Mul, a, b2); };
    switch (b) {
    case UnaryBuiltin::Sin:
        return mul(make_call("cos", {u}), du);
    case UnaryBuiltin::Cos:
        return mul(make_expr(ExprKind::Neg, {make_call("sin", {u})}), du);
    case UnaryBuiltin::Tan: // 1 + tan^2
        return mul(make_binary(ExprKind::Add, make_real(1.0),
                               make_binary(ExprKind::Pow, make_call("tan", {u}), make_int(2))),
                   du);
    case UnaryBuiltin::Exp:
        return mul(make_call("exp", {u}), du);
    case UnaryBuiltin::Log:
        return make_binary(ExprKind::Div, du, u);
    case UnaryBuiltin::Sqrt:
        return make_binary(ExprKind::Div, du, mul(make_real(2.0), make_call("sqrt", {u})));
    case UnaryBuiltin::Abs:
        // sign(u)*du via a branch-free select; undefined at u == 0.
        return mul(make_expr(ExprKind::Select,
                             {make_binary(ExprKind::Ge, u, make_real(0.0)), make_real(1.0),
                              make_expr(ExprKind::Neg, {make_real(1.0)})}),
                   du);
    }
    throw CompileError("internal: unhandled builtin derivative", node.span);
}

} // namespace detail

// d e / d var under the standard rule table. The input is typed so shape
// questions (is the chain-rule factor a scalar?) are decidable; the result
// is a plain Expr, re-inferred by the pipeline after simplification.
inline ExprPtr differentiate(const TypedExpr& e, const std::string& var) {
    auto d = [&var](const TypedExprPtr& c) { return differentiate(*c, var); };

    switch (e.kind) {
    case ExprKind::RealLit:
    case ExprKind::IntLit:
        return make_real(0.0);

    case ExprKind::Var:
        if (e.name == var)
            return make_real(1.0);
        return detail::zero_of(e);

    case ExprKind::Neg:
        return make_expr(ExprKind::Neg, {d(e.children[0])});

    case ExprKind::Add:
    case ExprKind::Sub:
        return make_binary(e.kind, d(e.children[0]), d(e.children[1]));

    case ExprKind::Mul: {
        // Product rule, operand order preserved (matters for matrices).
        ExprPtr a = strip_types(e.children[0]);
        ExprPtr b = strip_types(e.children[1]);
        return make_binary(ExprKind::Add, make_binary(ExprKind::Mul, d(e.children[0]), b),
                           make_binary(ExprKind::Mul, a, d(e.children[1])));
    }

    case ExprKind::Div: {
        const TypedExpr& denom = *e.children[1];
        if (!detail::is_scalar_class(denom.type))
            throw CompileError("derivative of division by " + to_string(denom.type) +
                                   " is not supported",
                               e.span);
        ExprPtr a = strip_types(e.children[0]);
        ExprPtr b = strip_types(e.children[1]);
        ExprPtr da = d(e.children[0]);
        ExprPtr db = d(e.children[1]);
        return make_binary(
            ExprKind::Div,
            make_binary(ExprKind::Sub, make_binary(ExprKind::Mul, da, b),
                        make_binary(ExprKind::Mul, a, db)),
            make_binary(ExprKind::Mul, b, b));
    }

    case ExprKind::Pow: {
        const std::int64_t k = e.children[1]->int_value;
        if (k == 0)
            return make_real(0.0);
        ExprPtr x = strip_types(e.children[0]);
        ExprPtr dx = d(e.children[0]);
        ExprPtr scaled = make_binary(
            ExprKind::Mul, make_int(k),
            k == 1 ? make_real(1.0) : ExprPtr(make_binary(ExprKind::Pow, x, make_int(k - 1))));
        return make_binary(ExprKind::Mul, scaled, dx);
    }

    case ExprKind::Call: {
        UnaryBuiltin b;
        if (lookup_unary_builtin(e.name, b)) {
            const TypedExpr& arg = *e.children[0];
            if (!detail::is_scalar_class(arg.type))
                throw CompileError("componentwise derivative of '" + e.name + "' over " +
                                       to_string(arg.type) + " is not supported",
                                   e.span);
            return detail::d_unary_builtin(b, e, strip_types(arg), d(e.children[0]));
        }
        if (e.name == "min" || e.name == "max") {
            // Subgradient choice at the kink, like abs.
            ExprPtr a = strip_types(e.children[0]);
            ExprPtr c = strip_types(e.children[1]);
            ExprKind cmp = e.name == "min" ? ExprKind::Le : ExprKind::Ge;
            return make_expr(ExprKind::Select, {make_binary(cmp, a, c), d(e.children[0]),
                                                d(e.children[1])});
        }
        throw CompileError("internal: call to '" + e.name +
                               "' reached differentiation before inlining",
                           e.span);
    }

    case ExprKind::Transpose:
        return make_expr(ExprKind::Transpose, {d(e.children[0])});

    case ExprKind::Sum:
        return make_expr(ExprKind::Sum, {d(e.children[0])});

    case ExprKind::Cross:
        // Bilinear product rule.
        return make_binary(
            ExprKind::Add,
            make_expr(ExprKind::Cross, {d(e.children[0]), strip_types(e.children[1])}),
            make_expr(ExprKind::Cross, {strip_types(e.children[0]), d(e.children[1])}));

    case ExprKind::Select:
        return make_expr(ExprKind::Select,
                         {strip_types(e.children[0]), d(e.children[1]), d(e.children[2])});

    case ExprKind::Inverse:
        throw CompileError("derivative of a matrix inverse is not supported", e.span);

    case ExprKind::Delta:
        throw CompileError("derivative of delta is not supported", e.span);

    case ExprKind::Deriv:
        throw CompileError("internal: nested derivative not resolved before differentiation",
                           e.span);

    default:
        throw CompileError("cannot differentiate a boolean expression", e.span);
    }
}

inline ExprPtr differentiate(const TypedExprPtr& e, const std::string& var) {
    return differentiate(*e, var);
}

// ---------------------------------------------------------------------------
// simplify: terminating rewrite system. Every rule strictly shrinks the tree
// and preserves both value and type, so a bottom-up pass iterated to a
// fixpoint is safe. Shape questions are answered conservatively.

namespace detail {

enum class TypeClass { Bool, Int, Real, Shaped, RealOrShaped, Unknown };

inline TypeClass class_of(const Expr& e, const TypeEnv* env) {
    auto child = [&](size_t i) { return class_of(*e.children[i], env); };
    switch (e.kind) {
    case ExprKind::BoolLit:
        return TypeClass::Bool;
    case ExprKind::IntLit:
        return TypeClass::Int;
    case ExprKind::RealLit:
        return TypeClass::Real;
    case ExprKind::Var: {
        if (!env)
            return TypeClass::Unknown;
        auto it = env->vars.find(e.name);
        if (it == env->vars.end())
            return TypeClass::Unknown;
        switch (it->second.kind) {
        case SemType::Kind::Bool: return TypeClass::Bool;
        case SemType::Kind::Int: return TypeClass::Int;
        case SemType::Kind::Real: return TypeClass::Real;
        case SemType::Kind::Vector:
        case SemType::Kind::Matrix: return TypeClass::Shaped;
        default: return TypeClass::Unknown;
        }
    }
    case ExprKind::Neg:
        return child(0);
    case ExprKind::Add:
    case ExprKind::Sub:
    case ExprKind::Mul: {
        TypeClass a = child(0);
        TypeClass b = child(1);
        if (a == TypeClass::Shaped || b == TypeClass::Shaped)
            return TypeClass::Shaped;
        if (a == TypeClass::Int && b == TypeClass::Int)
            return TypeClass::Int;
        if ((a == TypeClass::Int || a == TypeClass::Real) &&
            (b == TypeClass::Int || b == TypeClass::Real))
            return TypeClass::Real;
        return TypeClass::Unknown;
    }
    case ExprKind::Div: {
        TypeClass a = child(0);
        TypeClass b = child(1);
        if (a == TypeClass::Shaped || b == TypeClass::Shaped)
            return TypeClass::Shaped;
        if ((a == TypeClass::Int || a == TypeClass::Real) &&
            (b == TypeClass::Int || b == TypeClass::Real))
            return TypeClass::Real;
        return TypeClass::RealOrShaped;
    }
    case ExprKind::Pow:
        return child(0);
    case ExprKind::Lt:
    case ExprKind::Le:
    case ExprKind::Eq:
    case ExprKind::Ne:
    case ExprKind::Ge:
    case ExprKind::Gt:
    case ExprKind::And:
    case ExprKind::Or:
    case ExprKind::Not:
        return TypeClass::Bool;
    case ExprKind::Call:
        if (is_unary_builtin(e.name)) {
            TypeClass a = child(0);
            if (a == TypeClass::Shaped)
                return TypeClass::Shaped;
            if (a == TypeClass::Int || a == TypeClass::Real)
                return TypeClass::Real;
            return TypeClass::RealOrShaped;
        }
        if (is_binary_builtin(e.name)) {
            TypeClass a = child(0);
            TypeClass b = child(1);
            if (a == TypeClass::Int && b == TypeClass::Int)
                return TypeClass::Int;
            if ((a == TypeClass::Int || a == TypeClass::Real) &&
                (b == TypeClass::Int || b == TypeClass::Real))
                return TypeClass::Real;
            return TypeClass::Unknown;
        }
        return TypeClass::Unknown;
    case ExprKind::Transpose:
    case ExprKind::Inverse:
    case ExprKind::Cross:
        return TypeClass::Shaped;
    case ExprKind::Sum:
    case ExprKind::Delta:
        return TypeClass::Real;
    case ExprKind::Select: {
        TypeClass a = child(1);
        TypeClass b = child(2);
        if (a == b)
            return a;
        if ((a == TypeClass::Int || a == TypeClass::Real) &&
            (b == TypeClass::Int || b == TypeClass::Real))
            return TypeClass::Real;
        return TypeClass::Unknown;
    }
    case ExprKind::Deriv:
        return child(0);
    }
    return TypeClass::Unknown;
}

inline bool surely_scalar(TypeClass c) { return c == TypeClass::Int || c == TypeClass::Real; }
inline bool surely_not_int(TypeClass c) {
    return c == TypeClass::Real || c == TypeClass::Shaped || c == TypeClass::RealOrShaped;
}

inline bool is_zero_literal(const Expr& e) {
    return (e.kind == ExprKind::IntLit && e.int_value == 0) ||
           (e.kind == ExprKind::RealLit && e.real_value == 0.0);
}
inline bool is_one_literal(const Expr& e) {
    return (e.kind == ExprKind::IntLit && e.int_value == 1) ||
           (e.kind == ExprKind::RealLit && e.real_value == 1.0);
}
inline bool is_int_literal(const Expr& e) { return e.kind == ExprKind::IntLit; }

inline double literal_value(const Expr& e) {
    return e.kind == ExprKind::IntLit ? static_cast<double>(e.int_value) : e.real_value;
}

// Removing this neutral literal keeps the other operand's type iff the
// literal is int (int promotes into anything) or the survivor cannot be int.
inline bool neutral_removable(const Expr& lit, TypeClass survivor) {
    return is_int_literal(lit) || surely_not_int(survivor);
}

// Folding stops at non-finite results: the expression stays symbolic and
// the non-finite value surfaces at evaluation time instead.
inline bool foldable(double v) { return std::isfinite(v); }

inline ExprPtr fold_numeric(double v, bool both_int) {
    if (both_int && std::nearbyint(v) == v && std::fabs(v) <= 9.007199254740992e15)
        return make_int(static_cast<std::int64_t>(v));
    return make_real(v);
}

inline ExprPtr zero_literal_like(const Expr& x_lit_side, TypeClass other) {
    // Annihilation result: int only when both sides are int.
    if (is_int_literal(x_lit_side) && other == TypeClass::Int)
        return make_int(0);
    return make_real(0.0);
}

ExprPtr simplify_node(const ExprPtr& e, const TypeEnv* env);

inline ExprPtr simplify_children(const ExprPtr& e, const TypeEnv* env, bool& changed) {
    std::vector<ExprPtr> kids;
    kids.reserve(e->children.size());
    bool any = false;
    for (const auto& c : e->children) {
        kids.push_back(simplify_node(c, env));
        any = any || kids.back() != c;
    }
    if (!any)
        return e;
    changed = true;
    auto out = std::make_shared<Expr>(*e);
    out->children = std::move(kids);
    return out;
}

inline ExprPtr simplify_node(const ExprPtr& in, const TypeEnv* env) {
    bool changed = false;
    ExprPtr e = simplify_children(in, env, changed);
    const auto& kids = e->children;
    auto klass = [&](const Expr& x) { return class_of(x, env); };

    switch (e->kind) {
    case ExprKind::Neg: {
        const Expr& u = *kids[0];
        if (u.kind == ExprKind::Neg)
            return u.children[0];
        if (u.kind == ExprKind::IntLit && u.int_value != INT64_MIN)
            return make_int(-u.int_value);
        if (u.kind == ExprKind::RealLit)
            return make_real(-u.real_value);
        break;
    }

    case ExprKind::Add:
    case ExprKind::Sub: {
        const Expr& a = *kids[0];
        const Expr& b = *kids[1];
        if (is_literal(a) && is_literal(b) && a.kind != ExprKind::BoolLit &&
            b.kind != ExprKind::BoolLit) {
            const double v = e->kind == ExprKind::Add ? literal_value(a) + literal_value(b)
                                                      : literal_value(a) - literal_value(b);
            if (foldable(v))
                return fold_numeric(v, is_int_literal(a) && is_int_literal(b));
        }
        if (e->kind == ExprKind::Add && is_zero_literal(a) && neutral_removable(a, klass(b)))
            return kids[1];
        if (is_zero_literal(b) && neutral_removable(b, klass(a))) // x+0 and x-0
            return kids[0];
        break;
    }

    case ExprKind::Mul: {
        const Expr& a = *kids[0];
        const Expr& b = *kids[1];
        if (is_literal(a) && is_literal(b) && a.kind != ExprKind::BoolLit &&
            b.kind != ExprKind::BoolLit && foldable(literal_value(a) * literal_value(b)))
            return fold_numeric(literal_value(a) * literal_value(b),
                                is_int_literal(a) && is_int_literal(b));
        if (is_zero_literal(a) && surely_scalar(klass(b)))
            return zero_literal_like(a, klass(b));
        if (is_zero_literal(b) && surely_scalar(klass(a)))
            return zero_literal_like(b, klass(a));
        if (is_one_literal(a) && neutral_removable(a, klass(b)))
            return kids[1];
        if (is_one_literal(b) && neutral_removable(b, klass(a)))
            return kids[0];
        break;
    }

    case ExprKind::Div: {
        const Expr& a = *kids[0];
        const Expr& b = *kids[1];
        if (is_literal(a) && is_literal(b) && a.kind != ExprKind::BoolLit &&
            b.kind != ExprKind::BoolLit && literal_value(b) != 0.0 &&
            foldable(literal_value(a) / literal_value(b)))
            return make_real(literal_value(a) / literal_value(b));
        if (is_zero_literal(a) && surely_scalar(klass(b)))
            return make_real(0.0); // division always has real type
        if (is_one_literal(b) && surely_not_int(klass(a)))
            return kids[0];
        break;
    }

    case ExprKind::Pow: {
        const Expr& base = *kids[0];
        const std::int64_t k = kids[1]->int_value;
        if (is_literal(base) && base.kind != ExprKind::BoolLit && k <= 1 << 20) {
            // Fold by left-to-right chaining, the same arithmetic the
            // evaluator and the lowered tape perform.
            double v = 1.0;
            const double x = literal_value(base);
            for (std::int64_t i = 0; i < k; ++i)
                v = i == 0 ? x : v * x;
            if (foldable(v))
                return fold_numeric(v, is_int_literal(base));
        }
        if (k == 1)
            return kids[0];
        if (k == 0) {
            TypeClass c = klass(base);
            if (c == TypeClass::Int)
                return make_int(1);
            if (c == TypeClass::Real)
                return make_real(1.0);
        }
        break;
    }

    case ExprKind::Lt:
    case ExprKind::Le:
    case ExprKind::Eq:
    case ExprKind::Ne:
    case ExprKind::Ge:
    case ExprKind::Gt: {
        const Expr& a = *kids[0];
        const Expr& b = *kids[1];
        if (is_literal(a) && is_literal(b) && a.kind != ExprKind::BoolLit &&
            b.kind != ExprKind::BoolLit) {
            const double x = literal_value(a);
            const double y = literal_value(b);
            bool r = false;
            switch (e->kind) {
            case ExprKind::Lt: r = x < y; break;
            case ExprKind::Le: r = x <= y; break;
            case ExprKind::Eq: r = x == y; break;
            case ExprKind::Ne: r = x != y; break;
            case ExprKind::Ge: r = x >= y; break;
            default: r = x > y; break;
            }
            return make_bool(r);
        }
        break;
    }

    case ExprKind::And:
    case ExprKind::Or: {
        const Expr& a = *kids[0];
        const Expr& b = *kids[1];
        if (a.kind == ExprKind::BoolLit && b.kind == ExprKind::BoolLit)
            return make_bool(e->kind == ExprKind::And ? (a.bool_value && b.bool_value)
                                                      : (a.bool_value || b.bool_value));
        break;
    }

    case ExprKind::Not:
        if (kids[0]->kind == ExprKind::BoolLit)
            return make_bool(!kids[0]->bool_value);
        break;

    case ExprKind::Select:
        if (kids[0]->kind == ExprKind::BoolLit) {
            const ExprPtr& chosen = kids[0]->bool_value ? kids[1] : kids[2];
            const ExprPtr& other = kids[0]->bool_value ? kids[2] : kids[1];
            TypeClass cc = klass(*chosen);
            // A mixed int/real cond has real type; dropping to a bare int
            // branch would change the result type.
            if (cc == klass(*other) || surely_not_int(cc))
                return chosen;
        }
        break;

    case ExprKind::Call: {
        UnaryBuiltin b;
        if (lookup_unary_builtin(e->name, b) && is_literal(*kids[0]) &&
            kids[0]->kind != ExprKind::BoolLit) {
            const double x = literal_value(*kids[0]);
            double v = 0;
            switch (b) {
            case UnaryBuiltin::Sin: v = std::sin(x); break;
            case UnaryBuiltin::Cos: v = std::cos(x); break;
            case UnaryBuiltin::Tan: v = std::tan(x); break;
            case UnaryBuiltin::Exp: v = std::exp(x); break;
            case UnaryBuiltin::Log: v = std::log(x); break;
            case UnaryBuiltin::Sqrt: v = std::sqrt(x); break;
            case UnaryBuiltin::Abs: v = std::fabs(x); break;
            }
            if (foldable(v))
                return make_real(v);
            break;
        }
        if (is_binary_builtin(e->name) && is_literal(*kids[0]) && is_literal(*kids[1]) &&
            kids[0]->kind != ExprKind::BoolLit && kids[1]->kind != ExprKind::BoolLit) {
            const double x = literal_value(*kids[0]);
            const double y = literal_value(*kids[1]);
            const double v = e->name == "min" ? std::fmin(x, y) : std::fmax(x, y);
            return fold_numeric(v, is_int_literal(*kids[0]) && is_int_literal(*kids[1]));
        }
        break;
    }

    default:
        break;
    }
    return e;
}

} // namespace detail

// Apply the rewrite rules to a fixpoint. The result evaluates identically
// wherever the input does and is never larger.
inline ExprPtr simplify(const ExprPtr& e, const TypeEnv* env = nullptr) {
    ExprPtr cur = e;
    for (;;) {
        ExprPtr next = detail::simplify_node(cur, env);
        if (next == cur)
            return next;
        cur = next;
    }
}

// Eliminate every Deriv node bottom-up (innermost first), re-inferring the
// body each time so shape-sensitive rules see types.
inline ExprPtr resolve_derivatives(const ExprPtr& e, const TypeEnv& env) {
    std::vector<ExprPtr> kids;
    kids.reserve(e->children.size());
    bool changed = false;
    for (const auto& c : e->children) {
        kids.push_back(resolve_derivatives(c, env));
        changed = changed || kids.back() != c;
    }
    if (e->kind == ExprKind::Deriv) {
        TypedExprPtr body = infer(*kids[0], env);
        return differentiate(*body, e->name);
    }
    if (!changed)
        return e;
    auto out = std::make_shared<Expr>(*e);
    out->children = std::move(kids);
    return out;
}

} // namespace flc
