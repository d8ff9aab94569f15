#pragma once

#include <cassert>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "flc/ast.hpp"
#include "flc/builtins.hpp"
#include "flc/diagnostics.hpp"
#include "flc/project.hpp"
#include "flc/types.hpp"

namespace flc {

// Marks binary arithmetic where one operand is a scalar applied
// componentwise across the other operand's elements.
enum class Broadcast { None, LeftScalar, RightScalar };

struct TypedExpr;
using TypedExprPtr = std::shared_ptr<const TypedExpr>;

// An Expr with every node annotated by its resolved SemType.
struct TypedExpr {
    ExprKind kind;
    std::vector<TypedExprPtr> children;
    std::string name;
    double real_value = 0.0;
    std::int64_t int_value = 0;
    bool bool_value = false;
    SemType type;
    Broadcast broadcast = Broadcast::None;
    SourceSpan span;
};

struct TypeEnv {
    // Variables visible to the expression being typed (inputs, formals).
    std::unordered_map<std::string, SemType> vars;
    // Runtime-bound inputs only; used to rebuild scopes for def bodies.
    std::unordered_map<std::string, SemType> inputs;
    std::unordered_map<std::string, const FunctionDef*> defs;

    static TypeEnv for_project(const Project& p) {
        TypeEnv env;
        for (const auto& in : p.inputs) {
            env.vars.emplace(in.name, in.type);
            env.inputs.emplace(in.name, in.type);
        }
        for (const auto& d : p.defs)
            env.defs.emplace(d.name, &d);
        return env;
    }

    // Scope for a def body: project inputs overlaid by the formals.
    TypeEnv scope_for(const FunctionDef& def) const {
        TypeEnv env;
        env.inputs = inputs;
        env.defs = defs;
        env.vars = inputs;
        for (const auto& p : def.params)
            env.vars[p.name] = p.type;
        return env;
    }
};

namespace detail {

inline TypedExprPtr make_typed(const Expr& e, SemType type, std::vector<TypedExprPtr> children,
                               Broadcast bc = Broadcast::None) {
    auto t = std::make_shared<TypedExpr>();
    t->kind = e.kind;
    t->children = std::move(children);
    t->name = e.name;
    t->real_value = e.real_value;
    t->int_value = e.int_value;
    t->bool_value = e.bool_value;
    t->type = std::move(type);
    t->broadcast = bc;
    t->span = e.span;
    return t;
}

// Int op Real promotes to Real.
inline SemType numeric_join(const SemType& a, const SemType& b) {
    if (a.kind == SemType::Kind::Int && b.kind == SemType::Kind::Int)
        return SemType::integer();
    return SemType::real();
}

// In scalar-only positions a matrix(1,1) (a quadratic form, say) demotes to
// real. Everywhere else it keeps its matrix nature.
inline bool scalar_in_context(const SemType& t) {
    return t.is_numeric_scalar() || t == SemType::matrix(1, 1);
}

inline bool assignable(const SemType& value, const SemType& slot) {
    if (value == slot)
        return true;
    return value.kind == SemType::Kind::Int && slot.kind == SemType::Kind::Real;
}

inline const char* op_symbol(ExprKind k) {
    switch (k) {
    case ExprKind::Add: return "+";
    case ExprKind::Sub: return "-";
    case ExprKind::Mul: return "*";
    case ExprKind::Div: return "/";
    case ExprKind::Lt: return "<";
    case ExprKind::Le: return "<=";
    case ExprKind::Eq: return "==";
    case ExprKind::Ne: return "!=";
    case ExprKind::Ge: return ">=";
    case ExprKind::Gt: return ">";
    default: return "?";
    }
}

} // namespace detail

TypedExprPtr infer(const Expr& e, const TypeEnv& env);

namespace detail {

[[noreturn]] inline void type_error(const std::string& msg, const Expr& e) {
    throw CompileError(msg, e.span);
}

inline TypedExprPtr infer_arith(const Expr& e, const TypeEnv& env) {
    TypedExprPtr lhs = infer(*e.children[0], env);
    TypedExprPtr rhs = infer(*e.children[1], env);
    const SemType& lt = lhs->type;
    const SemType& rt = rhs->type;
    const char* op = op_symbol(e.kind);
    auto mismatch = [&]() -> TypedExprPtr {
        type_error(std::string("shape mismatch: cannot apply '") + op + "' to " + to_string(lt) +
                       " and " + to_string(rt),
                   e);
    };

    if (lt.is_function() || rt.is_function())
        type_error("function used as a runtime value", e);
    if (lt.kind == SemType::Kind::Bool || rt.kind == SemType::Kind::Bool)
        type_error(std::string("operator '") + op + "' is not defined for bool operands", e);

    // scalar op scalar
    if (lt.is_numeric_scalar() && rt.is_numeric_scalar()) {
        SemType result = (e.kind == ExprKind::Div) ? SemType::real() : numeric_join(lt, rt);
        return make_typed(e, result, {lhs, rhs});
    }
    // scalar broadcast against vector/matrix, both directions, all four ops
    if (lt.is_numeric_scalar() && rt.is_shaped())
        return make_typed(e, rt, {lhs, rhs}, Broadcast::LeftScalar);
    if (lt.is_shaped() && rt.is_numeric_scalar())
        return make_typed(e, lt, {lhs, rhs}, Broadcast::RightScalar);

    if (e.kind == ExprKind::Add || e.kind == ExprKind::Sub) {
        if (lt == rt) // vector(n)±vector(n), matrix(m,n)±matrix(m,n)
            return make_typed(e, lt, {lhs, rhs});
        return mismatch();
    }

    if (e.kind == ExprKind::Mul) {
        // Vectors act as column matrices inside a product. A column result
        // stays a vector except in the 1x1 case, which remains matrix(1,1)
        // so quadratic forms like f^T*a*f keep their matrix nature.
        const bool lv = lt.kind == SemType::Kind::Vector;
        const bool rv = rt.kind == SemType::Kind::Vector;
        const int lrows = lt.rows;
        const int lcols = lv ? 1 : lt.cols;
        const int rrows = rt.rows;
        const int rcols = rv ? 1 : rt.cols;
        if (lcols != rrows)
            return mismatch();
        if (rv && !lv) { // matrix * vector
            if (lrows == 1)
                return make_typed(e, SemType::matrix(1, 1), {lhs, rhs});
            return make_typed(e, SemType::vector(lrows), {lhs, rhs});
        }
        if (lv && !rv) // vector * matrix: outer-product style lift
            return make_typed(e, SemType::matrix(lrows, rcols), {lhs, rhs});
        if (lv && rv) // vector * vector never matches: 1 != n unless n == 1
            return mismatch();
        return make_typed(e, SemType::matrix(lrows, rcols), {lhs, rhs});
    }

    // Division by a vector or matrix has no componentwise meaning here.
    return mismatch();
}

inline TypedExprPtr infer_call(const Expr& e, const TypeEnv& env) {
    const std::string& callee = e.name;

    if (is_unary_builtin(callee)) {
        TypedExprPtr arg = infer(*e.children[0], env);
        const SemType& at = arg->type;
        if (at.is_numeric_scalar() || at == SemType::matrix(1, 1))
            return make_typed(e, SemType::real(), {arg});
        if (at.is_shaped()) // componentwise over every element
            return make_typed(e, at, {arg});
        type_error("'" + callee + "' expects a numeric argument, got " + to_string(at), e);
    }
    if (is_binary_builtin(callee)) {
        TypedExprPtr a = infer(*e.children[0], env);
        TypedExprPtr b = infer(*e.children[1], env);
        if (!scalar_in_context(a->type) || !scalar_in_context(b->type))
            type_error("'" + callee + "' expects two numeric scalars, got " + to_string(a->type) +
                           " and " + to_string(b->type),
                       e);
        SemType ta = a->type.is_numeric_scalar() ? a->type : SemType::real();
        SemType tb = b->type.is_numeric_scalar() ? b->type : SemType::real();
        return make_typed(e, numeric_join(ta, tb), {a, b});
    }

    auto def_it = env.defs.find(callee);
    if (def_it == env.defs.end()) {
        auto var_it = env.vars.find(callee);
        if (var_it != env.vars.end())
            type_error("cannot call '" + callee + "': it has type " + to_string(var_it->second) +
                           ", not a function",
                       e);
        type_error("unknown function '" + callee + "'", e);
    }
    const FunctionDef& def = *def_it->second;
    if (e.children.size() != def.params.size())
        type_error("function '" + callee + "' expects " + std::to_string(def.params.size()) +
                       " argument(s), got " + std::to_string(e.children.size()),
                   e);
    std::vector<TypedExprPtr> args;
    args.reserve(e.children.size());
    for (size_t i = 0; i < e.children.size(); ++i) {
        TypedExprPtr arg = infer(*e.children[i], env);
        if (arg->type.is_function())
            type_error("function '" + e.children[i]->name +
                           "' used as a runtime value; compose by nesting calls instead",
                       *e.children[i]);
        if (!assignable(arg->type, def.params[i].type))
            type_error("argument " + std::to_string(i + 1) + " of '" + callee + "' has type " +
                           to_string(arg->type) + ", expected " + to_string(def.params[i].type),
                       *e.children[i]);
        args.push_back(std::move(arg));
    }
    // The call's type is the def body's type under the formal scope.
    TypedExprPtr body = infer(*def.body, env.scope_for(def));
    if (def.declared_return && !(body->type == *def.declared_return))
        type_error("function '" + callee + "' declares return type " +
                       to_string(*def.declared_return) + " but its body has type " +
                       to_string(body->type),
                   e);
    return make_typed(e, body->type, std::move(args));
}

} // namespace detail

// Resolve the SemType of every node under the context-sensitive rules:
// scalar broadcasting over vectors/matrices, shape-checked matrix algebra,
// componentwise elementwise builtins, compile-time function values.
inline TypedExprPtr infer(const Expr& e, const TypeEnv& env) {
    using detail::make_typed;
    using detail::type_error;

    switch (e.kind) {
    case ExprKind::RealLit:
        return make_typed(e, SemType::real(), {});
    case ExprKind::IntLit:
        return make_typed(e, SemType::integer(), {});
    case ExprKind::BoolLit:
        return make_typed(e, SemType::boolean(), {});

    case ExprKind::Var: {
        auto it = env.vars.find(e.name);
        if (it != env.vars.end())
            return make_typed(e, it->second, {});
        auto def_it = env.defs.find(e.name);
        if (def_it != env.defs.end())
            type_error("function '" + e.name + "' used as a runtime value", e);
        type_error("unresolved identifier '" + e.name + "'", e);
    }

    case ExprKind::Neg: {
        TypedExprPtr c = infer(*e.children[0], env);
        if (!c->type.is_numeric_scalar() && !c->type.is_shaped())
            type_error("cannot negate a value of type " + to_string(c->type), e);
        return make_typed(e, c->type, {c});
    }

    case ExprKind::Not: {
        TypedExprPtr c = infer(*e.children[0], env);
        if (c->type.kind != SemType::Kind::Bool)
            type_error("'not' expects bool, got " + to_string(c->type), e);
        return make_typed(e, SemType::boolean(), {c});
    }

    case ExprKind::Add:
    case ExprKind::Sub:
    case ExprKind::Mul:
    case ExprKind::Div:
        return detail::infer_arith(e, env);

    case ExprKind::Pow: {
        TypedExprPtr base = infer(*e.children[0], env);
        assert(e.children[1]->kind == ExprKind::IntLit);
        TypedExprPtr exponent = infer(*e.children[1], env);
        if (!detail::scalar_in_context(base->type))
            type_error("'^k' requires a scalar base, got " + to_string(base->type), e);
        SemType result = base->type.is_numeric_scalar() ? base->type : SemType::real();
        return make_typed(e, result, {base, exponent});
    }

    case ExprKind::Lt:
    case ExprKind::Le:
    case ExprKind::Ge:
    case ExprKind::Gt:
    case ExprKind::Eq:
    case ExprKind::Ne: {
        TypedExprPtr a = infer(*e.children[0], env);
        TypedExprPtr b = infer(*e.children[1], env);
        const bool equality = e.kind == ExprKind::Eq || e.kind == ExprKind::Ne;
        const bool both_bool =
            a->type.kind == SemType::Kind::Bool && b->type.kind == SemType::Kind::Bool;
        if (!(detail::scalar_in_context(a->type) && detail::scalar_in_context(b->type)) &&
            !(equality && both_bool))
            type_error(std::string("comparison '") + detail::op_symbol(e.kind) +
                           "' requires scalar operands, got " + to_string(a->type) + " and " +
                           to_string(b->type),
                       e);
        return make_typed(e, SemType::boolean(), {a, b});
    }

    case ExprKind::And:
    case ExprKind::Or: {
        TypedExprPtr a = infer(*e.children[0], env);
        TypedExprPtr b = infer(*e.children[1], env);
        if (a->type.kind != SemType::Kind::Bool || b->type.kind != SemType::Kind::Bool)
            type_error(std::string("'") + (e.kind == ExprKind::And ? "and" : "or") +
                           "' expects bool operands, got " + to_string(a->type) + " and " +
                           to_string(b->type),
                       e);
        return make_typed(e, SemType::boolean(), {a, b});
    }

    case ExprKind::Call:
        return detail::infer_call(e, env);

    case ExprKind::Transpose: {
        TypedExprPtr c = infer(*e.children[0], env);
        if (c->type.kind == SemType::Kind::Vector) // column vector -> row matrix
            return make_typed(e, SemType::matrix(1, c->type.rows), {c});
        if (c->type.kind == SemType::Kind::Matrix)
            return make_typed(e, SemType::matrix(c->type.cols, c->type.rows), {c});
        type_error("transpose expects a vector or matrix, got " + to_string(c->type), e);
    }

    case ExprKind::Inverse: {
        TypedExprPtr c = infer(*e.children[0], env);
        if (c->type.kind != SemType::Kind::Matrix)
            type_error("inverse expects a square matrix, got " + to_string(c->type), e);
        if (c->type.rows != c->type.cols)
            type_error("inverse of non-square " + to_string(c->type), e);
        if (c->type.rows > 4)
            type_error("inverse supported up to matrix[4,4], got " + to_string(c->type), e);
        return make_typed(e, c->type, {c});
    }

    case ExprKind::Cross: {
        TypedExprPtr a = infer(*e.children[0], env);
        TypedExprPtr b = infer(*e.children[1], env);
        if (!(a->type == SemType::vector(3)) || !(b->type == SemType::vector(3)))
            type_error("cross expects two vector[3] operands, got " + to_string(a->type) +
                           " and " + to_string(b->type),
                       e);
        return make_typed(e, SemType::vector(3), {a, b});
    }

    case ExprKind::Sum: {
        TypedExprPtr c = infer(*e.children[0], env);
        if (c->type.kind != SemType::Kind::Vector)
            type_error("sum expects a vector, got " + to_string(c->type), e);
        return make_typed(e, SemType::real(), {c});
    }

    case ExprKind::Select: {
        TypedExprPtr c = infer(*e.children[0], env);
        TypedExprPtr a = infer(*e.children[1], env);
        TypedExprPtr b = infer(*e.children[2], env);
        if (c->type.kind != SemType::Kind::Bool)
            type_error("cond expects a bool condition, got " + to_string(c->type), e);
        if (a->type.is_function() || b->type.is_function())
            type_error("function used as a runtime value", e);
        if (a->type == b->type)
            return make_typed(e, a->type, {c, a, b});
        if (a->type.is_numeric_scalar() && b->type.is_numeric_scalar())
            return make_typed(e, SemType::real(), {c, a, b});
        type_error("cond branches have different types: " + to_string(a->type) + " and " +
                       to_string(b->type),
                   e);
    }

    case ExprKind::Delta: {
        TypedExprPtr c = infer(*e.children[0], env);
        if (!detail::scalar_in_context(c->type))
            type_error("delta expects a scalar argument, got " + to_string(c->type), e);
        return make_typed(e, SemType::real(), {c});
    }

    case ExprKind::Deriv: {
        TypedExprPtr body = infer(*e.children[0], env);
        const SemType& bt = body->type;
        if (!(bt.kind == SemType::Kind::Real || bt.is_shaped()))
            type_error("cannot differentiate an expression of type " + to_string(bt), e);
        auto it = env.vars.find(e.name);
        if (it == env.vars.end())
            type_error("unresolved differentiation variable '" + e.name + "'", e);
        if (it->second.kind != SemType::Kind::Real)
            type_error("differentiation variable '" + e.name + "' has type " +
                           to_string(it->second) + "; it must be real",
                       e);
        return make_typed(e, bt, {body});
    }
    }
    type_error("internal: unhandled expression kind", e);
}

inline TypedExprPtr infer(const ExprPtr& e, const TypeEnv& env) { return infer(*e, env); }

// Forget the annotations, recovering a plain Expr tree.
inline ExprPtr strip_types(const TypedExpr& e) {
    auto out = std::make_shared<Expr>();
    out->kind = e.kind;
    out->name = e.name;
    out->real_value = e.real_value;
    out->int_value = e.int_value;
    out->bool_value = e.bool_value;
    out->span = e.span;
    out->children.reserve(e.children.size());
    for (const auto& c : e.children)
        out->children.push_back(strip_types(*c));
    return out;
}

inline ExprPtr strip_types(const TypedExprPtr& e) { return strip_types(*e); }

// Type-check everything in a project: def bodies against their declared
// return types, then every output.
struct CheckedOutput {
    std::string name;
    TypedExprPtr expr;
};

inline std::vector<CheckedOutput> check_project(const Project& p) {
    TypeEnv env = TypeEnv::for_project(p);
    for (const auto& d : p.defs) {
        TypedExprPtr body = infer(*d.body, env.scope_for(d));
        if (d.declared_return && !(body->type == *d.declared_return))
            throw CompileError("function '" + d.name + "' declares return type " +
                                   to_string(*d.declared_return) + " but its body has type " +
                                   to_string(body->type),
                               d.span);
    }
    std::vector<CheckedOutput> outputs;
    outputs.reserve(p.outputs.size());
    for (const auto& o : p.outputs)
        outputs.push_back({o.name, infer(*o.expr, env)});
    return outputs;
}

namespace detail {

inline ExprPtr substitute(const ExprPtr& e,
                          const std::unordered_map<std::string, ExprPtr>& replacements) {
    if (e->kind == ExprKind::Var) {
        auto it = replacements.find(e->name);
        return it != replacements.end() ? it->second : e;
    }
    if (e->kind == ExprKind::Deriv) {
        ExprPtr body = substitute(e->children[0], replacements);
        std::string var = e->name;
        auto it = replacements.find(var);
        if (it != replacements.end()) {
            if (it->second->kind != ExprKind::Var)
                throw CompileError("cannot differentiate with respect to '" +
                                       pretty_print(it->second) +
                                       "'; the argument must be a plain variable",
                                   e->span);
            var = it->second->name;
        }
        return make_deriv(std::move(body), std::move(var), e->span);
    }
    std::vector<ExprPtr> kids;
    kids.reserve(e->children.size());
    bool changed = false;
    for (const auto& c : e->children) {
        kids.push_back(substitute(c, replacements));
        changed = changed || kids.back() != c;
    }
    if (!changed)
        return e;
    auto out = std::make_shared<Expr>(*e);
    out->children = std::move(kids);
    return out;
}

inline ExprPtr inline_expr(const ExprPtr& e, const TypeEnv& env) {
    std::vector<ExprPtr> kids;
    kids.reserve(e->children.size());
    bool changed = false;
    for (const auto& c : e->children) {
        kids.push_back(inline_expr(c, env));
        changed = changed || kids.back() != c;
    }

    if (e->kind == ExprKind::Call) {
        auto def_it = env.defs.find(e->name);
        if (def_it != env.defs.end()) {
            const FunctionDef& def = *def_it->second;
            if (kids.size() != def.params.size())
                throw CompileError("function '" + def.name + "' expects " +
                                       std::to_string(def.params.size()) + " argument(s), got " +
                                       std::to_string(kids.size()),
                                   e->span);
            std::unordered_map<std::string, ExprPtr> replacements;
            for (size_t i = 0; i < kids.size(); ++i) {
                TypedExprPtr arg = infer(*kids[i], env);
                if (arg->type.is_function())
                    throw CompileError("function '" + kids[i]->name +
                                           "' used as a runtime value; compose by nesting calls",
                                       kids[i]->span);
                if (!assignable(arg->type, def.params[i].type))
                    throw CompileError("argument " + std::to_string(i + 1) + " of '" + def.name +
                                           "' has type " + to_string(arg->type) + ", expected " +
                                           to_string(def.params[i].type),
                                       kids[i]->span);
                replacements.emplace(def.params[i].name, kids[i]);
            }
            // Resolve defs inside the body under its own scope, then drop
            // the formals in favor of the (already inlined) arguments.
            ExprPtr body = inline_expr(def.body, env.scope_for(def));
            return substitute(body, replacements);
        }
    }

    if (!changed)
        return e;
    auto out = std::make_shared<Expr>(*e);
    out->children = std::move(kids);
    return out;
}

} // namespace detail

// Replace every call to a defined function by its body with formals
// substituted by the argument expressions. Nested application f(g(t)) is
// composition; the project's no-recursion invariant bounds the expansion.
inline Project inline_functions(const Project& p) {
    TypeEnv env = TypeEnv::for_project(p);
    Project out;
    out.inputs = p.inputs;
    out.outputs.reserve(p.outputs.size());
    for (const auto& o : p.outputs)
        out.outputs.push_back({o.name, detail::inline_expr(o.expr, env), o.span});
    return out;
}

} // namespace flc
