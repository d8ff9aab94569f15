#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "flc/ast.hpp"
#include "flc/diagnostics.hpp"
#include "flc/inverse.hpp"
#include "flc/numfmt.hpp"
#include "flc/tape.hpp"
#include "flc/typecheck.hpp"
#include "flc/value.hpp"

namespace flc {

// Scale-aware singularity threshold shared by the tape guard and the AST
// evaluator.
inline void check_singularity(double det, double max_abs_operand) {
    if (std::fabs(det) < 1e-12 * (1.0 + max_abs_operand))
        throw ExecError("singular matrix: |det| = " + format_double(std::fabs(det)) +
                        " is below the guard threshold");
}

// Execute the instruction stream against a caller-owned slot buffer.
// Inputs must already sit in their slots; constants are (re)written here.
// Allocation-free; safe to call concurrently on one shared Tape as long as
// every caller owns its buffer.
namespace detail {

inline void run_instr(const Tape& t, const Instr& ins, double* s) {
    switch (ins.op) {
    case Opcode::Add: s[ins.dst] = s[ins.a] + s[ins.b]; break;
    case Opcode::Sub: s[ins.dst] = s[ins.a] - s[ins.b]; break;
    case Opcode::Mul: s[ins.dst] = s[ins.a] * s[ins.b]; break;
    case Opcode::Div: s[ins.dst] = s[ins.a] / s[ins.b]; break;
    case Opcode::Neg: s[ins.dst] = -s[ins.a]; break;
    case Opcode::Select:
        s[ins.dst] = s[ins.a] != 0.0 ? s[ins.b] : s[ins.c];
        break;
    case Opcode::LoadConst:
        s[ins.dst] = t.constants[ins.a].value;
        break;
    default:
        if (opcode_arity(ins.op) == 1)
            s[ins.dst] = apply_op(ins.op, s[ins.a]);
        else
            s[ins.dst] = apply_op(ins.op, s[ins.a], s[ins.b]);
    }
}

} // namespace detail

inline void run_tape(const Tape& t, std::span<double> slots) {
    double* s = slots.data();
    for (const auto& c : t.constants)
        s[c.slot] = c.value;
    if (!t.plan.empty()) {
        const int* terms = t.plan_terms.data();
        for (const auto& op : t.plan) {
            if (op.kind == Tape::PlanOp::Kind::Chain) {
                const int* p = terms + op.term_begin;
                double acc = p[1] < 0 ? s[p[0]] : s[p[0]] * s[p[1]];
                for (int k = 1; k < op.term_count; ++k) {
                    const int* q = p + 2 * k;
                    acc = acc + (q[1] < 0 ? s[q[0]] : s[q[0]] * s[q[1]]);
                }
                s[op.dst] = acc;
            } else {
                detail::run_instr(t, t.instrs[op.index], s);
            }
        }
    } else {
        for (const auto& ins : t.instrs)
            detail::run_instr(t, ins, s);
    }
    for (const auto& g : t.guards) {
        double max_abs = 0.0;
        for (int slot : g.operand_slots)
            max_abs = std::fmax(max_abs, std::fabs(s[slot]));
        check_singularity(s[g.det_slot], max_abs);
    }
}

inline void bind_inputs(const Tape& t, const Bindings& b, std::span<double> slots) {
    for (const auto& in : t.inputs) {
        auto it = b.find(in.name);
        if (it == b.end())
            throw ExecError("input '" + in.name + "' unbound");
        const Value& v = it->second;
        if (!v.matches(in.type))
            throw ExecError("input '" + in.name + "' has shape " + to_string(v.type()) +
                            ", expected " + to_string(in.type));
        if (v.is_scalar())
            slots[in.slots[0]] = v.scalar();
        else
            for (size_t k = 0; k < in.slots.size(); ++k)
                slots[in.slots[k]] = v.elems[k];
    }
}

// Writes the k-th output into an existing Value without allocating when the
// shape already matches.
inline void extract_output(const Tape& t, size_t k, std::span<const double> slots, Value& out) {
    const IoSlots& o = t.outputs[k];
    switch (o.type.kind) {
    case SemType::Kind::Bool:
        out.tag = Value::Tag::Bool;
        out.b = slots[o.slots[0]] != 0.0;
        break;
    case SemType::Kind::Int:
        out.tag = Value::Tag::Int;
        out.i = static_cast<std::int64_t>(slots[o.slots[0]]);
        break;
    case SemType::Kind::Real:
        out.tag = Value::Tag::Real;
        out.r = slots[o.slots[0]];
        break;
    case SemType::Kind::Vector:
    case SemType::Kind::Matrix:
        out.tag = o.type.kind == SemType::Kind::Vector ? Value::Tag::Vector : Value::Tag::Matrix;
        out.rows = o.type.rows;
        out.cols = o.type.kind == SemType::Kind::Matrix ? o.type.cols : 0;
        out.elems.resize(o.slots.size());
        for (size_t i = 0; i < o.slots.size(); ++i)
            out.elems[i] = slots[o.slots[i]];
        break;
    default:
        throw ExecError("internal: function-typed output");
    }
}

// Full evaluation: marshal bindings, run, extract. With a reused scratch
// buffer and output vector the steady state performs no allocation.
inline void eval_tape(const Tape& t, const Bindings& b, std::vector<double>& scratch,
                      std::vector<Value>& outputs, bool check_finite = false) {
    scratch.resize(t.slot_count);
    outputs.resize(t.outputs.size());
    bind_inputs(t, b, scratch);
    run_tape(t, scratch);
    for (size_t k = 0; k < t.outputs.size(); ++k)
        extract_output(t, k, scratch, outputs[k]);
    if (check_finite) {
        for (const auto& v : outputs) {
            bool ok = true;
            if (v.tag == Value::Tag::Real)
                ok = std::isfinite(v.r);
            else if (v.tag == Value::Tag::Vector || v.tag == Value::Tag::Matrix)
                for (double x : v.elems)
                    ok = ok && std::isfinite(x);
            if (!ok)
                throw ExecError("non-finite result detected");
        }
    }
}

inline std::vector<Value> eval_tape(const Tape& t, const Bindings& b) {
    std::vector<double> scratch;
    std::vector<Value> outputs;
    eval_tape(t, b, scratch, outputs);
    return outputs;
}

// ---------------------------------------------------------------------------
// Naive tree-walking evaluator: the differential-testing oracle for the
// compiled path. Same broadcast/matrix semantics as typecheck, same
// accumulation order as the lowered tape, and the same adjugate sequence
// for inverses.

namespace detail {

class AstEvaluator {
public:
    AstEvaluator(const Bindings& bindings, const TypeEnv* env)
        : root_bindings_(bindings), env_(env) {}

    Value eval(const TypedExpr& e) { return eval_in(e, root_bindings_); }

private:
    const Bindings& root_bindings_;
    const TypeEnv* env_;

    static Value make_result_scalar(const SemType& t, double r) {
        switch (t.kind) {
        case SemType::Kind::Bool: return Value::boolean(r != 0.0);
        case SemType::Kind::Int: return Value::integer(static_cast<std::int64_t>(r));
        default: return Value::real(r);
        }
    }

    static Value shaped_like(const SemType& t) {
        if (t.kind == SemType::Kind::Vector)
            return Value::vector(std::vector<double>(t.rows, 0.0));
        return Value::matrix(t.rows, t.cols, std::vector<double>(t.rows * t.cols, 0.0));
    }

    Value eval_in(const TypedExpr& e, const Bindings& scope) {
        switch (e.kind) {
        case ExprKind::RealLit:
            return Value::real(e.real_value);
        case ExprKind::IntLit:
            return Value::integer(e.int_value);
        case ExprKind::BoolLit:
            return Value::boolean(e.bool_value);

        case ExprKind::Var: {
            auto it = scope.find(e.name);
            if (it == scope.end())
                throw ExecError("input '" + e.name + "' unbound");
            return it->second;
        }

        case ExprKind::Neg: {
            Value u = eval_in(*e.children[0], scope);
            if (u.is_scalar())
                return make_result_scalar(e.type, -u.scalar());
            for (double& x : u.elems)
                x = -x;
            return u;
        }

        case ExprKind::Add:
        case ExprKind::Sub:
        case ExprKind::Mul:
        case ExprKind::Div:
            return eval_arith(e, scope);

        case ExprKind::Pow: {
            Value base = eval_in(*e.children[0], scope);
            const std::int64_t k = e.children[1]->int_value;
            const double x = base.scalar();
            double acc = 1.0;
            for (std::int64_t i = 0; i < k; ++i)
                acc = i == 0 ? x : acc * x;
            return make_result_scalar(e.type, acc);
        }

        case ExprKind::Lt:
        case ExprKind::Le:
        case ExprKind::Eq:
        case ExprKind::Ne:
        case ExprKind::Ge:
        case ExprKind::Gt: {
            Value a = eval_in(*e.children[0], scope);
            Value b = eval_in(*e.children[1], scope);
            const double x = a.scalar();
            const double y = b.scalar();
            bool r = false;
            switch (e.kind) {
            case ExprKind::Lt: r = x < y; break;
            case ExprKind::Le: r = x <= y; break;
            case ExprKind::Eq: r = x == y; break;
            case ExprKind::Ne: r = x != y; break;
            case ExprKind::Ge: r = x >= y; break;
            default: r = x > y; break;
            }
            return Value::boolean(r);
        }

        case ExprKind::And:
        case ExprKind::Or: {
            Value a = eval_in(*e.children[0], scope);
            Value b = eval_in(*e.children[1], scope);
            return Value::boolean(e.kind == ExprKind::And ? (a.b && b.b) : (a.b || b.b));
        }

        case ExprKind::Not:
            return Value::boolean(!eval_in(*e.children[0], scope).b);

        case ExprKind::Call:
            return eval_call(e, scope);

        case ExprKind::Transpose: {
            Value u = eval_in(*e.children[0], scope);
            Value out = shaped_like(e.type);
            const int m = e.type.rows;
            const int n = e.type.cols;
            if (u.tag == Value::Tag::Vector)
                out.elems = u.elems;
            else
                for (int r = 0; r < m; ++r)
                    for (int c = 0; c < n; ++c)
                        out.elems[r * n + c] = u.elems[c * m + r];
            return out;
        }

        case ExprKind::Inverse: {
            Value u = eval_in(*e.children[0], scope);
            const int n = e.type.rows;
            DoubleOps ops;
            AdjugateInverse<DoubleOps> adj{ops};
            double det = 0.0;
            std::vector<double> inv = adj.inverse(u.elems, n, det);
            double max_abs = 0.0;
            for (double x : u.elems)
                max_abs = std::fmax(max_abs, std::fabs(x));
            check_singularity(det, max_abs);
            return Value::matrix(n, n, std::move(inv));
        }

        case ExprKind::Cross: {
            Value a = eval_in(*e.children[0], scope);
            Value b = eval_in(*e.children[1], scope);
            const auto& x = a.elems;
            const auto& y = b.elems;
            return Value::vector({x[1] * y[2] - x[2] * y[1], x[2] * y[0] - x[0] * y[2],
                                  x[0] * y[1] - x[1] * y[0]});
        }

        case ExprKind::Sum: {
            Value u = eval_in(*e.children[0], scope);
            double acc = u.elems[0];
            for (size_t k = 1; k < u.elems.size(); ++k)
                acc = acc + u.elems[k];
            return Value::real(acc);
        }

        case ExprKind::Select: {
            // All three children evaluate, exactly like the lowered tape.
            Value c = eval_in(*e.children[0], scope);
            Value a = eval_in(*e.children[1], scope);
            Value b = eval_in(*e.children[2], scope);
            Value& chosen = c.b ? a : b;
            if (chosen.is_scalar())
                return make_result_scalar(e.type, chosen.scalar());
            return chosen;
        }

        case ExprKind::Delta:
            // Pointwise value of the delta distribution: zero everywhere;
            // its analytic content surfaces via detect_discontinuity.
            eval_in(*e.children[0], scope);
            return Value::real(0.0);

        case ExprKind::Deriv:
            throw CompileError("internal: derivative node reached evaluation", e.span);
        }
        throw CompileError("internal: unhandled node in evaluation", e.span);
    }

    Value eval_arith(const TypedExpr& e, const Bindings& scope) {
        const TypedExpr& le = *e.children[0];
        const TypedExpr& re = *e.children[1];
        Value a = eval_in(le, scope);
        Value b = eval_in(re, scope);
        Opcode op = Opcode::Add;
        switch (e.kind) {
        case ExprKind::Add: op = Opcode::Add; break;
        case ExprKind::Sub: op = Opcode::Sub; break;
        case ExprKind::Mul: op = Opcode::Mul; break;
        default: op = Opcode::Div; break;
        }

        if (a.is_scalar() && b.is_scalar())
            return make_result_scalar(e.type, apply_op(op, a.scalar(), b.scalar()));

        if (a.is_scalar() || b.is_scalar()) {
            const bool left_scalar = a.is_scalar();
            const Value& shaped = left_scalar ? b : a;
            const double s = left_scalar ? a.scalar() : b.scalar();
            Value out = shaped_like(e.type);
            for (size_t k = 0; k < shaped.elems.size(); ++k)
                out.elems[k] =
                    left_scalar ? apply_op(op, s, shaped.elems[k]) : apply_op(op, shaped.elems[k], s);
            return out;
        }

        if (e.kind == ExprKind::Add || e.kind == ExprKind::Sub) {
            Value out = shaped_like(e.type);
            for (size_t k = 0; k < a.elems.size(); ++k)
                out.elems[k] = apply_op(op, a.elems[k], b.elems[k]);
            return out;
        }

        // matrix product, vectors lifted to columns; accumulation is
        // left-to-right to match the unrolled add chain
        const bool lv = le.type.kind == SemType::Kind::Vector;
        const bool rv = re.type.kind == SemType::Kind::Vector;
        const int m = le.type.rows;
        const int kk = lv ? 1 : le.type.cols;
        const int n = rv ? 1 : re.type.cols;
        Value out = shaped_like(e.type);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int l = 0; l < kk; ++l) {
                    const double term =
                        a.elems[lv ? i : i * kk + l] * b.elems[rv ? l : l * n + j];
                    acc = l == 0 ? term : acc + term;
                }
                out.elems[i * n + j] = acc;
            }
        }
        return out;
    }

    Value eval_call(const TypedExpr& e, const Bindings& scope) {
        UnaryBuiltin ub;
        if (lookup_unary_builtin(e.name, ub)) {
            const Opcode op = [&] {
                switch (ub) {
                case UnaryBuiltin::Sin: return Opcode::Sin;
                case UnaryBuiltin::Cos: return Opcode::Cos;
                case UnaryBuiltin::Tan: return Opcode::Tan;
                case UnaryBuiltin::Exp: return Opcode::Exp;
                case UnaryBuiltin::Log: return Opcode::Log;
                case UnaryBuiltin::Sqrt: return Opcode::Sqrt;
                default: return Opcode::Abs;
                }
            }();
            Value u = eval_in(*e.children[0], scope);
            if (e.type.is_scalar()) // includes a demoted 1x1 operand
                return Value::real(apply_op(op, u.scalar()));
            for (double& x : u.elems)
                x = apply_op(op, x);
            return u;
        }
        if (e.name == "min" || e.name == "max") {
            Value a = eval_in(*e.children[0], scope);
            Value b = eval_in(*e.children[1], scope);
            const Opcode op = e.name == "min" ? Opcode::Min : Opcode::Max;
            return make_result_scalar(e.type, apply_op(op, a.scalar(), b.scalar()));
        }

        // Call to a defined function: evaluate arguments in the caller's
        // scope, then the body under inputs + formals.
        if (!env_)
            throw CompileError("internal: def call evaluated without an environment", e.span);
        auto it = env_->defs.find(e.name);
        if (it == env_->defs.end())
            throw CompileError("internal: unknown function '" + e.name + "' in evaluation",
                               e.span);
        const FunctionDef& def = *it->second;
        Bindings body_scope = root_bindings_;
        for (size_t i = 0; i < def.params.size(); ++i)
            body_scope[def.params[i].name] = eval_in(*e.children[i], scope);
        TypedExprPtr body = infer(*def.body, env_->scope_for(def));
        return eval_in(*body, body_scope);
    }
};

} // namespace detail

// Direct recursive evaluation of a typed expression. `env` is only needed
// when the tree still contains calls to defined functions.
inline Value eval_ast(const TypedExpr& e, const Bindings& b, const TypeEnv* env = nullptr) {
    detail::AstEvaluator ev(b, env);
    return ev.eval(e);
}

inline Value eval_ast(const TypedExprPtr& e, const Bindings& b, const TypeEnv* env = nullptr) {
    return eval_ast(*e, b, env);
}

} // namespace flc
