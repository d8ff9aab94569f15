#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "flc/diagnostics.hpp"
#include "flc/inverse.hpp"
#include "flc/project.hpp"
#include "flc/tape.hpp"
#include "flc/typecheck.hpp"

namespace flc {

// Hard cap on generated instructions. Full unrolling is the whole point,
// but a runaway project should fail loudly instead of eating memory.
inline constexpr size_t unroll_budget = 1'000'000;

class TapeBuilder {
public:
    explicit TapeBuilder(const std::vector<InputDecl>& inputs) {
        for (const auto& in : inputs) {
            IoSlots io;
            io.name = in.name;
            io.type = in.type;
            const int count = in.type.element_count();
            io.slots.resize(count);
            for (int k = 0; k < count; ++k)
                io.slots[k] = next_slot_++;
            tape_.inputs.push_back(std::move(io));
        }
    }

    int const_slot(double v) {
        const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
        auto it = const_slots_.find(bits);
        if (it != const_slots_.end())
            return it->second;
        const int slot = next_slot_++;
        tape_.constants.push_back({slot, v});
        const_slots_.emplace(bits, slot);
        return slot;
    }

    int emit(Opcode op, int a = -1, int b = -1, int c = -1) {
        if (tape_.instrs.size() >= unroll_budget)
            throw CompileError("unroll budget exceeded (" + std::to_string(unroll_budget) +
                               " instructions)");
        Instr ins;
        ins.dst = next_slot_++;
        ins.op = op;
        ins.a = a;
        ins.b = b;
        ins.c = c;
        tape_.instrs.push_back(ins);
        return ins.dst;
    }

    void add_output(std::string name, SemType type, std::vector<int> slots) {
        tape_.outputs.push_back({std::move(name), std::move(type), std::move(slots)});
    }

    void add_guard(int det_slot, std::vector<int> operand_slots) {
        tape_.guards.push_back({det_slot, std::move(operand_slots)});
    }

    const IoSlots* find_input(const std::string& name) const {
        for (const auto& in : tape_.inputs)
            if (in.name == name)
                return &in;
        return nullptr;
    }

    Tape take() {
        tape_.slot_count = next_slot_;
        build_plan(tape_);
        return std::move(tape_);
    }

    // Scalar algebra over slots, for the shared adjugate emitter.
    struct Ops {
        using value_type = int;
        TapeBuilder& b;
        int add(int x, int y) { return b.emit(Opcode::Add, x, y); }
        int sub(int x, int y) { return b.emit(Opcode::Sub, x, y); }
        int mul(int x, int y) { return b.emit(Opcode::Mul, x, y); }
        int div(int x, int y) { return b.emit(Opcode::Div, x, y); }
        int neg(int x) { return b.emit(Opcode::Neg, x); }
        int one() { return b.const_slot(1.0); }
    };

private:
    Tape tape_;
    std::unordered_map<std::uint64_t, int> const_slots_;
    int next_slot_ = 0;
};

namespace detail {

// Where an expression's value lives: one slot per scalar element,
// row-major. Transposes and variable references are pure views.
struct SlotView {
    SemType type;
    std::vector<int> slots;

    int scalar() const { return slots[0]; }
};

inline Opcode unary_builtin_opcode(UnaryBuiltin b) {
    switch (b) {
    case UnaryBuiltin::Sin: return Opcode::Sin;
    case UnaryBuiltin::Cos: return Opcode::Cos;
    case UnaryBuiltin::Tan: return Opcode::Tan;
    case UnaryBuiltin::Exp: return Opcode::Exp;
    case UnaryBuiltin::Log: return Opcode::Log;
    case UnaryBuiltin::Sqrt: return Opcode::Sqrt;
    case UnaryBuiltin::Abs: return Opcode::Abs;
    }
    return Opcode::Abs;
}

class Lowerer {
public:
    explicit Lowerer(TapeBuilder& b) : b_(b) {}

    SlotView lower(const TypedExpr& e) {
        switch (e.kind) {
        case ExprKind::RealLit:
            return {e.type, {b_.const_slot(e.real_value)}};
        case ExprKind::IntLit:
            return {e.type, {b_.const_slot(static_cast<double>(e.int_value))}};
        case ExprKind::BoolLit:
            return {e.type, {b_.const_slot(e.bool_value ? 1.0 : 0.0)}};

        case ExprKind::Var: {
            const IoSlots* in = b_.find_input(e.name);
            if (!in)
                throw CompileError("internal: variable '" + e.name + "' missing from layout",
                                   e.span);
            return {e.type, in->slots};
        }

        case ExprKind::Neg: {
            SlotView u = lower(*e.children[0]);
            SlotView out{e.type, {}};
            out.slots.reserve(u.slots.size());
            for (int s : u.slots)
                out.slots.push_back(b_.emit(Opcode::Neg, s));
            return out;
        }

        case ExprKind::Add:
        case ExprKind::Sub:
        case ExprKind::Mul:
        case ExprKind::Div:
            return lower_arith(e);

        case ExprKind::Pow: {
            SlotView base = lower(*e.children[0]);
            const std::int64_t k = e.children[1]->int_value;
            if (k == 0)
                return {e.type, {b_.const_slot(1.0)}};
            int acc = base.scalar();
            for (std::int64_t i = 1; i < k; ++i)
                acc = b_.emit(Opcode::Mul, acc, base.scalar());
            return {e.type, {acc}};
        }

        case ExprKind::Lt:
        case ExprKind::Le:
        case ExprKind::Eq:
        case ExprKind::Ne:
        case ExprKind::Ge:
        case ExprKind::Gt: {
            SlotView a = lower(*e.children[0]);
            SlotView b = lower(*e.children[1]);
            Opcode op = Opcode::CmpLt;
            switch (e.kind) {
            case ExprKind::Lt: op = Opcode::CmpLt; break;
            case ExprKind::Le: op = Opcode::CmpLe; break;
            case ExprKind::Eq: op = Opcode::CmpEq; break;
            case ExprKind::Ne: op = Opcode::CmpNe; break;
            case ExprKind::Ge: op = Opcode::CmpGe; break;
            default: op = Opcode::CmpGt; break;
            }
            return {e.type, {b_.emit(op, a.scalar(), b.scalar())}};
        }

        case ExprKind::And:
        case ExprKind::Or: {
            SlotView a = lower(*e.children[0]);
            SlotView b = lower(*e.children[1]);
            return {e.type,
                    {b_.emit(e.kind == ExprKind::And ? Opcode::And : Opcode::Or, a.scalar(),
                             b.scalar())}};
        }

        case ExprKind::Not: {
            SlotView a = lower(*e.children[0]);
            return {e.type, {b_.emit(Opcode::Not, a.scalar())}};
        }

        case ExprKind::Call: {
            UnaryBuiltin ub;
            if (lookup_unary_builtin(e.name, ub)) {
                SlotView u = lower(*e.children[0]);
                const Opcode op = unary_builtin_opcode(ub);
                SlotView out{e.type, {}};
                out.slots.reserve(u.slots.size());
                for (int s : u.slots)
                    out.slots.push_back(b_.emit(op, s));
                return out;
            }
            if (e.name == "min" || e.name == "max") {
                SlotView a = lower(*e.children[0]);
                SlotView b = lower(*e.children[1]);
                return {e.type,
                        {b_.emit(e.name == "min" ? Opcode::Min : Opcode::Max, a.scalar(),
                                 b.scalar())}};
            }
            throw CompileError("internal: call to '" + e.name + "' reached lowering", e.span);
        }

        case ExprKind::Transpose: {
            SlotView u = lower(*e.children[0]);
            SlotView out{e.type, {}};
            const int m = e.type.rows; // result rows
            const int n = e.type.cols; // result cols
            out.slots.resize(m * n);
            if (u.type.kind == SemType::Kind::Vector) {
                out.slots = u.slots; // column to row: same element order
            } else {
                for (int r = 0; r < m; ++r)
                    for (int c = 0; c < n; ++c)
                        out.slots[r * n + c] = u.slots[c * m + r];
            }
            return out;
        }

        case ExprKind::Inverse: {
            SlotView u = lower(*e.children[0]);
            const int n = e.type.rows;
            TapeBuilder::Ops ops{b_};
            AdjugateInverse<TapeBuilder::Ops> adj{ops};
            int det_slot = -1;
            std::vector<int> inv = adj.inverse(u.slots, n, det_slot);
            b_.add_guard(det_slot, u.slots);
            return {e.type, std::move(inv)};
        }

        case ExprKind::Cross: {
            SlotView a = lower(*e.children[0]);
            SlotView b = lower(*e.children[1]);
            auto term = [&](int i, int j) { return b_.emit(Opcode::Mul, a.slots[i], b.slots[j]); };
            SlotView out{e.type, {}};
            out.slots.push_back(b_.emit(Opcode::Sub, term(1, 2), term(2, 1)));
            out.slots.push_back(b_.emit(Opcode::Sub, term(2, 0), term(0, 2)));
            out.slots.push_back(b_.emit(Opcode::Sub, term(0, 1), term(1, 0)));
            return out;
        }

        case ExprKind::Sum: {
            SlotView u = lower(*e.children[0]);
            int acc = u.slots[0];
            for (size_t k = 1; k < u.slots.size(); ++k)
                acc = b_.emit(Opcode::Add, acc, u.slots[k]);
            return {e.type, {acc}};
        }

        case ExprKind::Select: {
            SlotView cond = lower(*e.children[0]);
            SlotView a = lower(*e.children[1]);
            SlotView b = lower(*e.children[2]);
            SlotView out{e.type, {}};
            out.slots.reserve(a.slots.size());
            for (size_t k = 0; k < a.slots.size(); ++k)
                out.slots.push_back(b_.emit(Opcode::Select, cond.scalar(), a.slots[k], b.slots[k]));
            return out;
        }

        case ExprKind::Delta:
        case ExprKind::Deriv:
            throw CompileError(std::string("internal: ") +
                                   (e.kind == ExprKind::Delta ? "delta" : "derivative") +
                                   " node reached lowering; the pipeline must resolve it first",
                               e.span);
        }
        throw CompileError("internal: unhandled node in lowering", e.span);
    }

private:
    TapeBuilder& b_;

    // Cross products aside, every binary arithmetic node is one of: scalar
    // op scalar, a scalar broadcast, an elementwise same-shape add/sub, or
    // an unrolled matrix product.
    SlotView lower_arith(const TypedExpr& e) {
        const TypedExpr& lhs = *e.children[0];
        const TypedExpr& rhs = *e.children[1];
        SlotView a = lower(lhs);
        SlotView b = lower(rhs);
        Opcode op = Opcode::Add;
        switch (e.kind) {
        case ExprKind::Add: op = Opcode::Add; break;
        case ExprKind::Sub: op = Opcode::Sub; break;
        case ExprKind::Mul: op = Opcode::Mul; break;
        default: op = Opcode::Div; break;
        }

        // scalar op scalar
        if (a.type.is_scalar() && b.type.is_scalar())
            return {e.type, {b_.emit(op, a.scalar(), b.scalar())}};

        // scalar broadcast, either side
        if (a.type.is_scalar() || b.type.is_scalar()) {
            const bool left_scalar = a.type.is_scalar();
            // A matrix product with a scalar operand is still a broadcast.
            const SlotView& shaped = left_scalar ? b : a;
            SlotView out{e.type, {}};
            out.slots.reserve(shaped.slots.size());
            for (int s : shaped.slots)
                out.slots.push_back(left_scalar ? b_.emit(op, a.scalar(), s)
                                                : b_.emit(op, s, b.scalar()));
            return out;
        }

        // elementwise add/sub of equal shapes
        if (e.kind == ExprKind::Add || e.kind == ExprKind::Sub) {
            SlotView out{e.type, {}};
            out.slots.reserve(a.slots.size());
            for (size_t k = 0; k < a.slots.size(); ++k)
                out.slots.push_back(b_.emit(op, a.slots[k], b.slots[k]));
            return out;
        }

        // matrix product; vectors lift to column matrices
        const bool lv = lhs.type.kind == SemType::Kind::Vector;
        const bool rv = rhs.type.kind == SemType::Kind::Vector;
        const int m = lhs.type.rows;
        const int kk = lv ? 1 : lhs.type.cols;
        const int n = rv ? 1 : rhs.type.cols;
        auto left_at = [&](int i, int l) { return a.slots[lv ? i : i * kk + l]; };
        auto right_at = [&](int l, int j) { return b.slots[rv ? l : l * n + j]; };

        SlotView out{e.type, {}};
        out.slots.resize(m * n);
        std::vector<int> products(kk);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                for (int l = 0; l < kk; ++l)
                    products[l] = b_.emit(Opcode::Mul, left_at(i, l), right_at(l, j));
                int acc = products[0];
                for (int l = 1; l < kk; ++l)
                    acc = b_.emit(Opcode::Add, acc, products[l]);
                out.slots[i * n + j] = acc;
            }
        }
        return out;
    }
};

} // namespace detail

// Lower one typed expression over the given input layout into a fresh
// (unoptimized) tape with a single output.
inline Tape lower(const TypedExprPtr& e, const std::vector<InputDecl>& inputs,
                  const std::string& output_name = "value") {
    TapeBuilder b(inputs);
    detail::Lowerer lowerer(b);
    detail::SlotView v = lowerer.lower(*e);
    b.add_output(output_name, v.type, v.slots);
    return b.take();
}

// Lower every output of a checked project into one shared tape.
inline Tape lower_outputs(const std::vector<CheckedOutput>& outputs,
                          const std::vector<InputDecl>& inputs) {
    TapeBuilder b(inputs);
    detail::Lowerer lowerer(b);
    for (const auto& out : outputs) {
        detail::SlotView v = lowerer.lower(*out.expr);
        b.add_output(out.name, v.type, v.slots);
    }
    return b.take();
}

} // namespace flc
