#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "flc/numfmt.hpp"
#include "flc/tape.hpp"

namespace flc {
namespace detail {

// C-style precedence for the listing printer.
inline int emit_prec(Opcode op) {
    switch (op) {
    case Opcode::Select: return 1;
    case Opcode::Or: return 2;
    case Opcode::And: return 3;
    case Opcode::CmpEq:
    case Opcode::CmpNe: return 4;
    case Opcode::CmpLt:
    case Opcode::CmpLe:
    case Opcode::CmpGe:
    case Opcode::CmpGt: return 5;
    case Opcode::Add:
    case Opcode::Sub: return 6;
    case Opcode::Mul:
    case Opcode::Div: return 7;
    case Opcode::Neg:
    case Opcode::Not: return 8;
    default: return 9; // calls and atoms
    }
}

inline const char* emit_infix(Opcode op) {
    switch (op) {
    case Opcode::Add: return " + ";
    case Opcode::Sub: return " - ";
    case Opcode::Mul: return " * ";
    case Opcode::Div: return " / ";
    case Opcode::CmpLt: return " < ";
    case Opcode::CmpLe: return " <= ";
    case Opcode::CmpEq: return " == ";
    case Opcode::CmpNe: return " != ";
    case Opcode::CmpGe: return " >= ";
    case Opcode::CmpGt: return " > ";
    case Opcode::And: return " && ";
    case Opcode::Or: return " || ";
    default: return nullptr;
    }
}

inline const char* emit_call_name(Opcode op) {
    switch (op) {
    case Opcode::Min: return "fmin";
    case Opcode::Max: return "fmax";
    case Opcode::Sin: return "sin";
    case Opcode::Cos: return "cos";
    case Opcode::Tan: return "tan";
    case Opcode::Exp: return "exp";
    case Opcode::Log: return "log";
    case Opcode::Sqrt: return "sqrt";
    case Opcode::Abs: return "fabs";
    case Opcode::Sign: return "sign";
    default: return nullptr;
    }
}

// Subscripted element name: var_3, var_3[2], var_3[1, 0].
inline std::string element_name(int var_index, const SemType& t, int elem) {
    std::string base = "var_" + std::to_string(var_index);
    switch (t.kind) {
    case SemType::Kind::Vector:
        return base + "[" + std::to_string(elem) + "]";
    case SemType::Kind::Matrix:
        return base + "[" + std::to_string(elem / t.cols) + ", " +
               std::to_string(elem % t.cols) + "]";
    default:
        return base;
    }
}

class SourceEmitter {
public:
    explicit SourceEmitter(const Tape& t) : t_(t) {
        instr_of_slot_.assign(t.slot_count, -1);
        for (size_t i = 0; i < t.instrs.size(); ++i)
            instr_of_slot_[t.instrs[i].dst] = static_cast<int>(i);
        const_of_slot_.assign(t.slot_count, -1);
        for (size_t i = 0; i < t.constants.size(); ++i)
            const_of_slot_[t.constants[i].slot] = static_cast<int>(i);

        // A destination used exactly once by a later instruction and never
        // by an output inlines into its consumer.
        instr_uses_.assign(t.slot_count, 0);
        for (const auto& ins : t.instrs)
            if (ins.op != Opcode::LoadConst)
                for (int k = 0; k < opcode_arity(ins.op); ++k)
                    ++instr_uses_[ins.operand(k)];
        output_refs_.assign(t.slot_count, 0);
        for (const auto& out : t.outputs)
            for (int s : out.slots)
                ++output_refs_[s];

        int var_index = 0;
        slot_name_.assign(t.slot_count, std::string());
        for (const auto& in : t.inputs) {
            for (size_t k = 0; k < in.slots.size(); ++k)
                slot_name_[in.slots[k]] = element_name(var_index, in.type, static_cast<int>(k));
            ++var_index;
        }
        // Outputs get their numbers next, whether the slot is an
        // instruction result or an alias of something else.
        out_elem_name_.resize(t.outputs.size());
        for (size_t o = 0; o < t.outputs.size(); ++o) {
            const IoSlots& out = t.outputs[o];
            out_elem_name_[o].resize(out.slots.size());
            for (size_t k = 0; k < out.slots.size(); ++k) {
                std::string name = element_name(var_index, out.type, static_cast<int>(k));
                out_elem_name_[o][k] = name;
                const int s = out.slots[k];
                // First output referencing an instruction result names it.
                if (instr_of_slot_[s] >= 0 && slot_name_[s].empty())
                    slot_name_[s] = name;
            }
            ++var_index;
        }
        next_var_ = var_index;
    }

    std::string emit() {
        std::string out;
        for (size_t i = 0; i < t_.instrs.size(); ++i) {
            const Instr& ins = t_.instrs[i];
            if (inlined(ins.dst))
                continue;
            std::string& name = slot_name_[ins.dst];
            if (name.empty())
                name = "var_" + std::to_string(next_var_++);
            out += name + " = " + render_instr(ins, 0) + ";\n";
        }
        // Remaining output elements alias inputs, constants, or results
        // already named by an earlier output.
        for (size_t o = 0; o < t_.outputs.size(); ++o) {
            const IoSlots& io = t_.outputs[o];
            for (size_t k = 0; k < io.slots.size(); ++k) {
                const std::string& name = out_elem_name_[o][k];
                const int s = io.slots[k];
                if (slot_name_[s] == name)
                    continue; // defined by its own instruction line
                out += name + " = " + render_slot(s, 0) + ";\n";
            }
        }
        return out;
    }

private:
    const Tape& t_;
    std::vector<int> instr_of_slot_;
    std::vector<int> const_of_slot_;
    std::vector<int> instr_uses_;
    std::vector<int> output_refs_;
    std::vector<std::string> slot_name_;
    std::vector<std::vector<std::string>> out_elem_name_;
    int next_var_ = 0;

    bool inlined(int slot) const {
        const int idx = instr_of_slot_[slot];
        if (idx < 0)
            return false;
        if (t_.instrs[idx].op == Opcode::LoadConst)
            return false;
        return instr_uses_[slot] == 1 && output_refs_[slot] == 0;
    }

    std::string render_const(double v, int min_prec) const {
        std::string s = format_double(v);
        if (v < 0 && min_prec > 8)
            return "(" + s + ")";
        return s;
    }

    std::string render_slot(int slot, int min_prec) const {
        if (!slot_name_[slot].empty())
            return slot_name_[slot];
        if (const_of_slot_[slot] >= 0)
            return render_const(t_.constants[const_of_slot_[slot]].value, min_prec);
        const int idx = instr_of_slot_[slot];
        if (idx >= 0)
            return render_parenthesized(t_.instrs[idx], min_prec);
        return "slot_" + std::to_string(slot); // unreachable on well-formed tapes
    }

    std::string render_parenthesized(const Instr& ins, int min_prec) const {
        const int prec = emit_prec(ins.op);
        if (prec < min_prec)
            return "(" + render_instr(ins, 0) + ")";
        return render_instr(ins, min_prec);
    }

    std::string render_instr(const Instr& ins, int min_prec) const {
        const int prec = emit_prec(ins.op);
        if (emit_infix(ins.op) != nullptr) {
            // Flatten the left spine so long unrolled chains (sums, dot
            // products) print as one flat expression without deep recursion.
            std::vector<std::pair<Opcode, int>> chain; // (op, right operand)
            int left = ins.a;
            {
                const Instr* cur = &ins;
                for (;;) {
                    chain.emplace_back(cur->op, cur->b);
                    const int ls = cur->a;
                    const int li = instr_of_slot_[ls];
                    if (li < 0 || !inlined(ls))
                        break;
                    const Instr& lins = t_.instrs[li];
                    if (!emit_infix(lins.op) || emit_prec(lins.op) != prec)
                        break;
                    cur = &lins;
                }
                left = cur->a;
            }
            std::string s = render_slot(left, prec);
            for (size_t i = chain.size(); i-- > 0;)
                s += std::string(emit_infix(chain[i].first)) +
                     render_slot(chain[i].second, prec + 1);
            if (prec < min_prec)
                return "(" + s + ")";
            return s;
        }
        switch (ins.op) {
        case Opcode::Neg: {
            std::string s = "-" + render_slot(ins.a, 9);
            return prec < min_prec ? "(" + s + ")" : s;
        }
        case Opcode::Not: {
            std::string s = "!" + render_slot(ins.a, 9);
            return prec < min_prec ? "(" + s + ")" : s;
        }
        case Opcode::Select: {
            std::string s = render_slot(ins.a, 2) + " ? " + render_slot(ins.b, 2) + " : " +
                            render_slot(ins.c, 1);
            return prec < min_prec ? "(" + s + ")" : s;
        }
        case Opcode::Copy:
            return render_slot(ins.a, min_prec);
        case Opcode::LoadConst:
            return render_const(t_.constants[ins.a].value, min_prec);
        default: {
            const char* fn = emit_call_name(ins.op);
            std::string s = std::string(fn) + "(" + render_slot(ins.a, 0);
            if (opcode_arity(ins.op) >= 2)
                s += ", " + render_slot(ins.b, 0);
            s += ")";
            return s;
        }
        }
    }
};

} // namespace detail

// Human-readable straight-line listing in the var_N style: one assignment
// per surviving instruction, single-use temporaries fused into their
// consumer, no loops, no branches, no function definitions.
inline std::string emit_source(const Tape& t) {
    detail::SourceEmitter emitter(t);
    return emitter.emit();
}

} // namespace flc
