#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "flc/diagnostics.hpp"
#include "flc/numfmt.hpp"
#include "flc/types.hpp"

namespace flc {

// Scalar-only instruction set. No opcode encodes control flow; matrix and
// vector structure lives entirely in the slot layouts.
enum class Opcode : std::uint8_t {
    LoadConst, // dst <- constant pool[a]
    Copy,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Min,
    Max,
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Sign,
    Select, // dst <- a != 0 ? b : c
    CmpLt,
    CmpLe,
    CmpEq,
    CmpNe,
    CmpGe,
    CmpGt,
    And,
    Or,
    Not,
};

inline int opcode_arity(Opcode op) {
    switch (op) {
    case Opcode::LoadConst:
    case Opcode::Copy:
    case Opcode::Neg:
    case Opcode::Sin:
    case Opcode::Cos:
    case Opcode::Tan:
    case Opcode::Exp:
    case Opcode::Log:
    case Opcode::Sqrt:
    case Opcode::Abs:
    case Opcode::Sign:
    case Opcode::Not:
        return 1;
    case Opcode::Select:
        return 3;
    default:
        return 2;
    }
}

inline const char* opcode_name(Opcode op) {
    switch (op) {
    case Opcode::LoadConst: return "ldc";
    case Opcode::Copy: return "copy";
    case Opcode::Add: return "add";
    case Opcode::Sub: return "sub";
    case Opcode::Mul: return "mul";
    case Opcode::Div: return "div";
    case Opcode::Neg: return "neg";
    case Opcode::Min: return "min";
    case Opcode::Max: return "max";
    case Opcode::Sin: return "sin";
    case Opcode::Cos: return "cos";
    case Opcode::Tan: return "tan";
    case Opcode::Exp: return "exp";
    case Opcode::Log: return "log";
    case Opcode::Sqrt: return "sqrt";
    case Opcode::Abs: return "abs";
    case Opcode::Sign: return "sign";
    case Opcode::Select: return "select";
    case Opcode::CmpLt: return "lt";
    case Opcode::CmpLe: return "le";
    case Opcode::CmpEq: return "eq";
    case Opcode::CmpNe: return "ne";
    case Opcode::CmpGe: return "ge";
    case Opcode::CmpGt: return "gt";
    case Opcode::And: return "and";
    case Opcode::Or: return "or";
    case Opcode::Not: return "not";
    }
    return "?";
}

// Operand order is value-irrelevant for these; the optimizer may treat
// them symmetrically when numbering values.
inline bool opcode_commutative(Opcode op) {
    switch (op) {
    case Opcode::Add:
    case Opcode::Mul:
    case Opcode::Min:
    case Opcode::Max:
    case Opcode::And:
    case Opcode::Or:
    case Opcode::CmpEq:
    case Opcode::CmpNe:
        return true;
    default:
        return false;
    }
}

// The single scalar step shared by the interpreter and the constant folder,
// so folding reproduces execution bit for bit.
inline double apply_op(Opcode op, double a, double b = 0.0, double c = 0.0) {
    switch (op) {
    case Opcode::Copy: return a;
    case Opcode::Add: return a + b;
    case Opcode::Sub: return a - b;
    case Opcode::Mul: return a * b;
    case Opcode::Div: return a / b;
    case Opcode::Neg: return -a;
    case Opcode::Min: return std::fmin(a, b);
    case Opcode::Max: return std::fmax(a, b);
    case Opcode::Sin: return std::sin(a);
    case Opcode::Cos: return std::cos(a);
    case Opcode::Tan: return std::tan(a);
    case Opcode::Exp: return std::exp(a);
    case Opcode::Log: return std::log(a);
    case Opcode::Sqrt: return std::sqrt(a);
    case Opcode::Abs: return std::fabs(a);
    case Opcode::Sign: return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
    case Opcode::Select: return a != 0.0 ? b : c;
    case Opcode::CmpLt: return a < b ? 1.0 : 0.0;
    case Opcode::CmpLe: return a <= b ? 1.0 : 0.0;
    case Opcode::CmpEq: return a == b ? 1.0 : 0.0;
    case Opcode::CmpNe: return a != b ? 1.0 : 0.0;
    case Opcode::CmpGe: return a >= b ? 1.0 : 0.0;
    case Opcode::CmpGt: return a > b ? 1.0 : 0.0;
    case Opcode::And: return (a != 0.0 && b != 0.0) ? 1.0 : 0.0;
    case Opcode::Or: return (a != 0.0 || b != 0.0) ? 1.0 : 0.0;
    case Opcode::Not: return a == 0.0 ? 1.0 : 0.0;
    case Opcode::LoadConst: break; // needs the pool; handled by the caller
    }
    return 0.0;
}

struct Instr {
    int dst = -1;
    Opcode op = Opcode::Copy;
    int a = -1;
    int b = -1;
    int c = -1;

    int operand(int k) const { return k == 0 ? a : (k == 1 ? b : c); }
    int& operand(int k) { return k == 0 ? a : (k == 1 ? b : c); }
};

// Named slot group for one input or output. Inputs occupy a contiguous
// ascending row-major range; output elements may point anywhere (a
// transpose output is just a permuted view of its operand's slots).
struct IoSlots {
    std::string name;
    SemType type;
    std::vector<int> slots; // element_count entries, row-major
};

struct TapeConst {
    int slot;
    double value;
};

// A straight-line program over a flat slot file: no loops, no branches,
// no calls, each slot written at most once.
struct Tape {
    int slot_count = 0;
    std::vector<IoSlots> inputs;
    std::vector<IoSlots> outputs;
    std::vector<TapeConst> constants;
    std::vector<Instr> instrs;

    // Post-hoc singularity checks: after a run, |slots[det_slot]| is
    // compared against a threshold scaled by the inverted operand's
    // largest element.
    struct InverseGuard {
        int det_slot;
        std::vector<int> operand_slots;
    };
    std::vector<InverseGuard> guards;

    // Interpreter execution plan: mul/add chains (dot products, sums) fused
    // into single kernels so dispatch cost stops dominating. Derived purely
    // from the instruction list by build_plan; the per-step arithmetic and
    // its order are unchanged, so results stay bitwise identical. Not part
    // of the serialized form.
    struct PlanOp {
        enum class Kind : std::uint8_t { Instr, Chain };
        Kind kind;
        int index;      // Instr: instruction index
        int dst;        // Chain: destination slot
        int term_begin; // Chain: offset into plan_terms (two ints per term)
        int term_count;
    };
    std::vector<PlanOp> plan;
    std::vector<int> plan_terms; // pairs (a, b); b < 0 means the term is slots[a]

    size_t arith_instruction_count() const {
        size_t n = 0;
        for (const auto& ins : instrs)
            if (ins.op != Opcode::LoadConst && ins.op != Opcode::Copy)
                ++n;
        return n;
    }
};

// Fuse left-leaning add chains whose members are single-use into Chain plan
// ops: dst = t0 + t1 + ..., each term either a slot or a slot product.
// Interior results never escape the chain, so skipping their slot writes is
// unobservable.
inline void build_plan(Tape& t) {
    t.plan.clear();
    t.plan_terms.clear();
    if (t.instrs.empty())
        return;

    std::vector<int> producer(t.slot_count, -1);
    std::vector<int> uses(t.slot_count, 0);
    for (size_t i = 0; i < t.instrs.size(); ++i) {
        const Instr& ins = t.instrs[i];
        producer[ins.dst] = static_cast<int>(i);
        if (ins.op != Opcode::LoadConst)
            for (int k = 0; k < opcode_arity(ins.op); ++k)
                ++uses[ins.operand(k)];
    }
    for (const auto& out : t.outputs)
        for (int s : out.slots)
            ++uses[s];
    for (const auto& g : t.guards) {
        ++uses[g.det_slot];
        for (int s : g.operand_slots)
            ++uses[s];
    }

    std::vector<char> consumed(t.instrs.size(), 0);
    // terminal add index -> (term_begin, term_count)
    std::vector<int> chain_begin(t.instrs.size(), -1);
    std::vector<int> chain_count(t.instrs.size(), 0);

    auto is_chain_link = [&](int slot) {
        const int pi = slot >= 0 && slot < t.slot_count ? producer[slot] : -1;
        return pi >= 0 && t.instrs[pi].op == Opcode::Add && uses[slot] == 1 && !consumed[pi];
    };
    auto mul_term = [&](int slot) -> const Instr* {
        const int pi = slot >= 0 && slot < t.slot_count ? producer[slot] : -1;
        if (pi >= 0 && t.instrs[pi].op == Opcode::Mul && uses[slot] == 1 && !consumed[pi])
            return &t.instrs[pi];
        return nullptr;
    };

    for (size_t i = t.instrs.size(); i-- > 0;) {
        const Instr& ins = t.instrs[i];
        if (ins.op != Opcode::Add || consumed[i])
            continue;
        // Walk down the left spine of single-use adds, collecting the chain
        // without committing anything yet.
        std::vector<int> spine; // interior add instruction indices
        std::vector<int> right_terms;
        int cur = static_cast<int>(i);
        for (;;) {
            right_terms.push_back(t.instrs[cur].b);
            const int left = t.instrs[cur].a;
            if (!is_chain_link(left))
                break;
            cur = producer[left];
            spine.push_back(cur);
        }
        const int bottom_left = t.instrs[cur].a;

        std::vector<int> terms; // flat (a, b) pairs, in evaluation order
        std::vector<int> used_muls;
        auto push_term = [&](int slot) {
            if (const Instr* m = mul_term(slot)) {
                terms.push_back(m->a);
                terms.push_back(m->b);
                used_muls.push_back(producer[slot]);
            } else {
                terms.push_back(slot);
                terms.push_back(-1);
            }
        };
        push_term(bottom_left);
        for (size_t k = right_terms.size(); k-- > 0;)
            push_term(right_terms[k]);

        const int n = static_cast<int>(terms.size() / 2);
        if (n >= 3 || (n == 2 && !used_muls.empty())) {
            chain_begin[i] = static_cast<int>(t.plan_terms.size());
            chain_count[i] = n;
            t.plan_terms.insert(t.plan_terms.end(), terms.begin(), terms.end());
            for (int idx : spine)
                consumed[idx] = 1;
            for (int idx : used_muls)
                consumed[idx] = 1;
        }
    }

    for (size_t i = 0; i < t.instrs.size(); ++i) {
        if (chain_begin[i] >= 0) {
            Tape::PlanOp op;
            op.kind = Tape::PlanOp::Kind::Chain;
            op.index = static_cast<int>(i);
            op.dst = t.instrs[i].dst;
            op.term_begin = chain_begin[i];
            op.term_count = chain_count[i];
            t.plan.push_back(op);
        } else if (!consumed[i]) {
            Tape::PlanOp op;
            op.kind = Tape::PlanOp::Kind::Instr;
            op.index = static_cast<int>(i);
            op.dst = t.instrs[i].dst;
            op.term_begin = 0;
            op.term_count = 0;
            t.plan.push_back(op);
        }
    }
}

// Check single assignment and topological order; throws on violation.
inline void validate_tape(const Tape& t) {
    std::vector<char> written(t.slot_count, 0);
    for (const auto& in : t.inputs)
        for (int s : in.slots) {
            if (s < 0 || s >= t.slot_count)
                throw CompileError("tape: input slot out of range");
            written[s] = 1;
        }
    for (const auto& c : t.constants) {
        if (c.slot < 0 || c.slot >= t.slot_count)
            throw CompileError("tape: constant slot out of range");
        if (written[c.slot])
            throw CompileError("tape: constant slot written twice");
        written[c.slot] = 1;
    }
    for (const auto& ins : t.instrs) {
        if (ins.dst < 0 || ins.dst >= t.slot_count)
            throw CompileError("tape: destination slot out of range");
        if (written[ins.dst])
            throw CompileError("tape: slot " + std::to_string(ins.dst) + " written twice");
        if (ins.op != Opcode::LoadConst) {
            for (int k = 0; k < opcode_arity(ins.op); ++k) {
                const int s = ins.operand(k);
                if (s < 0 || s >= t.slot_count)
                    throw CompileError("tape: operand slot out of range");
                if (!written[s])
                    throw CompileError("tape: slot " + std::to_string(s) +
                                       " read before being written");
            }
        }
        written[ins.dst] = 1;
    }
    for (const auto& out : t.outputs)
        for (int s : out.slots)
            if (s < 0 || s >= t.slot_count || !written[s])
                throw CompileError("tape: output reads an unwritten slot");
}

// ---------------------------------------------------------------------------
// Flat text serialization, versioned and deterministic, one instruction per
// line: "instr <dest> <opcode> <operands...>".

namespace detail {

inline std::string type_words(const SemType& t) {
    switch (t.kind) {
    case SemType::Kind::Bool: return "bool";
    case SemType::Kind::Int: return "int";
    case SemType::Kind::Real: return "real";
    case SemType::Kind::Vector: return "vector " + std::to_string(t.rows);
    case SemType::Kind::Matrix:
        return "matrix " + std::to_string(t.rows) + " " + std::to_string(t.cols);
    default: return "real";
    }
}

} // namespace detail

inline std::string serialize_tape(const Tape& t) {
    std::string s;
    s += "flc-tape 1\n";
    s += "slots " + std::to_string(t.slot_count) + "\n";
    for (const auto& in : t.inputs) {
        s += "input " + in.name + " " + detail::type_words(in.type);
        s += " " + std::to_string(in.slots.empty() ? 0 : in.slots.front()) + "\n";
    }
    for (const auto& out : t.outputs) {
        s += "output " + out.name + " " + detail::type_words(out.type);
        for (int slot : out.slots)
            s += " " + std::to_string(slot);
        s += "\n";
    }
    for (const auto& c : t.constants)
        s += "const " + std::to_string(c.slot) + " " + format_double(c.value) + "\n";
    for (const auto& g : t.guards) {
        s += "guard " + std::to_string(g.det_slot);
        for (int slot : g.operand_slots)
            s += " " + std::to_string(slot);
        s += "\n";
    }
    for (const auto& ins : t.instrs) {
        s += "instr " + std::to_string(ins.dst) + " " + opcode_name(ins.op);
        for (int k = 0; k < opcode_arity(ins.op); ++k)
            s += " " + std::to_string(ins.operand(k));
        s += "\n";
    }
    return s;
}

namespace detail {

inline bool parse_opcode(const std::string& word, Opcode& out) {
    for (int i = 0; i <= static_cast<int>(Opcode::Not); ++i) {
        Opcode op = static_cast<Opcode>(i);
        if (word == opcode_name(op)) {
            out = op;
            return true;
        }
    }
    return false;
}

inline SemType parse_type_words(std::istringstream& ss) {
    std::string kind;
    ss >> kind;
    if (kind == "bool")
        return SemType::boolean();
    if (kind == "int")
        return SemType::integer();
    if (kind == "real")
        return SemType::real();
    if (kind == "vector") {
        int n = 0;
        ss >> n;
        return SemType::vector(n);
    }
    if (kind == "matrix") {
        int m = 0, n = 0;
        ss >> m >> n;
        return SemType::matrix(m, n);
    }
    throw CompileError("tape parse: unknown type '" + kind + "'");
}

} // namespace detail

inline Tape parse_tape(const std::string& text) {
    Tape t;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "flc-tape 1")
        throw CompileError("tape parse: bad header (expected 'flc-tape 1')");
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        if (word == "slots") {
            ss >> t.slot_count;
        } else if (word == "input") {
            IoSlots io;
            ss >> io.name;
            io.type = detail::parse_type_words(ss);
            int base = 0;
            ss >> base;
            io.slots.resize(io.type.element_count());
            for (size_t k = 0; k < io.slots.size(); ++k)
                io.slots[k] = base + static_cast<int>(k);
            t.inputs.push_back(std::move(io));
        } else if (word == "output") {
            IoSlots io;
            ss >> io.name;
            io.type = detail::parse_type_words(ss);
            io.slots.resize(io.type.element_count());
            for (auto& slot : io.slots)
                ss >> slot;
            t.outputs.push_back(std::move(io));
        } else if (word == "const") {
            TapeConst c{};
            std::string value_word;
            ss >> c.slot >> value_word;
            // strtod handles nan/inf spellings, which istream does not
            c.value = std::strtod(value_word.c_str(), nullptr);
            t.constants.push_back(c);
        } else if (word == "guard") {
            Tape::InverseGuard g;
            ss >> g.det_slot;
            int slot;
            while (ss >> slot)
                g.operand_slots.push_back(slot);
            ss.clear(); // the slot loop always ends in a failed read
            t.guards.push_back(std::move(g));
        } else if (word == "instr") {
            Instr ins;
            std::string op_word;
            ss >> ins.dst >> op_word;
            if (!detail::parse_opcode(op_word, ins.op))
                throw CompileError("tape parse: unknown opcode '" + op_word + "'");
            for (int k = 0; k < opcode_arity(ins.op); ++k)
                ss >> ins.operand(k);
            t.instrs.push_back(ins);
        } else {
            throw CompileError("tape parse: unknown line '" + line + "'");
        }
        if (ss.fail())
            throw CompileError("tape parse: malformed line '" + line + "'");
    }
    build_plan(t);
    return t;
}

} // namespace flc
