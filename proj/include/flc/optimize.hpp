#pragma once

#include <bit>
#include <cstdint>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "flc/tape.hpp"

namespace flc {
namespace detail {

struct InstrKey {
    Opcode op;
    int a, b, c;
    bool operator==(const InstrKey&) const = default;
};

struct InstrKeyHash {
    size_t operator()(const InstrKey& k) const {
        std::uint64_t h = 1469598103934665603ull;
        auto mix = [&h](std::uint64_t v) {
            h ^= v;
            h *= 1099511628211ull;
        };
        mix(static_cast<std::uint64_t>(k.op));
        mix(static_cast<std::uint64_t>(k.a) + 1);
        mix(static_cast<std::uint64_t>(k.b) + 1);
        mix(static_cast<std::uint64_t>(k.c) + 1);
        return static_cast<size_t>(h);
    }
};

} // namespace detail

// Fold constant-operand instructions into the pool, collapse value-numbered
// duplicates, drop everything unreachable from an output, and compact slot
// indices. Surviving instructions keep their operand order, so optimized
// and unoptimized tapes produce bitwise identical results.
inline Tape optimize(const Tape& t) {
    std::vector<int> rewrite(t.slot_count);
    std::iota(rewrite.begin(), rewrite.end(), 0);

    std::vector<char> is_const(t.slot_count, 0);
    std::vector<double> const_val(t.slot_count, 0.0);
    std::vector<TapeConst> pool;
    std::unordered_map<std::uint64_t, int> const_by_bits;

    auto intern_const = [&](int slot, double v) -> int {
        const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
        auto it = const_by_bits.find(bits);
        if (it != const_by_bits.end())
            return it->second;
        is_const[slot] = 1;
        const_val[slot] = v;
        pool.push_back({slot, v});
        const_by_bits.emplace(bits, slot);
        return slot;
    };

    for (const auto& c : t.constants)
        rewrite[c.slot] = intern_const(c.slot, c.value);

    // Fold + CSE in one ordered walk.
    std::vector<Instr> kept;
    kept.reserve(t.instrs.size());
    std::unordered_map<detail::InstrKey, int, detail::InstrKeyHash> numbered;

    for (const auto& ins : t.instrs) {
        if (ins.op == Opcode::LoadConst) {
            rewrite[ins.dst] = intern_const(ins.dst, t.constants[ins.a].value);
            continue;
        }
        Instr r = ins;
        const int arity = opcode_arity(r.op);
        bool all_const = true;
        double vals[3] = {0, 0, 0};
        for (int k = 0; k < arity; ++k) {
            r.operand(k) = rewrite[r.operand(k)];
            if (is_const[r.operand(k)])
                vals[k] = const_val[r.operand(k)];
            else
                all_const = false;
        }
        if (all_const) {
            rewrite[ins.dst] = intern_const(ins.dst, apply_op(r.op, vals[0], vals[1], vals[2]));
            continue;
        }
        detail::InstrKey key{r.op, r.a, r.b, r.c};
        if (opcode_commutative(r.op) && key.a > key.b)
            std::swap(key.a, key.b); // canonical key only; r keeps its order
        auto it = numbered.find(key);
        if (it != numbered.end()) {
            rewrite[ins.dst] = it->second;
            continue;
        }
        numbered.emplace(key, r.dst);
        kept.push_back(r);
    }

    // Liveness from the outputs.
    std::vector<char> live(t.slot_count, 0);
    Tape out;
    out.inputs = t.inputs;
    for (const auto& o : t.outputs) {
        IoSlots io = o;
        for (int& s : io.slots) {
            s = rewrite[s];
            live[s] = 1;
        }
        out.outputs.push_back(std::move(io));
    }
    std::vector<char> instr_kept(kept.size(), 0);
    for (size_t i = kept.size(); i-- > 0;) {
        const Instr& ins = kept[i];
        if (!live[ins.dst])
            continue;
        instr_kept[i] = 1;
        for (int k = 0; k < opcode_arity(ins.op); ++k)
            live[ins.operand(k)] = 1;
    }

    // A guard survives if its determinant slot still exists; a folded
    // (constant) determinant keeps its runtime check too.
    for (const auto& g : t.guards) {
        const int det = rewrite[g.det_slot];
        if (!live[det] && !is_const[det])
            continue;
        Tape::InverseGuard kept_guard;
        kept_guard.det_slot = det;
        kept_guard.operand_slots.reserve(g.operand_slots.size());
        for (int s : g.operand_slots) {
            const int rs = rewrite[s];
            kept_guard.operand_slots.push_back(rs);
            live[rs] = 1;
        }
        live[det] = 1;
        out.guards.push_back(std::move(kept_guard));
    }

    // Compact: inputs keep their leading contiguous range, then surviving
    // constants, then surviving instruction results in order.
    std::vector<int> compact(t.slot_count, -1);
    int next = 0;
    for (const auto& in : t.inputs)
        for (int s : in.slots)
            compact[s] = next++;
    for (const auto& c : pool)
        if (live[c.slot]) {
            compact[c.slot] = next++;
            out.constants.push_back({compact[c.slot], c.value});
        }
    for (size_t i = 0; i < kept.size(); ++i)
        if (instr_kept[i])
            compact[kept[i].dst] = next++;

    for (auto& in : out.inputs)
        for (int& s : in.slots)
            s = compact[s];
    for (size_t i = 0; i < kept.size(); ++i) {
        if (!instr_kept[i])
            continue;
        Instr ins = kept[i];
        ins.dst = compact[ins.dst];
        for (int k = 0; k < opcode_arity(ins.op); ++k)
            ins.operand(k) = compact[ins.operand(k)];
        out.instrs.push_back(ins);
    }
    for (auto& o : out.outputs)
        for (int& s : o.slots)
            s = compact[s];
    for (auto& g : out.guards) {
        g.det_slot = compact[g.det_slot];
        for (int& s : g.operand_slots)
            s = compact[s];
    }
    out.slot_count = next;
    build_plan(out);
    return out;
}

} // namespace flc
