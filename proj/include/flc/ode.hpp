#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "flc/compile.hpp"
#include "flc/exec.hpp"

namespace flc {

// A compiled first-order system x' = f(t, x). The RHS project's inputs are
// the state components, in declaration order; an input literally named "t"
// (real) is the independent variable, advanced by the integrator. Outputs
// pair with state inputs positionally and must match their shapes.
struct OdeSystem {
    Compiled rhs;
    int dim = 0;                  // total scalar state size
    int time_slot = -1;           // slot of "t", or -1
    std::vector<int> state_slots; // where to write the state, flat
    std::vector<int> deriv_slots; // where to read f(t, x), flat
    double step_size = 0.0;
    int step_count = 0;
    bool discontinuous = false;
};

inline OdeSystem make_ode_system(const Project& parsed, double step_size, int step_count) {
    if (step_size <= 0.0)
        throw CompileError("ode: step size must be positive");
    if (step_count < 0)
        throw CompileError("ode: negative step count");

    // A delta on the right-hand side marks a discontinuous solution;
    // fixed-step smooth integration is invalid there, so reject up front.
    Project inlined = inline_functions(parsed);
    bool discontinuous = false;
    for (const auto& out : inlined.outputs)
        discontinuous = discontinuous || detect_discontinuity(out.expr);
    if (discontinuous)
        throw ExecError(
            "ode: right-hand side contains delta(...); the result function is not continuous, "
            "so fixed-step integration is rejected");

    OdeSystem sys;
    sys.discontinuous = false;
    sys.rhs = compile_project(parsed);
    sys.step_size = step_size;
    sys.step_count = step_count;

    std::vector<const IoSlots*> state_inputs;
    for (const auto& in : sys.rhs.tape.inputs) {
        if (in.name == "t") {
            if (in.type.kind != SemType::Kind::Real)
                throw CompileError("ode: time input 't' must be real");
            sys.time_slot = in.slots[0];
            continue;
        }
        state_inputs.push_back(&in);
    }
    if (sys.rhs.tape.outputs.size() != state_inputs.size())
        throw CompileError("ode: expected one output per state input, got " +
                           std::to_string(sys.rhs.tape.outputs.size()) + " output(s) for " +
                           std::to_string(state_inputs.size()) + " state input(s)");
    for (size_t i = 0; i < state_inputs.size(); ++i) {
        if (!(sys.rhs.tape.outputs[i].type == state_inputs[i]->type))
            throw CompileError("ode: output '" + sys.rhs.tape.outputs[i].name + "' has type " +
                               to_string(sys.rhs.tape.outputs[i].type) + " but state input '" +
                               state_inputs[i]->name + "' has type " +
                               to_string(state_inputs[i]->type));
        for (int s : state_inputs[i]->slots)
            sys.state_slots.push_back(s);
        for (int s : sys.rhs.tape.outputs[i].slots)
            sys.deriv_slots.push_back(s);
    }
    sys.dim = static_cast<int>(sys.state_slots.size());
    if (sys.dim == 0)
        throw CompileError("ode: no state inputs");
    return sys;
}

// Dense fixed-step trajectory, stored flat to keep the integration loop
// allocation-free.
struct Trajectory {
    int dim = 0;
    std::vector<double> data; // (step_count + 1) * dim

    int states() const { return dim == 0 ? 0 : static_cast<int>(data.size()) / dim; }
    std::span<const double> state(int k) const {
        return std::span<const double>(data).subspan(static_cast<size_t>(k) * dim, dim);
    }
    std::span<const double> back() const { return state(states() - 1); }
};

namespace detail {

struct Rk4Workspace {
    std::vector<double> scratch;
    std::vector<double> k1, k2, k3, k4, tmp;

    explicit Rk4Workspace(const OdeSystem& sys)
        : scratch(sys.rhs.tape.slot_count),
          k1(sys.dim),
          k2(sys.dim),
          k3(sys.dim),
          k4(sys.dim),
          tmp(sys.dim) {}
};

inline void ode_rhs(const OdeSystem& sys, Rk4Workspace& ws, double t,
                    std::span<const double> state, std::vector<double>& out) {
    if (sys.time_slot >= 0)
        ws.scratch[sys.time_slot] = t;
    for (int i = 0; i < sys.dim; ++i)
        ws.scratch[sys.state_slots[i]] = state[i];
    run_tape(sys.rhs.tape, ws.scratch);
    for (int i = 0; i < sys.dim; ++i)
        out[i] = ws.scratch[sys.deriv_slots[i]];
}

} // namespace detail

// Classic fixed-step fourth-order Runge-Kutta; each stage is one tape run.
inline Trajectory integrate_rk4(const OdeSystem& sys, std::span<const double> x0,
                                double t0 = 0.0) {
    if (static_cast<int>(x0.size()) != sys.dim)
        throw ExecError("ode: initial state has " + std::to_string(x0.size()) +
                        " component(s), expected " + std::to_string(sys.dim));
    const double h = sys.step_size;
    Trajectory traj;
    traj.dim = sys.dim;
    traj.data.resize(static_cast<size_t>(sys.step_count + 1) * sys.dim);
    for (int i = 0; i < sys.dim; ++i)
        traj.data[i] = x0[i];

    detail::Rk4Workspace ws(sys);
    for (int step = 0; step < sys.step_count; ++step) {
        const double t = t0 + step * h;
        std::span<const double> x = traj.state(step);
        double* next = traj.data.data() + static_cast<size_t>(step + 1) * sys.dim;

        detail::ode_rhs(sys, ws, t, x, ws.k1);
        for (int i = 0; i < sys.dim; ++i)
            ws.tmp[i] = x[i] + 0.5 * h * ws.k1[i];
        detail::ode_rhs(sys, ws, t + 0.5 * h, ws.tmp, ws.k2);
        for (int i = 0; i < sys.dim; ++i)
            ws.tmp[i] = x[i] + 0.5 * h * ws.k2[i];
        detail::ode_rhs(sys, ws, t + 0.5 * h, ws.tmp, ws.k3);
        for (int i = 0; i < sys.dim; ++i)
            ws.tmp[i] = x[i] + h * ws.k3[i];
        detail::ode_rhs(sys, ws, t + h, ws.tmp, ws.k4);

        for (int i = 0; i < sys.dim; ++i)
            next[i] = x[i] + (h / 6.0) * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
        for (int i = 0; i < sys.dim; ++i)
            if (!std::isfinite(next[i]))
                throw ExecError("ode: non-finite state at step " + std::to_string(step + 1));
    }
    return traj;
}

} // namespace flc
