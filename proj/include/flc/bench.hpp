#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "flc/compile.hpp"
#include "flc/exec.hpp"
#include "flc/numfmt.hpp"

namespace flc {

struct BenchReport {
    std::string project;
    long long iterations = 0;
    double tape_ns_per_iter = 0.0;
    double ast_ns_per_iter = 0.0;
    double speedup = 0.0;
    long long instruction_count = 0;
    double allocations_per_iter = 0.0;

    std::string to_json() const {
        std::string s = "{";
        s += "\"project\": \"" + project + "\", ";
        s += "\"iterations\": " + std::to_string(iterations) + ", ";
        s += "\"tape_ns_per_iter\": " + format_double(tape_ns_per_iter) + ", ";
        s += "\"ast_ns_per_iter\": " + format_double(ast_ns_per_iter) + ", ";
        s += "\"speedup\": " + format_double(speedup) + ", ";
        s += "\"instruction_count\": " + std::to_string(instruction_count) + ", ";
        s += "\"allocations_per_iter\": " + format_double(allocations_per_iter);
        s += "}";
        return s;
    }
};

// Reads a process-wide allocation counter; the CLI and the tests install
// one backed by their operator new.
using AllocCounterFn = long long (*)();

// Random bindings that keep common formulas well defined: positive scalars
// and entries, square matrices pushed to diagonal dominance so inverses
// stay far from singular.
inline Bindings random_bindings(const std::vector<IoSlots>& inputs, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(0.5, 2.0);
    Bindings b;
    for (const auto& in : inputs) {
        switch (in.type.kind) {
        case SemType::Kind::Bool:
            b[in.name] = Value::boolean((rng() & 1) != 0);
            break;
        case SemType::Kind::Int:
            b[in.name] = Value::integer(static_cast<std::int64_t>(rng() % 7) + 1);
            break;
        case SemType::Kind::Real:
            b[in.name] = Value::real(dist(rng));
            break;
        case SemType::Kind::Vector: {
            std::vector<double> v(in.type.rows);
            for (double& x : v)
                x = dist(rng);
            b[in.name] = Value::vector(std::move(v));
            break;
        }
        case SemType::Kind::Matrix: {
            const int m = in.type.rows;
            const int n = in.type.cols;
            std::vector<double> v(m * n);
            for (double& x : v)
                x = dist(rng);
            if (m == n)
                for (int i = 0; i < n; ++i)
                    v[i * n + i] += 4.0;
            b[in.name] = Value::matrix(m, n, std::move(v));
            break;
        }
        default:
            break;
        }
    }
    return b;
}

namespace detail {

inline double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    return xs[xs.size() / 2];
}

// Keeps the optimizer from discarding the timed loops.
inline volatile double bench_sink = 0.0;

} // namespace detail

// Time the compiled tape against the tree-walking oracle on identical
// pre-generated bindings. Setup (binding generation, scratch allocation)
// stays outside the timed regions; medians over `repetitions` runs.
inline BenchReport bench_compare(const Compiled& compiled, const std::string& name,
                                 long long iterations, std::uint64_t seed = 42,
                                 AllocCounterFn alloc_counter = nullptr, int repetitions = 5) {
    if (iterations < 10000)
        throw std::invalid_argument("bench: iteration count must be at least 10000");
    if (repetitions < 5)
        repetitions = 5;

    std::mt19937_64 rng(seed);
    const Bindings bindings = random_bindings(compiled.tape.inputs, rng);

    std::vector<double> scratch(compiled.tape.slot_count);
    std::vector<Value> outputs;
    bind_inputs(compiled.tape, bindings, scratch);

    using clock = std::chrono::steady_clock;
    std::vector<double> tape_ns;
    std::vector<double> ast_ns;
    long long allocs = 0;

    for (int rep = 0; rep < repetitions; ++rep) {
        const long long before = alloc_counter ? alloc_counter() : 0;
        const auto t0 = clock::now();
        for (long long i = 0; i < iterations; ++i) {
            run_tape(compiled.tape, scratch);
            detail::bench_sink = scratch[scratch.size() - 1];
        }
        const auto t1 = clock::now();
        const long long after = alloc_counter ? alloc_counter() : 0;
        tape_ns.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count() /
                          static_cast<double>(iterations));
        if (rep == 0)
            allocs = after - before;
    }

    for (int rep = 0; rep < repetitions; ++rep) {
        const auto t0 = clock::now();
        double sink = 0.0;
        for (long long i = 0; i < iterations; ++i) {
            for (const auto& out : compiled.outputs) {
                Value v = eval_ast(out.expr, bindings);
                sink += v.is_scalar() ? v.scalar() : v.elems[0];
            }
        }
        const auto t1 = clock::now();
        detail::bench_sink = sink;
        ast_ns.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count() /
                         static_cast<double>(iterations));
    }

    BenchReport report;
    report.project = name;
    report.iterations = iterations;
    report.tape_ns_per_iter = detail::median(tape_ns);
    report.ast_ns_per_iter = detail::median(ast_ns);
    report.speedup = report.ast_ns_per_iter / report.tape_ns_per_iter;
    report.instruction_count = static_cast<long long>(compiled.tape.instrs.size());
    report.allocations_per_iter =
        alloc_counter ? static_cast<double>(allocs) / static_cast<double>(iterations) : 0.0;
    return report;
}

// Thread-scaling mode: every thread shares the immutable tape but owns its
// scratch. Returns one report per thread after checking that all threads
// produced bitwise identical output bytes.
inline std::vector<BenchReport> bench_threads(const Compiled& compiled, const std::string& name,
                                              long long iterations, int threads,
                                              std::uint64_t seed = 42) {
    if (threads < 1)
        throw std::invalid_argument("bench: thread count must be positive");
    if (iterations < 10000)
        throw std::invalid_argument("bench: iteration count must be at least 10000");

    std::mt19937_64 rng(seed);
    const Bindings bindings = random_bindings(compiled.tape.inputs, rng);

    struct PerThread {
        double ns_per_iter = 0.0;
        std::vector<double> out_bytes;
    };
    std::vector<PerThread> results(threads);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int ti = 0; ti < threads; ++ti) {
        pool.emplace_back([&, ti] {
            std::vector<double> scratch(compiled.tape.slot_count);
            bind_inputs(compiled.tape, bindings, scratch);
            using clock = std::chrono::steady_clock;
            const auto t0 = clock::now();
            for (long long i = 0; i < iterations; ++i) {
                run_tape(compiled.tape, scratch);
                detail::bench_sink = scratch[scratch.size() - 1];
            }
            const auto t1 = clock::now();
            results[ti].ns_per_iter =
                std::chrono::duration<double, std::nano>(t1 - t0).count() /
                static_cast<double>(iterations);
            for (const auto& out : compiled.tape.outputs)
                for (int s : out.slots)
                    results[ti].out_bytes.push_back(scratch[s]);
        });
    }
    for (auto& th : pool)
        th.join();

    for (int ti = 1; ti < threads; ++ti)
        if (std::memcmp(results[ti].out_bytes.data(), results[0].out_bytes.data(),
                        results[0].out_bytes.size() * sizeof(double)) != 0)
            throw ExecError("bench: thread outputs differ");

    std::vector<BenchReport> reports;
    reports.reserve(threads);
    for (int ti = 0; ti < threads; ++ti) {
        BenchReport r;
        r.project = name + " (thread " + std::to_string(ti) + ")";
        r.iterations = iterations;
        r.tape_ns_per_iter = results[ti].ns_per_iter;
        r.ast_ns_per_iter = 0.0;
        r.speedup = 0.0;
        r.instruction_count = static_cast<long long>(compiled.tape.instrs.size());
        reports.push_back(std::move(r));
    }
    return reports;
}

} // namespace flc
