// flc - runtime optimizing compiler for a small engineering formula language.
//
// Subcommands: compile, run, bench, demo kalman, demo ode.

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flc/flc.hpp"

// Process-wide allocation counter so `bench` can report the compiled path's
// steady-state allocation count (expected: zero per iteration).
static std::atomic<long long> g_alloc_count{0};

void* operator new(std::size_t n) {
    g_alloc_count.fetch_add(1, std::memory_order_relaxed);
    if (void* p = std::malloc(n ? n : 1))
        return p;
    throw std::bad_alloc();
}
void* operator new[](std::size_t n) { return ::operator new(n); }
void operator delete(void* p) noexcept { std::free(p); }
void operator delete[](void* p) noexcept { std::free(p); }
void operator delete(void* p, std::size_t) noexcept { std::free(p); }
void operator delete[](void* p, std::size_t) noexcept { std::free(p); }

static long long read_alloc_count() { return g_alloc_count.load(std::memory_order_relaxed); }

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw flc::ExecError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_result(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw flc::ExecError("cannot write '" + path + "'");
    out << text;
}

std::vector<std::vector<double>> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw flc::ExecError("cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            row.push_back(std::strtod(cell.c_str(), nullptr));
        rows.push_back(std::move(row));
    }
    return rows;
}

flc::Value parse_binding_value(const std::string& spec, const flc::SemType& type) {
    using flc::SemType;
    using flc::Value;
    if (!spec.empty() && spec[0] == '@') {
        auto rows = read_csv(spec.substr(1));
        if (type.kind == SemType::Kind::Vector) {
            // vectors are single-column CSV
            std::vector<double> v;
            for (const auto& r : rows) {
                if (r.size() != 1)
                    throw flc::ExecError("vector CSV '" + spec.substr(1) +
                                         "' must have one value per row");
                v.push_back(r[0]);
            }
            if (static_cast<int>(v.size()) != type.rows)
                throw flc::ExecError("vector CSV has " + std::to_string(v.size()) +
                                     " rows, expected " + std::to_string(type.rows));
            return Value::vector(std::move(v));
        }
        if (type.kind == SemType::Kind::Matrix) {
            std::vector<double> v;
            if (static_cast<int>(rows.size()) != type.rows)
                throw flc::ExecError("matrix CSV has " + std::to_string(rows.size()) +
                                     " rows, expected " + std::to_string(type.rows));
            for (const auto& r : rows) {
                if (static_cast<int>(r.size()) != type.cols)
                    throw flc::ExecError("matrix CSV row has " + std::to_string(r.size()) +
                                         " values, expected " + std::to_string(type.cols));
                v.insert(v.end(), r.begin(), r.end());
            }
            return Value::matrix(type.rows, type.cols, std::move(v));
        }
        throw flc::ExecError("CSV binding given for scalar input");
    }
    switch (type.kind) {
    case SemType::Kind::Bool:
        if (spec == "true")
            return Value::boolean(true);
        if (spec == "false")
            return Value::boolean(false);
        throw flc::ExecError("bool binding must be 'true' or 'false', got '" + spec + "'");
    case SemType::Kind::Int:
        return Value::integer(std::strtoll(spec.c_str(), nullptr, 10));
    case SemType::Kind::Real:
        return Value::real(std::strtod(spec.c_str(), nullptr));
    default:
        throw flc::ExecError("vector/matrix input needs a CSV binding (name=@file.csv)");
    }
}

flc::Bindings parse_bindings(const std::vector<std::string>& specs, const flc::Tape& tape) {
    flc::Bindings b;
    for (const auto& s : specs) {
        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw flc::ExecError("binding '" + s + "' is not of the form name=value");
        const std::string name = s.substr(0, eq);
        const std::string value = s.substr(eq + 1);
        const flc::IoSlots* in = nullptr;
        for (const auto& io : tape.inputs)
            if (io.name == name)
                in = &io;
        if (!in)
            throw flc::ExecError("no input named '" + name + "'");
        b[name] = parse_binding_value(value, in->type);
    }
    return b;
}

int cmd_compile(const std::string& path, const std::string& emit, const std::string& derive,
                const std::string& out_path) {
    flc::CompileOptions opts;
    if (!derive.empty())
        opts.derive = derive;
    flc::Compiled compiled = flc::compile_text(read_file(path), opts);
    if (emit == "source")
        write_result(out_path, flc::emit_source(compiled.tape));
    else
        write_result(out_path, flc::serialize_tape(compiled.tape));
    std::cerr << "instructions: " << compiled.tape.instrs.size() << "\n"
              << "slots: " << compiled.tape.slot_count << "\n";
    return 0;
}

int cmd_run(const std::string& path, const std::vector<std::string>& binds,
            const std::string& derive, bool check_finite, const std::string& out_path) {
    flc::CompileOptions opts;
    if (!derive.empty())
        opts.derive = derive;
    flc::Compiled compiled = flc::compile_text(read_file(path), opts);
    flc::Bindings b = parse_bindings(binds, compiled.tape);
    std::vector<double> scratch;
    std::vector<flc::Value> outputs;
    flc::eval_tape(compiled.tape, b, scratch, outputs, check_finite);
    std::string text;
    for (size_t i = 0; i < outputs.size(); ++i)
        text += compiled.tape.outputs[i].name + " = " + flc::to_string(outputs[i]) + "\n";
    write_result(out_path, text);
    return 0;
}

int cmd_bench(const std::string& path, long long iterations, std::uint64_t seed, int threads,
              const std::string& out_path) {
    flc::Compiled compiled = flc::compile_text(read_file(path));
    std::string text;
    if (threads > 1) {
        auto reports = flc::bench_threads(compiled, path, iterations, threads, seed);
        for (const auto& r : reports)
            text += r.to_json() + "\n";
    } else {
        flc::BenchReport r =
            flc::bench_compare(compiled, path, iterations, seed, &read_alloc_count);
        text = r.to_json() + "\n";
    }
    write_result(out_path, text);
    return 0;
}

int cmd_demo_kalman(int steps, std::uint64_t seed) {
    // Scalar sanity model first: the numbers are checkable by hand.
    flc::KalmanModel scalar;
    scalar.n = 1;
    scalar.m = 1;
    scalar.F = {1.0};
    scalar.Q = {0.1};
    scalar.H = {1.0};
    scalar.R = {1.0};
    flc::KalmanStep step = flc::build_kalman_step(scalar);
    flc::Value p = flc::Value::matrix(1, 1, {0.9});
    flc::Value p_pred = step.run_predict(p);
    flc::Value p_next = step.run_update(p_pred);
    std::cout << "scalar model: P = 0.9 -> predict " << flc::to_string(p_pred) << " -> update "
              << flc::to_string(p_next) << "\n";

    // A 2x2 model iterated; covariance must stay symmetric.
    flc::KalmanModel m2;
    m2.n = 2;
    m2.m = 1;
    m2.F = {1.0, 0.1, 0.0, 1.0};
    m2.Q = {0.01, 0.0, 0.0, 0.01};
    m2.H = {1.0, 0.0};
    m2.R = {0.5};
    flc::KalmanStep s2 = flc::build_kalman_step(m2);
    flc::Value cov = flc::Value::matrix(2, 2, {1.0, 0.0, 0.0, 1.0});
    (void)seed;
    for (int k = 0; k < steps; ++k)
        cov = s2.run_update(s2.run_predict(cov));
    std::cout << "2x2 model after " << steps << " steps: P = " << flc::to_string(cov) << "\n";
    double asym = 0.0;
    asym = std::fabs(cov.at(0, 1) - cov.at(1, 0));
    std::cout << "symmetry residual: " << flc::format_double(asym) << "\n";
    std::cout << "update tape instructions: " << s2.update.tape.instrs.size() << "\n";
    return 0;
}

int cmd_demo_ode(double h, int steps) {
    // x' = x from x(0) = 1: the endpoint approximates e.
    flc::Project rhs = flc::parse_project("input x: real\noutput dx = x\n");
    flc::OdeSystem sys = flc::make_ode_system(rhs, h, steps);
    double x0[] = {1.0};
    flc::Trajectory traj = flc::integrate_rk4(sys, x0);
    const double e = 2.718281828459045;
    std::cout << "x' = x, h = " << h << ", " << steps << " steps: x(" << h * steps
              << ") = " << flc::format_double_17(traj.back()[0]) << "\n";
    if (h * steps == 1.0)
        std::cout << "error vs e: " << flc::format_double(traj.back()[0] - e) << "\n";

    // A delta on the right-hand side is rejected up front.
    flc::Project bad =
        flc::parse_project("input t: real\ninput x: real\noutput dx = cos(t) * delta(t - 1)\n");
    try {
        flc::make_ode_system(bad, h, steps);
        std::cout << "delta RHS unexpectedly accepted\n";
        return 1;
    } catch (const flc::ExecError& err) {
        std::cout << "delta RHS rejected: " << err.what() << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"runtime optimizing compiler for engineering formulas"};
    app.require_subcommand(1);

    std::string project_path;
    std::string emit = "tape";
    std::string derive;
    std::string out_path;
    std::vector<std::string> binds;
    bool check_finite = false;
    long long iterations = 1000000;
    std::uint64_t seed = 42;
    int threads = 1;
    int kalman_steps = 100;
    double ode_h = 0.01;
    int ode_steps = 100;

    CLI::App* compile = app.add_subcommand("compile", "compile a project to a tape or listing");
    compile->add_option("project", project_path, "project file")->required();
    compile->add_option("--emit", emit, "artifact kind: tape | source")
        ->check(CLI::IsMember({"tape", "source"}));
    compile->add_option("--derive", derive, "differentiate outputs with respect to a variable");
    compile->add_option("-o,--output", out_path, "write the artifact here instead of stdout");

    CLI::App* run = app.add_subcommand("run", "compile and evaluate with bindings");
    run->add_option("project", project_path, "project file")->required();
    run->add_option("--bind", binds, "input binding name=value or name=@file.csv");
    run->add_option("--derive", derive, "differentiate outputs before running");
    run->add_flag("--check-finite", check_finite, "fail on non-finite results");
    run->add_option("-o,--output", out_path, "write results here instead of stdout");

    CLI::App* bench = app.add_subcommand("bench", "compare tape vs AST oracle throughput");
    bench->add_option("project", project_path, "project file")->required();
    bench->add_option("-n,--iterations", iterations, "iterations (>= 10000)");
    bench->add_option("--seed", seed, "RNG seed for binding generation");
    bench->add_option("--threads", threads, "thread-scaling mode");
    bench->add_option("-o,--output", out_path, "write the report here instead of stdout");

    CLI::App* demo = app.add_subcommand("demo", "built-in end-to-end workloads");
    CLI::App* demo_kalman = demo->add_subcommand("kalman", "compiled covariance filter step");
    demo_kalman->add_option("-n,--steps", kalman_steps, "filter steps");
    CLI::App* demo_ode = demo->add_subcommand("ode", "RK4 over a compiled right-hand side");
    demo_ode->add_option("--dt", ode_h, "step size");
    demo_ode->add_option("--steps", ode_steps, "step count");
    demo->require_subcommand(1);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*compile)
            return cmd_compile(project_path, emit, derive, out_path);
        if (*run)
            return cmd_run(project_path, binds, derive, check_finite, out_path);
        if (*bench) {
            if (iterations < 10000) {
                std::cerr << "error: bench requires -n >= 10000\n";
                return 2;
            }
            return cmd_bench(project_path, iterations, seed, threads, out_path);
        }
        if (*demo_kalman)
            return cmd_demo_kalman(kalman_steps, seed);
        if (*demo_ode)
            return cmd_demo_ode(ode_h, ode_steps);
    } catch (const flc::CompileError& err) {
        std::cerr << err.what() << "\n";
        return 1;
    } catch (const flc::ExecError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}
