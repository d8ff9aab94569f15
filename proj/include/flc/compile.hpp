#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flc/ast.hpp"
#include "flc/exec.hpp"
#include "flc/lower.hpp"
#include "flc/optimize.hpp"
#include "flc/parser.hpp"
#include "flc/symdiff.hpp"
#include "flc/typecheck.hpp"

namespace flc {

struct CompileOptions {
    // Differentiate every output with respect to this variable before
    // lowering.
    std::optional<std::string> derive;
    bool optimize = true;
};

// Everything the pipeline produces for one project. The typed outputs are
// the oracle's view; the tape is the compiled artifact.
struct Compiled {
    Project project; // post-inline: inputs + outputs only
    std::vector<CheckedOutput> outputs;
    Tape raw_tape;
    Tape tape;
};

// parse -> inline -> resolve derivatives -> (derive) -> simplify -> infer
// -> lower -> optimize.
inline Compiled compile_project(const Project& parsed, const CompileOptions& opts = {}) {
    if (parsed.outputs.empty())
        throw CompileError("project has no outputs");

    check_project(parsed); // validates def bodies and declared return types

    Project project = inline_functions(parsed);
    TypeEnv env = TypeEnv::for_project(project);

    for (auto& out : project.outputs) {
        ExprPtr e = resolve_derivatives(out.expr, env);
        if (opts.derive) {
            TypedExprPtr typed = infer(*e, env);
            e = differentiate(*typed, *opts.derive);
        }
        out.expr = simplify(e, &env);
    }

    // A Dirac delta marks a discontinuous result; there is nothing
    // meaningful to lower.
    for (const auto& out : project.outputs)
        if (detect_discontinuity(out.expr))
            throw CompileError("output '" + out.name +
                                   "' contains delta(...): the result function is not continuous "
                                   "and cannot be compiled to a straight-line tape",
                               out.span);

    Compiled result;
    result.outputs.reserve(project.outputs.size());
    for (const auto& out : project.outputs)
        result.outputs.push_back({out.name, infer(*out.expr, env)});
    result.raw_tape = lower_outputs(result.outputs, project.inputs);
    result.tape = opts.optimize ? optimize(result.raw_tape) : result.raw_tape;
    result.project = std::move(project);
    return result;
}

inline Compiled compile_text(std::string_view text, const CompileOptions& opts = {}) {
    return compile_project(parse_project(text), opts);
}

} // namespace flc
