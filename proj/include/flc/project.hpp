#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flc/ast.hpp"
#include "flc/types.hpp"

namespace flc {

struct InputDecl {
    std::string name;
    SemType type;
    SourceSpan span;
};

struct Param {
    std::string name;
    SemType type;
    SourceSpan span;
};

struct FunctionDef {
    std::string name;
    std::vector<Param> params;
    std::optional<SemType> declared_return; // "::" annotation, checked by infer
    ExprPtr body;
    SourceSpan span;
};

struct OutputDecl {
    std::string name;
    ExprPtr expr;
    SourceSpan span;
};

// A parsed project file. Names are unique across all three lists and every
// identifier in a body refers to an input, a formal of the enclosing def,
// or an earlier def (no forward references, so no recursion).
struct Project {
    std::vector<InputDecl> inputs;
    std::vector<FunctionDef> defs;
    std::vector<OutputDecl> outputs;

    const InputDecl* find_input(const std::string& name) const {
        for (const auto& in : inputs)
            if (in.name == name)
                return &in;
        return nullptr;
    }
    const FunctionDef* find_def(const std::string& name) const {
        for (const auto& d : defs)
            if (d.name == name)
                return &d;
        return nullptr;
    }
};

} // namespace flc
