#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace flc {

// Elementwise unary builtins. sum/cross/delta/cond/D also parse as calls
// but get their own node kinds; these stay Call nodes.
enum class UnaryBuiltin { Sin, Cos, Tan, Exp, Log, Sqrt, Abs };

inline constexpr std::array<std::string_view, 7> unary_builtin_names = {
    "sin", "cos", "tan", "exp", "log", "sqrt", "abs"};

inline bool lookup_unary_builtin(std::string_view name, UnaryBuiltin& out) {
    for (size_t i = 0; i < unary_builtin_names.size(); ++i) {
        if (unary_builtin_names[i] == name) {
            out = static_cast<UnaryBuiltin>(i);
            return true;
        }
    }
    return false;
}

inline bool is_unary_builtin(std::string_view name) {
    UnaryBuiltin b;
    return lookup_unary_builtin(name, b);
}

inline bool is_binary_builtin(std::string_view name) { return name == "min" || name == "max"; }

// All names with builtin meaning in call position. Reserved: user
// declarations may not reuse them.
inline bool is_builtin_name(std::string_view name) {
    return is_unary_builtin(name) || is_binary_builtin(name) || name == "sum" ||
           name == "cross" || name == "delta" || name == "cond" || name == "D";
}

} // namespace flc
