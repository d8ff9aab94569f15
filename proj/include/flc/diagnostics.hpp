#pragma once

#include <stdexcept>
#include <string>

namespace flc {

// Position of a token or node in the original source text, 1-based.
struct SourceSpan {
    int line = 0;
    int column = 0;

    bool valid() const { return line > 0; }
};

inline std::string to_string(const SourceSpan& s) {
    if (!s.valid())
        return "<unknown>";
    return std::to_string(s.line) + ":" + std::to_string(s.column);
}

// Any error produced while turning source text into a tape: syntax,
// name resolution, typing, lowering. Carries the offending position.
class CompileError : public std::runtime_error {
public:
    CompileError(std::string message, SourceSpan span = {})
        : std::runtime_error(span.valid() ? to_string(span) + ": error: " + message
                                          : "error: " + message),
          message_(std::move(message)),
          span_(span) {}

    const std::string& message() const { return message_; }
    SourceSpan span() const { return span_; }

private:
    std::string message_;
    SourceSpan span_;
};

// Errors raised while executing a tape or evaluating an AST: bad bindings,
// singular matrix, non-finite results.
class ExecError : public std::runtime_error {
public:
    explicit ExecError(std::string message) : std::runtime_error(std::move(message)) {}
};

} // namespace flc
