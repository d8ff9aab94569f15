#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "flc/ast.hpp"
#include "flc/builtins.hpp"
#include "flc/diagnostics.hpp"
#include "flc/project.hpp"
#include "flc/types.hpp"

namespace flc {
namespace detail {

enum class Tok {
    End,
    Newline,
    Ident,
    IntNum,
    RealNum,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    ColonColon,
    Assign,
    Lt,
    Le,
    EqEq,
    Ne,
    Ge,
    Gt,
    KwInput,
    KwDef,
    KwOutput,
    KwAnd,
    KwOr,
    KwNot,
    KwTrue,
    KwFalse,
    KwBool,
    KwInt,
    KwReal,
    KwVector,
    KwMatrix,
};

struct Token {
    Tok kind;
    std::string text;
    double real_value = 0.0;
    std::int64_t int_value = 0;
    SourceSpan span;
};

inline const char* token_name(Tok t) {
    switch (t) {
    case Tok::End: return "end of input";
    case Tok::Newline: return "end of line";
    case Tok::Ident: return "identifier";
    case Tok::IntNum: return "integer";
    case Tok::RealNum: return "number";
    case Tok::Plus: return "'+'";
    case Tok::Minus: return "'-'";
    case Tok::Star: return "'*'";
    case Tok::Slash: return "'/'";
    case Tok::Caret: return "'^'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBracket: return "'['";
    case Tok::RBracket: return "']'";
    case Tok::Comma: return "','";
    case Tok::Colon: return "':'";
    case Tok::ColonColon: return "'::'";
    case Tok::Assign: return "'='";
    case Tok::Lt: return "'<'";
    case Tok::Le: return "'<='";
    case Tok::EqEq: return "'=='";
    case Tok::Ne: return "'!='";
    case Tok::Ge: return "'>='";
    case Tok::Gt: return "'>'";
    case Tok::KwInput: return "'input'";
    case Tok::KwDef: return "'def'";
    case Tok::KwOutput: return "'output'";
    case Tok::KwAnd: return "'and'";
    case Tok::KwOr: return "'or'";
    case Tok::KwNot: return "'not'";
    case Tok::KwTrue: return "'true'";
    case Tok::KwFalse: return "'false'";
    case Tok::KwBool: return "'bool'";
    case Tok::KwInt: return "'int'";
    case Tok::KwReal: return "'real'";
    case Tok::KwVector: return "'vector'";
    case Tok::KwMatrix: return "'matrix'";
    }
    return "?";
}

inline Tok keyword_token(std::string_view word, bool project_mode) {
    if (word == "and") return Tok::KwAnd;
    if (word == "or") return Tok::KwOr;
    if (word == "not") return Tok::KwNot;
    if (word == "true") return Tok::KwTrue;
    if (word == "false") return Tok::KwFalse;
    if (project_mode) {
        if (word == "input") return Tok::KwInput;
        if (word == "def") return Tok::KwDef;
        if (word == "output") return Tok::KwOutput;
        if (word == "bool") return Tok::KwBool;
        if (word == "int") return Tok::KwInt;
        if (word == "real") return Tok::KwReal;
        if (word == "vector") return Tok::KwVector;
        if (word == "matrix") return Tok::KwMatrix;
    }
    return Tok::Ident;
}

// Tokenizes the whole input up front. In project mode newlines are
// significant (one declaration per line) and '#' starts a line comment.
inline std::vector<Token> tokenize(std::string_view text, bool project_mode) {
    std::vector<Token> out;
    int line = 1;
    int column = 1;
    size_t i = 0;
    const size_t n = text.size();

    auto span_here = [&] { return SourceSpan{line, column}; };
    auto advance = [&](size_t count) {
        for (size_t k = 0; k < count; ++k, ++i) {
            if (text[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
    };
    auto push = [&](Tok kind, SourceSpan sp, std::string tok_text = {}) {
        Token t;
        t.kind = kind;
        t.text = std::move(tok_text);
        t.span = sp;
        out.push_back(std::move(t));
    };

    while (i < n) {
        const char c = text[i];
        if (c == '#') {
            while (i < n && text[i] != '\n')
                advance(1);
            continue;
        }
        if (c == '\n') {
            SourceSpan sp = span_here();
            advance(1);
            if (project_mode && !out.empty() && out.back().kind != Tok::Newline)
                push(Tok::Newline, sp);
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r') {
            advance(1);
            continue;
        }
        SourceSpan sp = span_here();
        if ((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_') {
            size_t j = i;
            while (j < n && ((text[j] >= 'A' && text[j] <= 'Z') || (text[j] >= 'a' && text[j] <= 'z') ||
                             (text[j] >= '0' && text[j] <= '9') || text[j] == '_'))
                ++j;
            std::string word(text.substr(i, j - i));
            advance(j - i);
            const Tok kind = keyword_token(word, project_mode);
            push(kind, sp, std::move(word));
            continue;
        }
        if (c >= '0' && c <= '9') {
            size_t j = i;
            bool is_real = false;
            while (j < n && text[j] >= '0' && text[j] <= '9')
                ++j;
            if (j < n && text[j] == '.' && j + 1 < n && text[j + 1] >= '0' && text[j + 1] <= '9') {
                is_real = true;
                ++j;
                while (j < n && text[j] >= '0' && text[j] <= '9')
                    ++j;
            }
            if (j < n && (text[j] == 'e' || text[j] == 'E')) {
                size_t k = j + 1;
                if (k < n && (text[k] == '+' || text[k] == '-'))
                    ++k;
                if (k < n && text[k] >= '0' && text[k] <= '9') {
                    is_real = true;
                    while (k < n && text[k] >= '0' && text[k] <= '9')
                        ++k;
                    j = k;
                }
            }
            std::string word(text.substr(i, j - i));
            advance(j - i);
            Token t;
            t.span = sp;
            t.text = word;
            if (is_real) {
                t.kind = Tok::RealNum;
                t.real_value = std::strtod(word.c_str(), nullptr);
            } else {
                try {
                    t.kind = Tok::IntNum;
                    t.int_value = std::stoll(word);
                } catch (const std::out_of_range&) {
                    t.kind = Tok::RealNum;
                    t.real_value = std::strtod(word.c_str(), nullptr);
                }
            }
            out.push_back(std::move(t));
            continue;
        }
        auto two = [&](char a, char b) {
            return c == a && i + 1 < n && text[i + 1] == b;
        };
        if (two(':', ':')) { advance(2); push(Tok::ColonColon, sp); continue; }
        if (two('<', '=')) { advance(2); push(Tok::Le, sp); continue; }
        if (two('>', '=')) { advance(2); push(Tok::Ge, sp); continue; }
        if (two('=', '=')) { advance(2); push(Tok::EqEq, sp); continue; }
        if (two('!', '=')) { advance(2); push(Tok::Ne, sp); continue; }
        switch (c) {
        case '+': advance(1); push(Tok::Plus, sp); continue;
        case '-': advance(1); push(Tok::Minus, sp); continue;
        case '*': advance(1); push(Tok::Star, sp); continue;
        case '/': advance(1); push(Tok::Slash, sp); continue;
        case '^': advance(1); push(Tok::Caret, sp); continue;
        case '(': advance(1); push(Tok::LParen, sp); continue;
        case ')': advance(1); push(Tok::RParen, sp); continue;
        case '[': advance(1); push(Tok::LBracket, sp); continue;
        case ']': advance(1); push(Tok::RBracket, sp); continue;
        case ',': advance(1); push(Tok::Comma, sp); continue;
        case ':': advance(1); push(Tok::Colon, sp); continue;
        case '=': advance(1); push(Tok::Assign, sp); continue;
        case '<': advance(1); push(Tok::Lt, sp); continue;
        case '>': advance(1); push(Tok::Gt, sp); continue;
        default:
            throw CompileError(std::string("unexpected character '") + c + "'", sp);
        }
    }
    if (project_mode && !out.empty() && out.back().kind != Tok::Newline)
        push(Tok::Newline, span_here());
    push(Tok::End, span_here());
    return out;
}

class Parser {
public:
    Parser(std::string_view text, bool project_mode)
        : tokens_(tokenize(text, project_mode)) {}

    // ---- formula grammar -------------------------------------------------

    ExprPtr parse_expression() { return parse_or(); }

    ExprPtr parse_whole_formula() {
        ExprPtr e = parse_expression();
        if (!at(Tok::End))
            fail_here(std::string("unexpected ") + token_name(cur().kind) + " after expression");
        return e;
    }

    // ---- project grammar -------------------------------------------------

    Project parse_project_file() {
        Project project;
        // Inputs resolve regardless of declaration order; defs must precede use.
        for (size_t i = 0; i + 1 < tokens_.size(); ++i)
            if (tokens_[i].kind == Tok::KwInput && tokens_[i + 1].kind == Tok::Ident)
                visible_[tokens_[i + 1].text] = 'i';
        skip_newlines();
        while (!at(Tok::End)) {
            parse_declaration(project);
            if (!at(Tok::End))
                expect(Tok::Newline, "after declaration");
            skip_newlines();
        }
        return project;
    }

private:
    std::vector<Token> tokens_;
    size_t pos_ = 0;

    // Names visible to the declaration currently being parsed, in file
    // order: inputs and defs seen so far, plus formals inside a def body.
    std::unordered_map<std::string, char> visible_; // 'i' input, 'd' def, 'p' param
    std::unordered_set<std::string> all_names_;     // includes outputs, for duplicate checks
    bool resolving_ = false;

    const Token& cur() const { return tokens_[pos_]; }
    bool at(Tok k) const { return cur().kind == k; }
    const Token& take() { return tokens_[pos_++]; }

    [[noreturn]] void fail(const std::string& message, SourceSpan sp) const {
        throw CompileError(message, sp);
    }
    [[noreturn]] void fail_here(const std::string& message) const { fail(message, cur().span); }

    const Token& expect(Tok kind, const std::string& context) {
        if (!at(kind))
            fail_here(std::string("expected ") + token_name(kind) + " " + context + ", got " +
                      token_name(cur().kind));
        return take();
    }

    void skip_newlines() {
        while (at(Tok::Newline))
            take();
    }

    // -- expressions --

    ExprPtr parse_or() {
        ExprPtr e = parse_and();
        while (at(Tok::KwOr)) {
            SourceSpan sp = take().span;
            e = make_binary(ExprKind::Or, e, parse_and(), sp);
        }
        return e;
    }

    ExprPtr parse_and() {
        ExprPtr e = parse_cmp();
        while (at(Tok::KwAnd)) {
            SourceSpan sp = take().span;
            e = make_binary(ExprKind::And, e, parse_cmp(), sp);
        }
        return e;
    }

    ExprPtr parse_cmp() {
        ExprPtr e = parse_add();
        ExprKind kind;
        switch (cur().kind) {
        case Tok::Lt: kind = ExprKind::Lt; break;
        case Tok::Le: kind = ExprKind::Le; break;
        case Tok::EqEq: kind = ExprKind::Eq; break;
        case Tok::Ne: kind = ExprKind::Ne; break;
        case Tok::Ge: kind = ExprKind::Ge; break;
        case Tok::Gt: kind = ExprKind::Gt; break;
        default: return e;
        }
        SourceSpan sp = take().span;
        return make_binary(kind, e, parse_add(), sp);
    }

    ExprPtr parse_add() {
        ExprPtr e = parse_mul();
        while (at(Tok::Plus) || at(Tok::Minus)) {
            ExprKind kind = at(Tok::Plus) ? ExprKind::Add : ExprKind::Sub;
            SourceSpan sp = take().span;
            e = make_binary(kind, e, parse_mul(), sp);
        }
        return e;
    }

    ExprPtr parse_mul() {
        ExprPtr e = parse_postfix();
        while (at(Tok::Star) || at(Tok::Slash)) {
            ExprKind kind = at(Tok::Star) ? ExprKind::Mul : ExprKind::Div;
            SourceSpan sp = take().span;
            e = make_binary(kind, e, parse_postfix(), sp);
        }
        return e;
    }

    // post_e := unary_e ("^" ("T" | "-1" | INT))*
    // The token after '^' decides: transpose, inverse, or integer power.
    ExprPtr parse_postfix() {
        ExprPtr e = parse_unary();
        while (at(Tok::Caret)) {
            SourceSpan sp = take().span;
            if (at(Tok::Ident) && cur().text == "T") {
                take();
                e = make_expr(ExprKind::Transpose, {e}, sp);
            } else if (at(Tok::Minus)) {
                SourceSpan minus_sp = take().span;
                if (at(Tok::IntNum) && cur().int_value == 1) {
                    take();
                    e = make_expr(ExprKind::Inverse, {e}, sp);
                } else {
                    fail("expected '1' after '^-' (only '^-1' denotes inverse)", minus_sp);
                }
            } else if (at(Tok::IntNum)) {
                const Token& t = take();
                e = make_binary(ExprKind::Pow, e, make_int(t.int_value, t.span), sp);
            } else {
                fail_here(std::string("expected 'T', '-1', or an integer after '^', got ") +
                          token_name(cur().kind));
            }
        }
        return e;
    }

    ExprPtr parse_unary() {
        if (at(Tok::Minus)) {
            SourceSpan sp = take().span;
            return make_expr(ExprKind::Neg, {parse_unary()}, sp);
        }
        if (at(Tok::KwNot)) {
            SourceSpan sp = take().span;
            return make_expr(ExprKind::Not, {parse_unary()}, sp);
        }
        return parse_atom();
    }

    ExprPtr parse_atom() {
        switch (cur().kind) {
        case Tok::RealNum: {
            const Token& t = take();
            return make_real(t.real_value, t.span);
        }
        case Tok::IntNum: {
            const Token& t = take();
            return make_int(t.int_value, t.span);
        }
        case Tok::KwTrue: {
            SourceSpan sp = take().span;
            return make_bool(true, sp);
        }
        case Tok::KwFalse: {
            SourceSpan sp = take().span;
            return make_bool(false, sp);
        }
        case Tok::LParen: {
            take();
            ExprPtr e = parse_expression();
            expect(Tok::RParen, "to close '('");
            return e;
        }
        case Tok::Ident: {
            const Token t = take();
            if (at(Tok::LParen))
                return parse_call(t);
            if (is_builtin_name(t.text))
                fail("'" + t.text + "' is a builtin function and needs an argument list", t.span);
            if (resolving_ && !visible_.count(t.text))
                fail("unresolved identifier '" + t.text + "'", t.span);
            return make_var(t.text, t.span);
        }
        default:
            fail_here(std::string("expected an expression (number, identifier, 'true', 'false', "
                                  "'-', 'not', or '('), got ") +
                      token_name(cur().kind));
        }
    }

    ExprPtr parse_call(const Token& callee) {
        expect(Tok::LParen, "after function name");
        std::vector<ExprPtr> args;
        if (!at(Tok::RParen)) {
            args.push_back(parse_expression());
            while (at(Tok::Comma)) {
                take();
                args.push_back(parse_expression());
            }
        }
        expect(Tok::RParen, "to close the argument list");
        return desugar_call(callee, std::move(args));
    }

    void check_arity(const Token& callee, const std::vector<ExprPtr>& args, size_t want) {
        if (args.size() != want)
            fail("builtin '" + callee.text + "' expects " + std::to_string(want) +
                     (want == 1 ? " argument, got " : " arguments, got ") +
                     std::to_string(args.size()),
                 callee.span);
    }

    ExprPtr desugar_call(const Token& callee, std::vector<ExprPtr> args) {
        const std::string& name = callee.text;
        if (name == "sum") {
            check_arity(callee, args, 1);
            return make_expr(ExprKind::Sum, std::move(args), callee.span);
        }
        if (name == "cross") {
            check_arity(callee, args, 2);
            return make_expr(ExprKind::Cross, std::move(args), callee.span);
        }
        if (name == "delta") {
            check_arity(callee, args, 1);
            return make_expr(ExprKind::Delta, std::move(args), callee.span);
        }
        if (name == "cond") {
            check_arity(callee, args, 3);
            return make_expr(ExprKind::Select, std::move(args), callee.span);
        }
        if (name == "D") {
            check_arity(callee, args, 2);
            if (args[1]->kind != ExprKind::Var)
                fail("second argument of D must be a variable name", callee.span);
            return make_deriv(args[0], args[1]->name, callee.span);
        }
        if (is_unary_builtin(name))
            check_arity(callee, args, 1);
        else if (is_binary_builtin(name))
            check_arity(callee, args, 2);
        else if (resolving_ && !visible_.count(name))
            fail("unresolved identifier '" + name + "'", callee.span);
        return make_call(name, std::move(args), callee.span);
    }

    // -- declarations --

    SemType parse_type() {
        switch (cur().kind) {
        case Tok::KwBool: take(); return SemType::boolean();
        case Tok::KwInt: take(); return SemType::integer();
        case Tok::KwReal: take(); return SemType::real();
        case Tok::KwVector: {
            take();
            expect(Tok::LBracket, "after 'vector'");
            int n = parse_dimension();
            expect(Tok::RBracket, "after vector length");
            return SemType::vector(n);
        }
        case Tok::KwMatrix: {
            take();
            expect(Tok::LBracket, "after 'matrix'");
            int m = parse_dimension();
            expect(Tok::Comma, "between matrix dimensions");
            int n = parse_dimension();
            expect(Tok::RBracket, "after matrix dimensions");
            return SemType::matrix(m, n);
        }
        default:
            fail_here(std::string("expected a type ('bool', 'int', 'real', 'vector[n]', or "
                                  "'matrix[m,n]'), got ") +
                      token_name(cur().kind));
        }
    }

    int parse_dimension() {
        const Token& t = expect(Tok::IntNum, "as a dimension");
        if (t.int_value < 1)
            fail("dimension must be a positive integer", t.span);
        return static_cast<int>(t.int_value);
    }

    std::string declare_name(const Token& t) {
        if (is_builtin_name(t.text))
            fail("name '" + t.text + "' is reserved for a builtin function", t.span);
        if (!all_names_.insert(t.text).second)
            fail("duplicate name '" + t.text + "'", t.span);
        return t.text;
    }

    void parse_declaration(Project& project) {
        switch (cur().kind) {
        case Tok::KwInput: {
            SourceSpan sp = take().span;
            const Token name_tok = expect(Tok::Ident, "after 'input'");
            std::string name = declare_name(name_tok);
            expect(Tok::Colon, "after input name");
            SemType type = parse_type();
            project.inputs.push_back({std::move(name), std::move(type), sp});
            visible_[name_tok.text] = 'i';
            return;
        }
        case Tok::KwDef: {
            SourceSpan sp = take().span;
            const Token name_tok = expect(Tok::Ident, "after 'def'");
            std::string name = declare_name(name_tok);
            expect(Tok::LParen, "after function name");
            std::vector<Param> params;
            std::unordered_set<std::string> param_names;
            if (!at(Tok::RParen)) {
                for (;;) {
                    const Token p = expect(Tok::Ident, "as a parameter name");
                    if (is_builtin_name(p.text))
                        fail("name '" + p.text + "' is reserved for a builtin function", p.span);
                    if (!param_names.insert(p.text).second)
                        fail("duplicate parameter '" + p.text + "'", p.span);
                    expect(Tok::Colon, "after parameter name");
                    params.push_back({p.text, parse_type(), p.span});
                    if (!at(Tok::Comma))
                        break;
                    take();
                }
            }
            expect(Tok::RParen, "to close the parameter list");
            std::optional<SemType> declared_return;
            if (at(Tok::ColonColon)) {
                take();
                declared_return = parse_type();
            }
            expect(Tok::Assign, "before function body");
            // Formals may shadow inputs inside the body; restore afterwards.
            std::unordered_map<std::string, char> saved = visible_;
            for (const auto& p : params)
                visible_[p.name] = 'p';
            resolving_ = true;
            ExprPtr body = parse_expression();
            resolving_ = false;
            visible_ = std::move(saved);
            project.defs.push_back({std::move(name), std::move(params), std::move(declared_return),
                                    std::move(body), sp});
            visible_[name_tok.text] = 'd';
            return;
        }
        case Tok::KwOutput: {
            SourceSpan sp = take().span;
            const Token name_tok = expect(Tok::Ident, "after 'output'");
            std::string name = declare_name(name_tok);
            expect(Tok::Assign, "after output name");
            resolving_ = true;
            ExprPtr expr = parse_expression();
            resolving_ = false;
            project.outputs.push_back({std::move(name), std::move(expr), sp});
            return;
        }
        default:
            fail_here(std::string("expected a declaration ('input', 'def', or 'output'), got ") +
                      token_name(cur().kind));
        }
    }
};

} // namespace detail

// Parse a standalone formula. Identifiers are not resolved; use
// parse_project for declaration-checked input.
inline ExprPtr parse_formula(std::string_view text) {
    detail::Parser parser(text, /*project_mode=*/false);
    return parser.parse_whole_formula();
}

// Parse a project file: one declaration per line, '#' comments. Duplicate
// and unresolved names are rejected here, before type checking.
inline Project parse_project(std::string_view text) {
    detail::Parser parser(text, /*project_mode=*/true);
    return parser.parse_project_file();
}

} // namespace flc
