#pragma once

#include <string>
#include <vector>

namespace flc {

// Semantic type of an expression. Every dimension is a compile-time
// constant, fixed by the project file that declares the inputs.
struct SemType {
    enum class Kind { Bool, Int, Real, Vector, Matrix, Function };

    Kind kind = Kind::Real;
    int rows = 0; // Vector: length; Matrix: row count
    int cols = 0; // Matrix: column count
    // Function signature: parameter types followed by the return type.
    // Function values exist only at compile time (def names).
    std::vector<SemType> signature;

    static SemType boolean() { return {Kind::Bool, 0, 0, {}}; }
    static SemType integer() { return {Kind::Int, 0, 0, {}}; }
    static SemType real() { return {Kind::Real, 0, 0, {}}; }
    static SemType vector(int n) { return {Kind::Vector, n, 0, {}}; }
    static SemType matrix(int m, int n) { return {Kind::Matrix, m, n, {}}; }
    static SemType function(std::vector<SemType> params, SemType ret) {
        SemType t{Kind::Function, 0, 0, std::move(params)};
        t.signature.push_back(std::move(ret));
        return t;
    }

    bool is_scalar() const { return kind == Kind::Bool || kind == Kind::Int || kind == Kind::Real; }
    bool is_numeric_scalar() const { return kind == Kind::Int || kind == Kind::Real; }
    bool is_shaped() const { return kind == Kind::Vector || kind == Kind::Matrix; }
    bool is_function() const { return kind == Kind::Function; }

    // Number of scalar slots a value of this type occupies, row-major.
    int element_count() const {
        switch (kind) {
        case Kind::Vector: return rows;
        case Kind::Matrix: return rows * cols;
        case Kind::Function: return 0;
        default: return 1;
        }
    }

    size_t param_count() const { return signature.empty() ? 0 : signature.size() - 1; }
    const SemType& param(size_t i) const { return signature[i]; }
    const SemType& return_type() const { return signature.back(); }

    friend bool operator==(const SemType& a, const SemType& b) {
        if (a.kind != b.kind)
            return false;
        switch (a.kind) {
        case Kind::Vector: return a.rows == b.rows;
        case Kind::Matrix: return a.rows == b.rows && a.cols == b.cols;
        case Kind::Function: return a.signature == b.signature;
        default: return true;
        }
    }
    friend bool operator!=(const SemType& a, const SemType& b) { return !(a == b); }
};

inline std::string to_string(const SemType& t) {
    switch (t.kind) {
    case SemType::Kind::Bool: return "bool";
    case SemType::Kind::Int: return "int";
    case SemType::Kind::Real: return "real";
    case SemType::Kind::Vector: return "vector[" + std::to_string(t.rows) + "]";
    case SemType::Kind::Matrix:
        return "matrix[" + std::to_string(t.rows) + "," + std::to_string(t.cols) + "]";
    case SemType::Kind::Function: {
        std::string s = "function(";
        for (size_t i = 0; i < t.param_count(); ++i) {
            if (i)
                s += ", ";
            s += to_string(t.param(i));
        }
        s += ") -> " + to_string(t.return_type());
        return s;
    }
    }
    return "?";
}

} // namespace flc
