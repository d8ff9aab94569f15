#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "flc/numfmt.hpp"
#include "flc/types.hpp"

namespace flc {

// Runtime datum. Vectors and matrices are dense row-major doubles.
struct Value {
    enum class Tag { Bool, Int, Real, Vector, Matrix };

    Tag tag = Tag::Real;
    bool b = false;
    std::int64_t i = 0;
    double r = 0.0;
    int rows = 0;
    int cols = 0;
    std::vector<double> elems;

    static Value boolean(bool v) {
        Value out;
        out.tag = Tag::Bool;
        out.b = v;
        return out;
    }
    static Value integer(std::int64_t v) {
        Value out;
        out.tag = Tag::Int;
        out.i = v;
        return out;
    }
    static Value real(double v) {
        Value out;
        out.tag = Tag::Real;
        out.r = v;
        return out;
    }
    static Value vector(std::vector<double> v) {
        Value out;
        out.tag = Tag::Vector;
        out.rows = static_cast<int>(v.size());
        out.elems = std::move(v);
        return out;
    }
    static Value matrix(int m, int n, std::vector<double> v) {
        Value out;
        out.tag = Tag::Matrix;
        out.rows = m;
        out.cols = n;
        out.elems = std::move(v);
        return out;
    }

    bool is_scalar() const { return tag == Tag::Bool || tag == Tag::Int || tag == Tag::Real; }

    // Scalar view; a single-element vector/matrix reads as its element,
    // matching the 1x1 demotion rule in scalar contexts.
    double scalar() const {
        switch (tag) {
        case Tag::Bool: return b ? 1.0 : 0.0;
        case Tag::Int: return static_cast<double>(i);
        case Tag::Vector:
        case Tag::Matrix: return elems[0];
        default: return r;
        }
    }

    double at(int r_, int c_) const { return elems[r_ * cols + c_]; }

    bool matches(const SemType& t) const {
        switch (t.kind) {
        case SemType::Kind::Bool: return tag == Tag::Bool;
        case SemType::Kind::Int: return tag == Tag::Int;
        case SemType::Kind::Real: return tag == Tag::Real;
        case SemType::Kind::Vector: return tag == Tag::Vector && rows == t.rows;
        case SemType::Kind::Matrix:
            return tag == Tag::Matrix && rows == t.rows && cols == t.cols;
        default: return false;
        }
    }

    SemType type() const {
        switch (tag) {
        case Tag::Bool: return SemType::boolean();
        case Tag::Int: return SemType::integer();
        case Tag::Real: return SemType::real();
        case Tag::Vector: return SemType::vector(rows);
        case Tag::Matrix: return SemType::matrix(rows, cols);
        }
        return SemType::real();
    }
};

using Bindings = std::unordered_map<std::string, Value>;

// Stable text form: 17 significant digits for reals, [..] for vectors,
// [[..],[..]] for matrices.
inline std::string to_string(const Value& v) {
    switch (v.tag) {
    case Value::Tag::Bool:
        return v.b ? "true" : "false";
    case Value::Tag::Int:
        return std::to_string(v.i);
    case Value::Tag::Real:
        return format_double_17(v.r);
    case Value::Tag::Vector: {
        std::string s = "[";
        for (int k = 0; k < v.rows; ++k) {
            if (k)
                s += ", ";
            s += format_double_17(v.elems[k]);
        }
        return s + "]";
    }
    case Value::Tag::Matrix: {
        std::string s = "[";
        for (int r = 0; r < v.rows; ++r) {
            if (r)
                s += ", ";
            s += "[";
            for (int c = 0; c < v.cols; ++c) {
                if (c)
                    s += ", ";
                s += format_double_17(v.at(r, c));
            }
            s += "]";
        }
        return s + "]";
    }
    }
    return "?";
}

} // namespace flc
