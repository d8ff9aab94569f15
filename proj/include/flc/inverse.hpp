#pragma once

#include <vector>

namespace flc {

// Closed-form adjugate inverse over an abstract scalar algebra. The tape
// lowering and the AST evaluator both instantiate this, so they perform the
// exact same operation sequence and agree to the last bit; an independent
// elimination-based check lives in the test suite.
//
// Ops must provide:
//   using value_type = ...;
//   value_type add(value_type, value_type);
//   value_type sub(value_type, value_type);
//   value_type mul(value_type, value_type);
//   value_type div(value_type, value_type);
//   value_type neg(value_type);
//   value_type one();
template <class Ops>
struct AdjugateInverse {
    using V = typename Ops::value_type;
    Ops& ops;

    // First-row expansion; index lists select the submatrix of a (n x n,
    // row-major). Signs alternate by folding them into the add/sub chain.
    V det(const std::vector<V>& a, int n, const std::vector<int>& rows,
          const std::vector<int>& cols) {
        const int k = static_cast<int>(rows.size());
        auto at = [&](int r, int c) { return a[rows[r] * n + cols[c]]; };
        if (k == 1)
            return at(0, 0);
        if (k == 2)
            return ops.sub(ops.mul(at(0, 0), at(1, 1)), ops.mul(at(0, 1), at(1, 0)));
        std::vector<int> sub_rows(rows.begin() + 1, rows.end());
        V acc{};
        for (int j = 0; j < k; ++j) {
            std::vector<int> sub_cols;
            sub_cols.reserve(k - 1);
            for (int c = 0; c < k; ++c)
                if (c != j)
                    sub_cols.push_back(cols[c]);
            V term = ops.mul(at(0, j), det(a, n, sub_rows, sub_cols));
            if (j == 0)
                acc = term;
            else if (j % 2 == 1)
                acc = ops.sub(acc, term);
            else
                acc = ops.add(acc, term);
        }
        return acc;
    }

    V det(const std::vector<V>& a, int n) {
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i)
            idx[i] = i;
        return det(a, n, idx, idx);
    }

    // Returns the row-major inverse entries; det_out receives the
    // determinant handle for the caller's singularity guard.
    std::vector<V> inverse(const std::vector<V>& a, int n, V& det_out) {
        det_out = det(a, n);
        V inv_det = ops.div(ops.one(), det_out);
        std::vector<V> out(n * n);
        if (n == 1) {
            out[0] = inv_det;
            return out;
        }
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                std::vector<int> rows;
                std::vector<int> cols;
                for (int r = 0; r < n; ++r)
                    if (r != i)
                        rows.push_back(r);
                for (int c = 0; c < n; ++c)
                    if (c != j)
                        cols.push_back(c);
                V minor = det(a, n, rows, cols);
                V cof = ((i + j) % 2 == 0) ? minor : ops.neg(minor);
                out[j * n + i] = ops.mul(cof, inv_det); // adjugate transposes
            }
        }
        return out;
    }
};

// Plain double instantiation, used by the AST evaluator.
struct DoubleOps {
    using value_type = double;
    double add(double a, double b) { return a + b; }
    double sub(double a, double b) { return a - b; }
    double mul(double a, double b) { return a * b; }
    double div(double a, double b) { return a / b; }
    double neg(double a) { return -a; }
    double one() { return 1.0; }
};

} // namespace flc
