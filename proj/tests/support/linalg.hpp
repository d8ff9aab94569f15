#pragma once

// Test-only dense linear algebra, independent of the library's adjugate
// code path: row-major doubles, Gauss-Jordan with partial pivoting.

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace testlin {

using Mat = std::vector<double>;

inline Mat identity(int n) {
    Mat out(n * n, 0.0);
    for (int i = 0; i < n; ++i)
        out[i * n + i] = 1.0;
    return out;
}

inline Mat matmul(int m, int k, int n, const Mat& a, const Mat& b) {
    Mat out(m * n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int l = 0; l < k; ++l)
                acc += a[i * k + l] * b[l * n + j];
            out[i * n + j] = acc;
        }
    return out;
}

inline Mat transpose(int m, int n, const Mat& a) {
    Mat out(n * m, 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[j * m + i] = a[i * n + j];
    return out;
}

// Gauss-Jordan inverse with partial pivoting; returns false when singular.
inline bool gauss_inverse(int n, Mat a, Mat& out) {
    out = identity(n);
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::fabs(a[r * n + col]) > std::fabs(a[pivot * n + col]))
                pivot = r;
        if (std::fabs(a[pivot * n + col]) < 1e-300)
            return false;
        if (pivot != col)
            for (int c = 0; c < n; ++c) {
                std::swap(a[pivot * n + c], a[col * n + c]);
                std::swap(out[pivot * n + c], out[col * n + c]);
            }
        const double inv_p = 1.0 / a[col * n + col];
        for (int c = 0; c < n; ++c) {
            a[col * n + c] *= inv_p;
            out[col * n + c] *= inv_p;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col)
                continue;
            const double f = a[r * n + col];
            if (f == 0.0)
                continue;
            for (int c = 0; c < n; ++c) {
                a[r * n + c] -= f * a[col * n + c];
                out[r * n + c] -= f * out[col * n + c];
            }
        }
    }
    return true;
}

inline double max_abs_diff(const Mat& a, const Mat& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        m = std::fmax(m, std::fabs(a[i] - b[i]));
    return m;
}

inline double max_abs(const Mat& a) {
    double m = 0.0;
    for (double x : a)
        m = std::fmax(m, std::fabs(x));
    return m;
}

// Random orthogonal matrix via Gram-Schmidt on a random full-rank matrix.
inline Mat random_orthogonal(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (;;) {
        Mat q(n * n);
        for (double& x : q)
            x = dist(rng);
        bool ok = true;
        for (int i = 0; i < n && ok; ++i) {
            for (int j = 0; j < i; ++j) {
                double dot = 0.0;
                for (int c = 0; c < n; ++c)
                    dot += q[i * n + c] * q[j * n + c];
                for (int c = 0; c < n; ++c)
                    q[i * n + c] -= dot * q[j * n + c];
            }
            double norm = 0.0;
            for (int c = 0; c < n; ++c)
                norm += q[i * n + c] * q[i * n + c];
            norm = std::sqrt(norm);
            if (norm < 1e-3) {
                ok = false;
                break;
            }
            for (int c = 0; c < n; ++c)
                q[i * n + c] /= norm;
        }
        if (ok)
            return q;
    }
}

// SPD matrix Q^T diag(d) Q with eigenvalues in [lo, hi]; the condition
// number is bounded by hi/lo by construction.
inline Mat random_spd(int n, std::mt19937_64& rng, double lo = 0.5, double hi = 2.0) {
    Mat q = random_orthogonal(n, rng);
    std::uniform_real_distribution<double> dist(lo, hi);
    Mat d(n * n, 0.0);
    for (int i = 0; i < n; ++i)
        d[i * n + i] = dist(rng);
    Mat qt = transpose(n, n, q);
    Mat out = matmul(n, n, n, qt, matmul(n, n, n, d, q));
    // force exact symmetry against rounding
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j) {
            const double avg = 0.5 * (out[i * n + j] + out[j * n + i]);
            out[i * n + j] = avg;
            out[j * n + i] = avg;
        }
    return out;
}

// Well-conditioned general (not necessarily symmetric) matrix: orthogonal
// times a mild diagonal.
inline Mat random_well_conditioned(int n, std::mt19937_64& rng) {
    Mat q = random_orthogonal(n, rng);
    std::uniform_real_distribution<double> dist(0.5, 2.0);
    Mat d(n * n, 0.0);
    for (int i = 0; i < n; ++i)
        d[i * n + i] = dist(rng);
    Mat p = random_orthogonal(n, rng);
    return matmul(n, n, n, q, matmul(n, n, n, d, p));
}

// Determinant by elimination, for leading-principal-minor positivity.
inline double det_gauss(int n, Mat a) {
    double det = 1.0;
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::fabs(a[r * n + col]) > std::fabs(a[pivot * n + col]))
                pivot = r;
        if (std::fabs(a[pivot * n + col]) == 0.0)
            return 0.0;
        if (pivot != col) {
            for (int c = 0; c < n; ++c)
                std::swap(a[pivot * n + c], a[col * n + c]);
            det = -det;
        }
        det *= a[col * n + col];
        for (int r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / a[col * n + col];
            for (int c = col; c < n; ++c)
                a[r * n + c] -= f * a[col * n + c];
        }
    }
    return det;
}

inline double leading_minor(int n, const Mat& a, int k) {
    Mat sub(k * k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            sub[i * k + j] = a[i * n + j];
    return det_gauss(k, sub);
}

} // namespace testlin
