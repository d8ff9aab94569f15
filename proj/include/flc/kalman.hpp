#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "flc/compile.hpp"
#include "flc/exec.hpp"

namespace flc {

// Linear-Gaussian model for the covariance recursion. Only the covariance
// flow is compiled here; it is the part built from the matrix formulas.
struct KalmanModel {
    int n = 1;             // state dimension, <= 4
    int m = 1;             // observation dimension, <= 4
    std::vector<double> F; // n x n transition
    std::vector<double> Q; // n x n process noise, SPD
    std::vector<double> H; // m x n observation
    std::vector<double> R; // m x m measurement noise, SPD
};

namespace detail {

inline void check_symmetric(const std::vector<double>& a, int n, const char* name) {
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::fabs(a[i * n + j] - a[j * n + i]) > 1e-12)
                throw CompileError(std::string(name) + " must be symmetric");
}

inline std::string dim2(int r, int c) {
    return "matrix[" + std::to_string(r) + "," + std::to_string(c) + "]";
}

} // namespace detail

// Covariance predict and information-form update, each compiled through the
// full pipeline. The update is written directly in the (q^-1 + h)^-1 shape,
// with h = H^T R^-1 H assembled inside the formula.
struct KalmanStep {
    KalmanModel model;
    Compiled predict; // inputs f, p, q  -> p_pred = f*p*f^T + q
    Compiled update;  // inputs q, h, r  -> p_next = (q^-1 + h^T*r^-1*h)^-1

    Value run_predict(const Value& p) const {
        Bindings b{{"f", Value::matrix(model.n, model.n, model.F)},
                   {"q", Value::matrix(model.n, model.n, model.Q)},
                   {"p", p}};
        return eval_tape(predict.tape, b)[0];
    }

    Value run_update(const Value& p_pred) const {
        Bindings b{{"q", p_pred},
                   {"h", Value::matrix(model.m, model.n, model.H)},
                   {"r", Value::matrix(model.m, model.m, model.R)}};
        return eval_tape(update.tape, b)[0];
    }
};

inline KalmanStep build_kalman_step(const KalmanModel& model) {
    if (model.n < 1 || model.n > 4)
        throw CompileError("kalman: state dimension must be 1..4");
    if (model.m < 1 || model.m > 4)
        throw CompileError("kalman: observation dimension must be 1..4");
    if (static_cast<int>(model.F.size()) != model.n * model.n ||
        static_cast<int>(model.Q.size()) != model.n * model.n ||
        static_cast<int>(model.H.size()) != model.m * model.n ||
        static_cast<int>(model.R.size()) != model.m * model.m)
        throw CompileError("kalman: matrix sizes do not match the declared dimensions");
    detail::check_symmetric(model.Q, model.n, "Q");
    detail::check_symmetric(model.R, model.m, "R");

    const std::string nn = detail::dim2(model.n, model.n);
    const std::string predict_text = "input f: " + nn + "\n" +      //
                                     "input p: " + nn + "\n" +      //
                                     "input q: " + nn + "\n" +      //
                                     "output p_pred = f * p * f^T + q\n";
    const std::string update_text = "input q: " + nn + "\n" +                        //
                                    "input h: " + detail::dim2(model.m, model.n) + "\n" + //
                                    "input r: " + detail::dim2(model.m, model.m) + "\n" + //
                                    "output p_next = (q^-1 + h^T * r^-1 * h)^-1\n";

    KalmanStep step;
    step.model = model;
    step.predict = compile_text(predict_text);
    step.update = compile_text(update_text);
    return step;
}

} // namespace flc
