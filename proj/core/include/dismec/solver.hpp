/*
 * Copyright 2026 the dismec-tools authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <span>
#include <vector>

#include "dismec/types.hpp"

namespace dismec {

/// Binary labels for one one-vs-rest subproblem, stored as the sorted row ids
/// of the positive class; every other row is implicitly -1. A view: the span
/// must outlive the solve that uses it.
struct SignVector {
    std::span<const index_t> positives;
    index_t n_rows = 0;

    double sign(index_t row) const;  // +1 or -1, O(log |positives|)
};

struct SolverConfig {
    double C = 1.0;        // loss/regularizer trade-off
    double eps = 0.01;     // stop when ||g|| <= eps * ||g(w0)||
    int max_outer_iter = 100;
    int max_cg_iter = 200;
    double cg_rtol = 0.1;  // inner CG residual tolerance, relative to ||g||

    void validate() const;
};

struct SolverResult {
    std::vector<double> w;
    double objective = 0.0;
    double grad_norm = 0.0;
    int outer_iters = 0;
    bool converged = false;
};

/// f(w) = (1/2) w'w + C * sum_i max(0, 1 - s_i w'x_i)^2.
///
/// The regularizer carries the 1/2 factor so that the gradient below is
/// exactly w + 2C X_I'(X_I w - s_I).
double objective(std::span<const double> w, const CsrMatrix& X, const SignVector& s, double C);

/// g(w) = w + 2C X_I'(X_I w - s_I), where I = {i : 1 - s_i w'x_i > 0}
/// (strict inequality) is recomputed at the given w.
std::vector<double> gradient(std::span<const double> w, const CsrMatrix& X, const SignVector& s,
                             double C);

/// Generalized-Hessian product H(w) v = v + 2C X_I'(X_I v) with I taken at w.
/// Never materializes H.
std::vector<double> hessian_vec(std::span<const double> w, std::span<const double> v,
                                const CsrMatrix& X, const SignVector& s, double C);

/// Minimizes `objective` by a primal trust-region Newton method with inner
/// conjugate-gradient subproblem solves. Deterministic and pure: safe to run
/// many instances in parallel over a shared read-only X.
///
/// Starts from w0 when given, else from zero. Converged means the gradient
/// norm fell to eps times its value at the start; otherwise the best iterate
/// seen is returned with converged=false. Accepted iterates never increase
/// the objective.
SolverResult solve(const CsrMatrix& X, const SignVector& s, const SolverConfig& cfg,
                   std::span<const double> w0 = {});

}  // namespace dismec
