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

#include "dismec/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace dismec {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double r = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) r += a[i] * b[i];
    return r;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double sparse_dot(const CsrMatrix& X, index_t row, std::span<const double> v) {
    auto idx = X.row_indices(row);
    auto val = X.row_values(row);
    double r = 0.0;
    for (std::size_t p = 0; p < idx.size(); ++p) r += val[p] * v[idx[p]];
    return r;
}

void sparse_axpy(const CsrMatrix& X, index_t row, double alpha, std::span<double> out) {
    auto idx = X.row_indices(row);
    auto val = X.row_values(row);
    for (std::size_t p = 0; p < idx.size(); ++p) out[idx[p]] += alpha * val[p];
}

void check_dims(const CsrMatrix& X, const SignVector& s, std::span<const double> w) {
    if (w.size() != X.cols())
        throw std::invalid_argument("solver: w has dimension " + std::to_string(w.size()) +
                                    ", expected " + std::to_string(X.cols()));
    if (s.n_rows != X.rows())
        throw std::invalid_argument("solver: sign vector rows != matrix rows");
}

// One binary subproblem: margins, active set, and the three oracles the
// trust-region loop needs. X is shared read-only; everything mutable lives
// here, per invocation.
class SquaredHingeProblem {
public:
    SquaredHingeProblem(const CsrMatrix& X, const SignVector& s, double C)
        : X_(X), C_(C), sign_(X.rows(), -1.0), z_(X.rows()) {
        for (index_t p : s.positives) sign_[p] = 1.0;
        active_.reserve(X.rows());
    }

    // f(w); refreshes the margin cache z = Xw.
    double fun(std::span<const double> w) {
        double f = 0.5 * dot(w, w);
        double loss = 0.0;
        for (index_t i = 0; i < X_.rows(); ++i) {
            z_[i] = sparse_dot(X_, i, w);
            double m = 1.0 - sign_[i] * z_[i];
            if (m > 0.0) loss += m * m;
        }
        return f + C_ * loss;
    }

    // g = w + 2C X_I'(X_I w - s_I); rebuilds the active set from the cached
    // margins, so call fun(w) first.
    void grad(std::span<const double> w, std::span<double> g) {
        active_.clear();
        for (index_t i = 0; i < X_.rows(); ++i)
            if (1.0 - sign_[i] * z_[i] > 0.0) active_.push_back(i);
        std::copy(w.begin(), w.end(), g.begin());
        for (index_t i : active_) sparse_axpy(X_, i, 2.0 * C_ * (z_[i] - sign_[i]), g);
    }

    // Hv = v + 2C X_I'(X_I v) with I frozen at the last grad() call.
    void Hv(std::span<const double> v, std::span<double> out) {
        std::copy(v.begin(), v.end(), out.begin());
        for (index_t i : active_) {
            double xi_v = sparse_dot(X_, i, v);
            sparse_axpy(X_, i, 2.0 * C_ * xi_v, out);
        }
    }

private:
    const CsrMatrix& X_;
    double C_;
    std::vector<double> sign_;
    std::vector<double> z_;
    std::vector<index_t> active_;
};

// Trust-region CG (Steihaug): minimizes the quadratic model within radius
// `delta`, stopping on the relative residual tolerance or at the boundary.
// Returns the residual r = -g - Hs alongside the step.
int trust_region_cg(SquaredHingeProblem& prob, double delta, double cg_rtol, int max_cg_iter,
                    std::span<const double> g, std::span<double> s, std::span<double> r) {
    const std::size_t n = g.size();
    std::vector<double> d(n), Hd(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = 0.0;
        r[i] = -g[i];
        d[i] = r[i];
    }
    const double cgtol = cg_rtol * norm2(g);
    double rTr = dot(r, r);
    int cg_iter = 0;
    while (cg_iter < max_cg_iter) {
        if (norm2(r) <= cgtol) break;
        ++cg_iter;
        prob.Hv(d, Hd);
        double alpha = rTr / dot(d, Hd);
        axpy(alpha, d, s);
        if (norm2(s) > delta) {
            // Retreat and advance to the boundary intersection instead.
            axpy(-alpha, d, s);
            double std_ = dot(s, d);
            double sts = dot(s, s);
            double dtd = dot(d, d);
            double dsq = delta * delta;
            double rad = std::sqrt(std_ * std_ + dtd * (dsq - sts));
            double tau = std_ >= 0 ? (dsq - sts) / (std_ + rad) : (rad - std_) / dtd;
            axpy(tau, d, s);
            axpy(-tau, Hd, r);
            break;
        }
        axpy(-alpha, Hd, r);
        double rnew = dot(r, r);
        double beta = rnew / rTr;
        for (std::size_t i = 0; i < n; ++i) d[i] = r[i] + beta * d[i];
        rTr = rnew;
    }
    return cg_iter;
}

}  // namespace

double SignVector::sign(index_t row) const {
    return std::binary_search(positives.begin(), positives.end(), row) ? 1.0 : -1.0;
}

void SolverConfig::validate() const {
    if (!(C > 0.0)) throw std::invalid_argument("solver config: C must be > 0");
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("solver config: eps must be in (0,1)");
    if (max_outer_iter < 1 || max_cg_iter < 1)
        throw std::invalid_argument("solver config: iteration caps must be >= 1");
    if (!(cg_rtol > 0.0)) throw std::invalid_argument("solver config: cg_rtol must be > 0");
}

double objective(std::span<const double> w, const CsrMatrix& X, const SignVector& s, double C) {
    check_dims(X, s, w);
    SquaredHingeProblem prob(X, s, C);
    return prob.fun(w);
}

std::vector<double> gradient(std::span<const double> w, const CsrMatrix& X, const SignVector& s,
                             double C) {
    check_dims(X, s, w);
    SquaredHingeProblem prob(X, s, C);
    prob.fun(w);
    std::vector<double> g(w.size());
    prob.grad(w, g);
    return g;
}

std::vector<double> hessian_vec(std::span<const double> w, std::span<const double> v,
                                const CsrMatrix& X, const SignVector& s, double C) {
    check_dims(X, s, w);
    if (v.size() != w.size()) throw std::invalid_argument("solver: v/w dimension mismatch");
    SquaredHingeProblem prob(X, s, C);
    prob.fun(w);
    std::vector<double> g(w.size()), out(w.size());
    prob.grad(w, g);  // freezes the active set at w
    prob.Hv(v, out);
    return out;
}

SolverResult solve(const CsrMatrix& X, const SignVector& s, const SolverConfig& cfg,
                   std::span<const double> w0) {
    cfg.validate();
    const std::size_t n = X.cols();
    if (s.n_rows != X.rows())
        throw std::invalid_argument("solver: sign vector rows != matrix rows");
    if (!w0.empty() && w0.size() != n)
        throw std::invalid_argument("solver: warm start has wrong dimension");

    // Trust-region acceptance and radius-update constants.
    constexpr double eta0 = 1e-4, eta1 = 0.25, eta2 = 0.75;
    constexpr double sigma1 = 0.25, sigma2 = 0.5, sigma3 = 4.0;

    SquaredHingeProblem prob(X, s, cfg.C);

    SolverResult res;
    res.w.assign(n, 0.0);
    if (!w0.empty()) std::copy(w0.begin(), w0.end(), res.w.begin());
    std::vector<double> g(n), step(n), r(n), w_new(n);

    double f = prob.fun(res.w);
    prob.grad(res.w, g);
    double gnorm0 = norm2(g);
    double gnorm = gnorm0;
    double delta = gnorm0;  // initial radius

    if (gnorm <= cfg.eps * gnorm0 || gnorm0 == 0.0) {
        res.objective = f;
        res.grad_norm = gnorm;
        res.outer_iters = 0;
        res.converged = true;
        return res;
    }

    int accepted = 0;
    // Rejected steps shrink the radius geometrically, so cap total attempts
    // well above the outer limit rather than looping unbounded.
    int attempts_left = cfg.max_outer_iter * 32;
    while (accepted < cfg.max_outer_iter && attempts_left-- > 0) {
        trust_region_cg(prob, delta, cfg.cg_rtol, cfg.max_cg_iter, g, step, r);

        std::copy(res.w.begin(), res.w.end(), w_new.begin());
        axpy(1.0, step, w_new);

        double gs = dot(g, step);
        double prered = -0.5 * (gs - dot(step, r));
        double fnew = prob.fun(w_new);  // margin cache now follows w_new
        double actred = f - fnew;
        double snorm = norm2(step);

        if (accepted == 0) delta = std::min(delta, snorm);

        double alpha = (fnew - f - gs <= 0) ? sigma3
                                            : std::max(sigma1, -0.5 * (gs / (fnew - f - gs)));
        if (actred < eta0 * prered)
            delta = std::min(std::max(alpha, sigma1) * snorm, sigma2 * delta);
        else if (actred < eta1 * prered)
            delta = std::max(sigma1 * delta, std::min(alpha * snorm, sigma2 * delta));
        else if (actred < eta2 * prered)
            delta = std::max(sigma1 * delta, std::min(alpha * snorm, sigma3 * delta));
        else
            delta = std::max(delta, std::min(alpha * snorm, sigma3 * delta));

        if (actred > eta0 * prered) {
            ++accepted;
            res.w.swap(w_new);
            f = fnew;
            prob.grad(res.w, g);
            gnorm = norm2(g);
            if (gnorm <= cfg.eps * gnorm0) break;
        }
        // On rejection g and the active set still describe res.w; only the
        // margin cache is stale, and nothing reads it before the next fun().

        if (std::fabs(actred) <= 0 && prered <= 0) break;
        if (std::fabs(actred) <= 1e-12 * std::fabs(f) && std::fabs(prered) <= 1e-12 * std::fabs(f))
            break;
    }

    res.objective = f;
    res.grad_norm = gnorm;
    res.outer_iters = accepted;
    res.converged = gnorm <= cfg.eps * gnorm0;
    return res;
}

}  // namespace dismec
