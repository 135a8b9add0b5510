#pragma once

// Regularized G-optimal design over the simplex of active arms.
//
//   V(pi) = (lambda / c) I + sum_i pi_i s x_i x_i^T
//
// The solver maximizes log det V(pi). At the maximizer every arm satisfies
// x^T V^{-1} x <= d c / (d lambda + s c), which serves as the stopping certificate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "blae/core_types.hpp"

namespace blae {

struct DesignWeights {
    std::vector<double> weights;

    DesignWeights() = default;
    explicit DesignWeights(std::vector<double> w) : weights(std::move(w)) {}

    static DesignWeights uniform(std::size_t n) { return DesignWeights(std::vector<double>(n, 1.0 / static_cast<double>(n))); }

    std::size_t size() const { return weights.size(); }
    double operator[](std::size_t i) const { return weights[i]; }

    bool valid(double tol = 1e-9) const {
        if (weights.empty()) return false;
        double sum = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0) || !std::isfinite(w)) return false;
            sum += w;
        }
        return std::abs(sum - 1.0) <= tol;
    }
};

struct DesignProblem {
    Eigen::MatrixXd active_arms;  // one row per active arm
    double lambda = 1.0;
    double c = 1.0;
    double scale = 1.0;

    DesignProblem(Eigen::MatrixXd arms, double lam, double rate, double s)
        : active_arms(std::move(arms)), lambda(lam), c(rate), scale(s) {
        if (active_arms.rows() < 1) throw std::invalid_argument("DesignProblem: no active arms");
        if (active_arms.cols() < 1) throw std::invalid_argument("DesignProblem: zero dimension");
        if (!(lambda > 0.0)) throw std::invalid_argument("DesignProblem: lambda must be > 0");
        if (!(c > 0.0 && c <= 1.0)) throw std::invalid_argument("DesignProblem: c must be in (0,1]");
        if (!(scale > 0.0)) throw std::invalid_argument("DesignProblem: scale must be > 0");
    }

    std::size_t n_arms() const { return static_cast<std::size_t>(active_arms.rows()); }
    std::size_t d() const { return static_cast<std::size_t>(active_arms.cols()); }

    Eigen::MatrixXd information(const DesignWeights& pi) const {
        check(pi);
        Eigen::VectorXd w(static_cast<Eigen::Index>(pi.size()));
        for (std::size_t i = 0; i < pi.size(); ++i) w[static_cast<Eigen::Index>(i)] = scale * pi[i];
        Eigen::MatrixXd V = active_arms.transpose() * w.asDiagonal() * active_arms;
        V.diagonal().array() += lambda / c;
        return V;
    }

    void check(const DesignWeights& pi) const {
        if (pi.size() != n_arms()) throw std::invalid_argument("DesignProblem: weight/arm count mismatch");
    }
};

struct LeverageResult {
    double max_leverage = 0.0;
    Eigen::VectorXd per_arm;
};

/// per_arm[i] = x_i^T V(pi)^{-1} x_i.
inline LeverageResult leverage(const DesignProblem& problem, const DesignWeights& pi) {
    const Eigen::MatrixXd V = problem.information(pi);
    Eigen::LLT<Eigen::MatrixXd> llt(V);
    if (llt.info() != Eigen::Success) throw NumericalError("leverage: V(pi) not positive definite");
    const Eigen::MatrixXd w = llt.matrixL().solve(problem.active_arms.transpose());
    LeverageResult r;
    r.per_arm = w.colwise().squaredNorm().transpose();
    r.max_leverage = r.per_arm.maxCoeff();
    return r;
}

/// d c / (d lambda + s c): leverage certificate of the log-det maximizer.
inline double design_bound(std::size_t d, double lambda, double c, double scale) {
    const double dd = static_cast<double>(d);
    return dd * c / (dd * lambda + scale * c);
}

inline double design_bound(const DesignProblem& p) { return design_bound(p.d(), p.lambda, p.c, p.scale); }

inline double log_det_objective(const DesignProblem& problem, const DesignWeights& pi) {
    Eigen::LLT<Eigen::MatrixXd> llt(problem.information(pi));
    if (llt.info() != Eigen::Success) throw NumericalError("log_det_objective: V(pi) not positive definite");
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

class DesignConvergenceError : public std::runtime_error {
public:
    DesignConvergenceError(const std::string& what, DesignWeights best, double best_max_leverage, double bound)
        : std::runtime_error(what), best_(std::move(best)), best_max_leverage_(best_max_leverage), bound_(bound) {}

    const DesignWeights& best_iterate() const { return best_; }
    double best_max_leverage() const { return best_max_leverage_; }
    double bound() const { return bound_; }
    /// Relative excess of the best iterate over the certificate.
    double leverage_gap() const { return best_max_leverage_ / bound_ - 1.0; }

private:
    DesignWeights best_;
    double best_max_leverage_;
    double bound_;
};

struct DesignSolution {
    DesignWeights weights;
    double max_leverage = 0.0;
    double bound = 0.0;
    std::int64_t iterations = 0;
    std::vector<double> objective_history;  // log det V after each accepted iterate, starting with the initial one
};

inline std::int64_t default_design_max_iters(std::size_t n_arms, std::size_t d) {
    return static_cast<std::int64_t>(10 * n_arms * d);
}

namespace detail {

// Maximize sum_k log(1 + g nu_k) over g in [0, g_max]. The objective is concave on the
// domain, so the derivative is monotone and bisection on it finds the maximizer.
inline double concave_line_search(const Eigen::VectorXd& nu, double g_max) {
    auto slope = [&](double g) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < nu.size(); ++k) s += nu[k] / (1.0 + g * nu[k]);
        return s;
    };
    if (!(slope(0.0) > 0.0)) return 0.0;
    if (slope(g_max) >= 0.0) return g_max;
    double lo = 0.0;
    double hi = g_max;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * g_max; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (slope(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Frank-Wolfe with away steps on log det V(pi), stopping once max leverage <= (1 + tol) * bound.
/// Throws DesignConvergenceError if the certificate is not reached within max_iters.
inline DesignSolution solve_design_traced(const DesignProblem& problem, double tol, std::int64_t max_iters) {
    if (!(tol >= 0.0)) throw std::invalid_argument("solve_design: tol must be >= 0");
    if (max_iters < 1) throw std::invalid_argument("solve_design: max_iters must be >= 1");

    const std::size_t n = problem.n_arms();
    const Eigen::Index d = static_cast<Eigen::Index>(problem.d());
    const double bound = design_bound(problem);
    const double target = (1.0 + tol) * bound;
    const double reg = problem.lambda / problem.c;
    const Eigen::MatrixXd& X = problem.active_arms;

    DesignSolution sol;
    sol.bound = bound;
    sol.weights = DesignWeights::uniform(n);
    if (n == 1) {
        sol.weights.weights[0] = 1.0;
        sol.max_leverage = leverage(problem, sol.weights).max_leverage;
        return sol;
    }

    std::vector<double>& pi = sol.weights.weights;
    DesignWeights best = sol.weights;
    double best_lev = std::numeric_limits<double>::infinity();

    for (std::int64_t k = 0;; ++k) {
        Eigen::MatrixXd V = problem.information(sol.weights);
        Eigen::LLT<Eigen::MatrixXd> llt(V);
        if (llt.info() != Eigen::Success) throw NumericalError("solve_design: V(pi) not positive definite");
        const Eigen::MatrixXd L = llt.matrixL();
        const Eigen::MatrixXd W = L.triangularView<Eigen::Lower>().solve(X.transpose());
        const Eigen::VectorXd g = W.colwise().squaredNorm().transpose();
        sol.objective_history.push_back(2.0 * L.diagonal().array().log().sum());

        // Toward vertex: largest leverage. Away vertex: smallest leverage among supported arms.
        std::size_t toward = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (g[static_cast<Eigen::Index>(i)] > g[static_cast<Eigen::Index>(toward)]) toward = i;
        }
        const double max_lev = g[static_cast<Eigen::Index>(toward)];
        if (max_lev < best_lev) {
            best_lev = max_lev;
            best = sol.weights;
        }
        sol.iterations = k;
        if (max_lev <= target) {
            sol.max_leverage = max_lev;
            return sol;
        }
        if (k >= max_iters) break;

        std::size_t away = n;
        double mean_lev = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mean_lev += pi[i] * g[static_cast<Eigen::Index>(i)];
            if (pi[i] > 0.0 && (away == n || g[static_cast<Eigen::Index>(i)] < g[static_cast<Eigen::Index>(away)])) away = i;
        }
        const double toward_gap = max_lev - mean_lev;
        const double away_gap = mean_lev - g[static_cast<Eigen::Index>(away)];
        const bool use_away = away != toward && away_gap > toward_gap && pi[away] < 1.0;

        // Step direction D = W_j - V (toward) or V - W_a (away), W_j = reg I + s x_j x_j^T.
        // With w = L^{-1} x_j, the whitened direction is reg L^{-1} L^{-T} + s w w^T - I (negated for away).
        const Eigen::MatrixXd Linv = L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(d, d));
        const Eigen::MatrixXd reg_part = reg * (Linv * Linv.transpose());
        auto exact_step = [&](std::size_t j, bool away_dir, double g_max) {
            Eigen::MatrixXd M = reg_part;
            const Eigen::VectorXd wj = W.col(static_cast<Eigen::Index>(j));
            M.noalias() += problem.scale * wj * wj.transpose();
            M.diagonal().array() -= 1.0;
            if (away_dir) M = -M;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M, Eigen::EigenvaluesOnly);
            if (eig.info() != Eigen::Success || !eig.eigenvalues().allFinite()) return -1.0;
            return detail::concave_line_search(eig.eigenvalues(), g_max);
        };

        bool away_taken = false;
        double step = 0.0;
        if (use_away) {
            step = exact_step(away, true, pi[away] / (1.0 - pi[away]));
            away_taken = step > 0.0;
        }
        if (!away_taken) {
            step = exact_step(toward, false, 1.0);
            if (!(step > 0.0)) step = 2.0 / (static_cast<double>(k) + 2.0);
        }

        if (away_taken) {
            const double g_max = pi[away] / (1.0 - pi[away]);
            for (double& w : pi) w *= (1.0 + step);
            pi[away] -= step;
            // Drop step: the away vertex leaves the support exactly.
            if (step >= g_max * (1.0 - 1e-12)) pi[away] = 0.0;
            pi[away] = std::max(0.0, pi[away]);
        } else {
            for (double& w : pi) w *= (1.0 - step);
            pi[toward] += step;
        }
        const double total = std::accumulate(pi.begin(), pi.end(), 0.0);
        for (double& w : pi) w /= total;
    }

    throw DesignConvergenceError("solve_design: certificate not reached within " + std::to_string(max_iters) + " iterations",
                                 best, best_lev, bound);
}

inline DesignWeights solve_design(const DesignProblem& problem, double tol = 1e-3, std::int64_t max_iters = 0) {
    if (max_iters == 0) max_iters = default_design_max_iters(problem.n_arms(), problem.d());
    return solve_design_traced(problem, tol, max_iters).weights;
}

}  // namespace blae
