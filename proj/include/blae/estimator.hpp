#pragma once

// Batch-wise regularized least squares. Each batch's estimate uses only that batch's samples.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "blae/core_types.hpp"

namespace blae {

/// H = lambda I + sum x x^T and b = sum x r over one batch.
struct BatchData {
    Eigen::MatrixXd H;
    Eigen::VectorXd b;
    std::int64_t n_pulls = 0;
    double lambda = 0.0;

    std::size_t d() const { return static_cast<std::size_t>(b.size()); }
};

struct Estimate {
    Eigen::VectorXd theta_hat;
    std::size_t best_arm_index = 0;  // position within the active rows used
};

struct Pull {
    Eigen::VectorXd arm;
    double reward = 0.0;
};

/// Incremental form of accumulate(); summation follows pull order.
class BatchAccumulator {
public:
    BatchAccumulator(std::size_t d, double lambda) {
        if (!(lambda > 0.0)) throw std::invalid_argument("BatchAccumulator: lambda must be > 0");
        const auto n = static_cast<Eigen::Index>(d);
        data_.H = lambda * Eigen::MatrixXd::Identity(n, n);
        data_.b = Eigen::VectorXd::Zero(n);
        data_.lambda = lambda;
    }

    template <typename Vec>
    void add(const Vec& x, double reward) {
        const Eigen::Index d = data_.b.size();
        if (x.size() != d) throw std::invalid_argument("BatchAccumulator: dimension mismatch");
        for (Eigen::Index j = 0; j < d; ++j) {
            for (Eigen::Index i = 0; i < d; ++i) data_.H(i, j) += x[i] * x[j];
        }
        for (Eigen::Index i = 0; i < d; ++i) data_.b[i] += x[i] * reward;
        ++data_.n_pulls;
    }

    const BatchData& data() const { return data_; }
    BatchData release() { return std::move(data_); }

private:
    BatchData data_;
};

inline BatchData accumulate(const std::vector<Pull>& pulls, std::size_t d, double lambda) {
    BatchAccumulator acc(d, lambda);
    for (const Pull& p : pulls) acc.add(p.arm, p.reward);
    return acc.release();
}

namespace detail {

inline Eigen::LLT<Eigen::MatrixXd> spd_factor(const Eigen::MatrixXd& H) {
    if (!H.allFinite()) throw NumericalError("non-finite entries in information matrix");
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) throw NumericalError("information matrix is not positive definite");
    return llt;
}

}  // namespace detail

/// theta_hat = H^{-1} b via Cholesky.
inline Eigen::VectorXd solve_rls(const BatchData& data) {
    if (!data.b.allFinite()) throw NumericalError("solve_rls: non-finite reward sums");
    Eigen::VectorXd theta = detail::spd_factor(data.H).solve(data.b);
    if (!theta.allFinite()) throw NumericalError("solve_rls: non-finite solution");
    return theta;
}

/// ||v||_{H^{-1}} = sqrt(v^T H^{-1} v).
inline double mahalanobis_inv(const Eigen::MatrixXd& H, const Eigen::VectorXd& v) {
    if (v.size() != H.rows()) throw std::invalid_argument("mahalanobis_inv: dimension mismatch");
    const auto llt = detail::spd_factor(H);
    return llt.matrixL().solve(v).norm();
}

/// Squared ||x||_{H^{-1}} for every row of `rows`, sharing one factorization.
inline Eigen::VectorXd leverages(const Eigen::MatrixXd& H, const Eigen::MatrixXd& rows) {
    const auto llt = detail::spd_factor(H);
    const Eigen::MatrixXd whitened = llt.matrixL().solve(rows.transpose());
    return whitened.colwise().squaredNorm().transpose();
}

/// max over pairs of ||x - y||_{H^{-1}} among the rows of `active`; 0 for a single row.
inline double max_pairwise_norm(const Eigen::MatrixXd& H, const Eigen::MatrixXd& active) {
    if (active.rows() < 1) throw std::invalid_argument("max_pairwise_norm: empty active set");
    if (active.cols() != H.rows()) throw std::invalid_argument("max_pairwise_norm: dimension mismatch");
    if (active.rows() == 1) return 0.0;
    const auto llt = detail::spd_factor(H);
    // Columns are L^{-1} x, so ||x - y||_{H^{-1}} = ||w_x - w_y||.
    const Eigen::MatrixXd w = llt.matrixL().solve(active.transpose());
    double best = 0.0;
    for (Eigen::Index i = 0; i < w.cols(); ++i) {
        for (Eigen::Index j = i + 1; j < w.cols(); ++j) {
            best = std::max(best, (w.col(i) - w.col(j)).squaredNorm());
        }
    }
    return std::sqrt(best);
}

/// Lowest-index argmax of <x, theta> over the rows.
inline std::size_t argmax_reward(const Eigen::MatrixXd& rows, const Eigen::VectorXd& theta) {
    const Eigen::VectorXd scores = rows * theta;
    std::size_t best = 0;
    for (Eigen::Index i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(i);
    }
    return best;
}

inline Estimate estimate(const BatchData& data, const Eigen::MatrixXd& active) {
    if (active.rows() < 1) throw std::invalid_argument("estimate: empty active set");
    Estimate e;
    e.theta_hat = solve_rls(data);
    e.best_arm_index = argmax_reward(active, e.theta_hat);
    return e;
}

}  // namespace blae
