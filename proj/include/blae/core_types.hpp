#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace blae {

using ArmIndex = std::size_t;

/// Raised when a computation produces non-finite values.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Slack allowed on the unit-norm constraint; rescaled vectors land within a few ulps of 1.
inline constexpr double kNormSlack = 1e-12;

// Covering radius used by the dimension-dependent confidence width.
inline constexpr double kZeta = 0.5;

/// Fixed K x d feature matrix. Row i is arm i.
class ArmSet {
public:
    ArmSet() = default;

    explicit ArmSet(Eigen::MatrixXd features) : features_(std::move(features)) {
        if (features_.rows() < 1) throw std::invalid_argument("ArmSet: need at least one arm");
        if (features_.cols() < 2) throw std::invalid_argument("ArmSet: dimension must be >= 2");
        if (!features_.allFinite()) throw std::invalid_argument("ArmSet: non-finite feature");
        for (Eigen::Index i = 0; i < features_.rows(); ++i) {
            if (features_.row(i).norm() > 1.0 + kNormSlack) {
                throw std::invalid_argument("ArmSet: arm " + std::to_string(i) + " has norm > 1");
            }
        }
    }

    std::size_t K() const { return static_cast<std::size_t>(features_.rows()); }
    std::size_t d() const { return static_cast<std::size_t>(features_.cols()); }

    const Eigen::MatrixXd& features() const { return features_; }
    Eigen::VectorXd arm(ArmIndex i) const { return features_.row(static_cast<Eigen::Index>(i)).transpose(); }

    /// Rows for the given arm indices, in the given order.
    Eigen::MatrixXd rows(const std::vector<ArmIndex>& indices) const {
        Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), features_.cols());
        for (std::size_t r = 0; r < indices.size(); ++r) {
            if (indices[r] >= K()) throw std::invalid_argument("ArmSet::rows: index out of range");
            out.row(static_cast<Eigen::Index>(r)) = features_.row(static_cast<Eigen::Index>(indices[r]));
        }
        return out;
    }

private:
    Eigen::MatrixXd features_;
};

/// Arm set plus hidden parameter; rewards are <x, theta*> + N(0, 1).
struct BanditInstance {
    ArmSet arms;
    Eigen::VectorXd theta_star;
    double noise_sigma = 1.0;

    BanditInstance() = default;
    BanditInstance(ArmSet a, Eigen::VectorXd theta) : arms(std::move(a)), theta_star(std::move(theta)) {
        if (static_cast<std::size_t>(theta_star.size()) != arms.d()) {
            throw std::invalid_argument("BanditInstance: theta dimension mismatch");
        }
        if (!theta_star.allFinite() || theta_star.norm() > 1.0 + kNormSlack) {
            throw std::invalid_argument("BanditInstance: ||theta*|| must be <= 1");
        }
    }

    /// Lowest-index argmax of <x, theta*>.
    ArmIndex best_arm() const {
        const Eigen::VectorXd means = arms.features() * theta_star;
        ArmIndex best = 0;
        for (Eigen::Index i = 1; i < means.size(); ++i) {
            if (means[i] > means[static_cast<Eigen::Index>(best)]) best = static_cast<ArmIndex>(i);
        }
        return best;
    }

    /// Suboptimality gaps <x* - x, theta*> for every arm.
    Eigen::VectorXd gaps() const {
        const Eigen::VectorXd means = arms.features() * theta_star;
        return Eigen::VectorXd::Constant(means.size(), means[static_cast<Eigen::Index>(best_arm())]) - means;
    }
};

/// Smallest k >= 0 with 2^(2^k) >= T, i.e. ceil(log2(log2(T))) computed without rounding error.
inline int ceil_log2_log2(std::int64_t T) {
    // 2^(2^k) fits in int64 for k <= 5; every int64 horizon is below 2^(2^6).
    for (int k = 0; k <= 5; ++k) {
        if (T <= (std::int64_t{1} << (1 << k))) return k;
    }
    return 6;
}

/// Per-batch budget s_ell = T^((2^ell - 1) / 2^ell), unrounded.
inline double batch_budget(std::int64_t T, int ell) {
    if (T < 4) throw std::invalid_argument("batch_budget: horizon must be >= 4");
    if (ell < 1) throw std::invalid_argument("batch_budget: batch index must be >= 1");
    const double exponent = 1.0 - std::ldexp(1.0, -ell);
    return std::pow(static_cast<double>(T), exponent);
}

/// 1 + ceil(log2 log2 T): maximum number of batches of the doubly-exponential schedule.
inline int batch_count_bound(std::int64_t T) {
    if (T < 4) throw std::invalid_argument("batch_count_bound: horizon must be >= 4");
    return 1 + ceil_log2_log2(T);
}

struct ScheduleParams {
    std::int64_t T = 0;
    double lambda = 1.0;
    double delta = 0.0;
    double zeta = kZeta;

    ScheduleParams(std::int64_t horizon, double lam, double del) : T(horizon), lambda(lam), delta(del) {
        if (T < 4) throw std::invalid_argument("ScheduleParams: horizon must be >= 4");
        if (!(lambda > 0.0)) throw std::invalid_argument("ScheduleParams: lambda must be > 0");
        if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("ScheduleParams: delta must be in (0,1)");
    }
};

/// Record of one algorithm run against a simulated environment.
struct RunTrace {
    // cumulative_regret[t - 1] is the pseudo-regret after round t.
    std::vector<double> cumulative_regret;
    // Last round of each batch; the final entry equals T.
    std::vector<std::int64_t> batch_boundaries;
    // Surviving original arm indices after each batch (empty for algorithms without elimination).
    std::vector<std::vector<ArmIndex>> eliminations;
    std::vector<bool> optimal_arm_retained;
    double wall_time = 0.0;

    std::size_t batch_count() const { return batch_boundaries.size(); }
    double final_regret() const { return cumulative_regret.empty() ? 0.0 : cumulative_regret.back(); }
    bool optimal_arm_ever_eliminated() const {
        for (bool kept : optimal_arm_retained) {
            if (!kept) return true;
        }
        return false;
    }

    /// Number of batches that have started by round t (1-based).
    std::size_t batches_started_by(std::int64_t t) const {
        std::size_t n = 0;
        std::int64_t start = 1;
        for (std::int64_t boundary : batch_boundaries) {
            if (start > t) break;
            ++n;
            start = boundary + 1;
        }
        return n;
    }
};

}  // namespace blae
