#pragma once

// Batched linear bandit with arm elimination.
//
// Batch ell (1-based) solves a regularized G-optimal design over the surviving arms with
// budget s_ell = T^(1 - 2^-ell) and exploration rate c_ell, pulls each arm
// ceil(s_ell (c_ell pi_i + (1 - c_ell) [i = 0])) times (capped by the rounds left), fits
// ridge regression on that batch alone, and keeps the arms whose estimated gap to the
// estimated best arm is at most epsilon_ell. Position 0 of the active list always holds
// the previous batch's estimated best arm.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blae/algorithm.hpp"
#include "blae/core_types.hpp"
#include "blae/design.hpp"
#include "blae/envsim.hpp"
#include "blae/estimator.hpp"

namespace blae {

/// Exploration-exploitation rate c_ell as a function of the batch and the active-set size.
struct CRule {
    enum class Kind { ActiveFraction, Constant };

    Kind kind = Kind::ActiveFraction;
    double value = 1.0;

    static CRule active_fraction() { return {}; }
    static CRule constant(double c) {
        if (!(c > 0.0 && c <= 1.0)) throw std::invalid_argument("CRule: constant rate must be in (0,1]");
        return {Kind::Constant, c};
    }

    /// "active-fraction" or "const:<value>".
    static CRule parse(const std::string& text) {
        if (text == "active-fraction" || text == "default") return active_fraction();
        const std::string prefix = "const:";
        if (text.rfind(prefix, 0) == 0) return constant(std::stod(text.substr(prefix.size())));
        throw std::invalid_argument("unknown c-rule '" + text + "' (expected active-fraction|const:<c>)");
    }

    std::string to_string() const {
        if (kind == Kind::ActiveFraction) return "active-fraction";
        std::ostringstream os;
        os << "const:" << value;
        return os.str();
    }

    double operator()(int /*ell*/, std::size_t n_active, std::size_t n_initial) const {
        if (kind == Kind::Constant) return value;
        return static_cast<double>(n_active) / static_cast<double>(n_initial);
    }
};

struct BLAEConfig {
    double lambda = 1.0;
    CRule c_rule = CRule::active_fraction();
    std::optional<double> c1;     // overrides c for the first batch
    std::optional<double> delta;  // defaults to 1/T
    double design_tol = 1e-3;
    std::int64_t design_max_iters = 0;  // 0 selects 10 * |A| * d
};

inline double resolve_delta(const std::optional<double>& delta, std::int64_t T) {
    return delta ? *delta : 1.0 / static_cast<double>(T);
}

/// Dimension-dependent width from a zeta-cover of the sphere (zeta = 1/2):
/// 2 sqrt(log(8 pi d B^2 / ((15/64)^(d-1) delta^2))) + 2 sqrt(lambda), B = 1 + ceil(log2 log2 T).
inline double beta1(std::size_t d, std::int64_t T, double lambda, double delta) {
    if (d < 2) throw std::invalid_argument("beta1: d must be >= 2");
    if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("beta1: delta must be in (0,1]");
    if (!(lambda >= 0.0)) throw std::invalid_argument("beta1: lambda must be >= 0");
    const double B = static_cast<double>(batch_count_bound(T));
    const double cover_ratio = kZeta * kZeta - std::pow(kZeta, 4) / 4.0;  // 15/64
    const double log_arg = std::log(8.0 * std::numbers::pi * static_cast<double>(d)) + 2.0 * std::log(B) -
                           static_cast<double>(d - 1) * std::log(cover_ratio) - 2.0 * std::log(delta);
    const double value = 2.0 * std::sqrt(log_arg) + 2.0 * std::sqrt(lambda);
    if (!std::isfinite(value)) throw NumericalError("beta1: non-finite value");
    return value;
}

/// Pairwise union-bound width: sqrt(2 log((n^2 - n) B / delta)) + sqrt(lambda); +inf for n = 1.
inline double beta2(std::size_t n_active, std::int64_t T, double lambda, double delta) {
    if (n_active == 0) throw std::invalid_argument("beta2: need at least one active arm");
    if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("beta2: delta must be in (0,1]");
    if (!(lambda >= 0.0)) throw std::invalid_argument("beta2: lambda must be >= 0");
    if (n_active == 1) return std::numeric_limits<double>::infinity();
    const double n = static_cast<double>(n_active);
    const double B = static_cast<double>(batch_count_bound(T));
    const double value = std::sqrt(2.0 * std::log((n * n - n) * B / delta)) + std::sqrt(lambda);
    if (!std::isfinite(value)) throw NumericalError("beta2: non-finite value");
    return value;
}

/// max_{x,y} ||x - y||_{H^{-1}} * min(beta1, beta2); 0 for a single active arm.
inline double epsilon_threshold(const Eigen::MatrixXd& H, const Eigen::MatrixXd& active, std::int64_t T, double lambda,
                                double delta) {
    if (active.rows() < 1) throw std::invalid_argument("epsilon_threshold: empty active set");
    if (active.rows() == 1) return 0.0;
    const double width = std::min(beta1(static_cast<std::size_t>(active.cols()), T, lambda, delta),
                                  beta2(static_cast<std::size_t>(active.rows()), T, lambda, delta));
    return max_pairwise_norm(H, active) * width;
}

/// Pull counts ceil(budget (c pi_i + (1 - c) [i = 0])), capped in arm order so the total
/// never exceeds `remaining`.
inline std::vector<std::int64_t> allocate(const DesignWeights& pi_star, double c, double budget, std::int64_t remaining) {
    if (!(c > 0.0 && c <= 1.0)) throw std::invalid_argument("allocate: c must be in (0,1]");
    if (!(budget > 0.0)) throw std::invalid_argument("allocate: budget must be > 0");
    if (remaining < 0) throw std::invalid_argument("allocate: remaining must be >= 0");
    std::vector<std::int64_t> counts(pi_star.size(), 0);
    std::int64_t left = remaining;
    for (std::size_t i = 0; i < pi_star.size(); ++i) {
        const double mass = c * pi_star[i] + (i == 0 ? 1.0 - c : 0.0);
        const auto wanted = static_cast<std::int64_t>(std::ceil(budget * mass));
        counts[i] = std::min(wanted, left);
        left -= counts[i];
    }
    return counts;
}

/// Keeps arms with <theta_hat, x_best - x> <= epsilon; the estimated best arm moves to the front
/// and the others keep their relative order.
inline std::vector<ArmIndex> eliminate(const Estimate& estimate, const Eigen::MatrixXd& active_rows,
                                       const std::vector<ArmIndex>& active_ids, double epsilon) {
    if (static_cast<std::size_t>(active_rows.rows()) != active_ids.size()) {
        throw std::invalid_argument("eliminate: rows and ids disagree");
    }
    if (estimate.best_arm_index >= active_ids.size()) throw std::invalid_argument("eliminate: best index out of range");
    const Eigen::VectorXd scores = active_rows * estimate.theta_hat;
    const double best_score = scores[static_cast<Eigen::Index>(estimate.best_arm_index)];
    std::vector<ArmIndex> kept;
    kept.push_back(active_ids[estimate.best_arm_index]);
    for (std::size_t i = 0; i < active_ids.size(); ++i) {
        if (i == estimate.best_arm_index) continue;
        if (best_score - scores[static_cast<Eigen::Index>(i)] <= epsilon) kept.push_back(active_ids[i]);
    }
    return kept;
}

/// Everything BLAE computed in one batch.
struct BatchState {
    int ell = 0;
    std::vector<ArmIndex> design_arms;  // A_{ell-1}, in allocation order
    std::vector<ArmIndex> active;       // A_ell, estimated best first
    BatchData H;
    Estimate estimate;
    double epsilon = 0.0;
    std::int64_t t = 0;  // rounds consumed after this batch

    double c = 1.0;
    double budget = 0.0;
    DesignWeights design;
    std::int64_t design_iterations = 0;
    std::vector<std::int64_t> counts;
    bool truncated = false;      // horizon cap reduced at least one count
    double max_leverage = 0.0;   // max over A_{ell-1} of ||x||^2_{H^{-1}}
    double leverage_bound = 0.0; // d / (d lambda + s c)
};

struct BLAEOutcome {
    AlgorithmOutcome outcome;
    std::vector<BatchState> batches;
};

template <RewardChannel Channel>
BLAEOutcome run_blae(Channel& channel, const BLAEConfig& config) {
    const ArmSet& arms = channel.arms();
    const std::int64_t T = channel.horizon();
    const ScheduleParams params(T, config.lambda, resolve_delta(config.delta, T));
    const std::size_t d = arms.d();
    const std::size_t n_initial = arms.K();

    std::vector<ArmIndex> active(n_initial);
    for (std::size_t i = 0; i < n_initial; ++i) active[i] = i;

    BLAEOutcome result;
    std::int64_t t = 0;
    int ell = 0;
    while (t < T) {
        ++ell;
        BatchState batch;
        batch.ell = ell;
        batch.design_arms = active;
        batch.c = (ell == 1 && config.c1) ? *config.c1 : config.c_rule(ell, active.size(), n_initial);
        batch.budget = batch_budget(T, ell);
        const Eigen::MatrixXd rows = arms.rows(active);

        const DesignProblem problem(rows, params.lambda, batch.c, batch.budget);
        const std::int64_t iters =
            config.design_max_iters > 0 ? config.design_max_iters : default_design_max_iters(active.size(), d);
        try {
            DesignSolution sol = solve_design_traced(problem, config.design_tol, iters);
            batch.design = std::move(sol.weights);
            batch.design_iterations = sol.iterations;
        } catch (const DesignConvergenceError& e) {
            throw DesignConvergenceError("batch " + std::to_string(ell) + ": " + e.what(), e.best_iterate(),
                                         e.best_max_leverage(), e.bound());
        }

        batch.counts = allocate(batch.design, batch.c, batch.budget, T - t);
        BatchAccumulator acc(d, params.lambda);
        for (std::size_t i = 0; i < active.size(); ++i) {
            const auto row = rows.row(static_cast<Eigen::Index>(i));
            for (std::int64_t n = 0; n < batch.counts[i]; ++n) acc.add(row, channel.pull(active[i]));
            t += batch.counts[i];
        }
        const std::vector<std::int64_t> uncapped = allocate(batch.design, batch.c, batch.budget,
                                                            std::numeric_limits<std::int64_t>::max());
        batch.truncated = uncapped != batch.counts;

        batch.H = acc.release();
        batch.estimate = estimate(batch.H, rows);
        batch.epsilon = epsilon_threshold(batch.H.H, rows, T, params.lambda, params.delta);
        batch.active = eliminate(batch.estimate, rows, active, batch.epsilon);
        batch.t = t;
        batch.max_leverage = leverages(batch.H.H, rows).maxCoeff();
        batch.leverage_bound = design_bound(d, params.lambda, batch.c, batch.budget) / batch.c;

        result.outcome.batch_boundaries.push_back(t);
        result.outcome.active_sets.push_back(batch.active);
        active = batch.active;
        result.batches.push_back(std::move(batch));
    }
    return result;
}

/// Runs BLAE on a fresh simulator seeded with `seed` and returns the full trace.
inline RunTrace run_blae(const BanditInstance& instance, std::int64_t T, const BLAEConfig& config, std::uint64_t seed,
                         NoiseMode noise = NoiseMode::Gaussian) {
    Environment env(instance, T, seed, noise);
    PullChannel channel(env);
    const auto start = std::chrono::steady_clock::now();
    const BLAEOutcome out = run_blae(channel, config);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return make_trace(env, out.outcome, wall);
}

}  // namespace blae
