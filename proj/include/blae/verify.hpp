#pragma once

// Monte Carlo checks of the concentration width, the design leverage bound and the sphere cover.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "blae/blae.hpp"
#include "blae/core_types.hpp"
#include "blae/design.hpp"
#include "blae/envsim.hpp"
#include "blae/estimator.hpp"

namespace blae::verify {

namespace detail {

inline Eigen::VectorXd random_unit(std::size_t d, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd v(static_cast<Eigen::Index>(d));
    do {
        for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = gauss(rng);
    } while (v.norm() < 1e-12);
    return v / v.norm();
}

// Uniform in the unit ball: uniform direction, radius U^(1/d).
inline Eigen::VectorXd random_in_ball(std::size_t d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    return random_unit(d, rng) * std::pow(uni(rng), 1.0 / static_cast<double>(d));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Concentration coverage
// ---------------------------------------------------------------------------

struct ConcentrationOptions {
    std::size_t design_arms = 0;  // distinct arms in the pull design; 0 selects 2 d
    double noise_sigma = 1.0;
};

struct ConcentrationReport {
    std::size_t d = 0;
    std::size_t n_pulls = 0;
    double lambda = 0.0;
    double delta = 0.0;
    std::int64_t trials = 0;
    std::int64_t violations = 0;
    double rate = 0.0;
    double ceiling = 0.0;  // delta + 3 sqrt(delta (1 - delta) / trials)
    bool pass = false;
};

/// Per trial: theta* uniform in the unit ball, x uniform on the sphere, a design of unit-norm arms
/// pulled round-robin n_pulls times, Gaussian noise; counts trials with
/// <x, theta_hat - theta*> > (sqrt(2 log(1/delta)) + sqrt(lambda)) ||x||_{H^{-1}}.
inline ConcentrationReport check_concentration(std::size_t d, std::size_t n_pulls, double lambda, double delta,
                                               std::int64_t trials, std::uint64_t seed,
                                               const ConcentrationOptions& opts = {}) {
    if (d < 1) throw std::invalid_argument("check_concentration: d must be >= 1");
    if (n_pulls < 1) throw std::invalid_argument("check_concentration: n_pulls must be >= 1");
    if (!(lambda > 0.0)) throw std::invalid_argument("check_concentration: lambda must be > 0");
    if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("check_concentration: delta must be in (0,1]");
    if (trials < 1000) throw std::invalid_argument("check_concentration: need at least 1000 trials");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    const std::size_t m = opts.design_arms > 0 ? opts.design_arms : 2 * d;
    const double width = std::sqrt(2.0 * std::log(1.0 / delta)) + std::sqrt(lambda);

    ConcentrationReport rep;
    rep.d = d;
    rep.n_pulls = n_pulls;
    rep.lambda = lambda;
    rep.delta = delta;
    rep.trials = trials;
    for (std::int64_t trial = 0; trial < trials; ++trial) {
        const Eigen::VectorXd theta = detail::random_in_ball(d, rng);
        const Eigen::VectorXd x = detail::random_unit(d, rng);
        Eigen::MatrixXd design(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < m; ++i) design.row(static_cast<Eigen::Index>(i)) = detail::random_unit(d, rng).transpose();

        BatchAccumulator acc(d, lambda);
        for (std::size_t t = 0; t < n_pulls; ++t) {
            const auto row = design.row(static_cast<Eigen::Index>(t % m));
            acc.add(row, row.dot(theta) + opts.noise_sigma * noise(rng));
        }
        const BatchData& data = acc.data();
        const Eigen::VectorXd theta_hat = solve_rls(data);
        const double lhs = x.dot(theta_hat - theta);
        const double rhs = width * mahalanobis_inv(data.H, x);
        if (lhs > rhs) ++rep.violations;
    }
    const auto n = static_cast<double>(trials);
    rep.rate = static_cast<double>(rep.violations) / n;
    rep.ceiling = delta + 3.0 * std::sqrt(delta * (1.0 - delta) / n);
    rep.pass = rep.rate <= rep.ceiling;
    return rep;
}

// ---------------------------------------------------------------------------
// Design leverage bound after rounding
// ---------------------------------------------------------------------------

struct DesignBoundResult {
    bool pass = false;
    double max_leverage = 0.0;  // max over arms of ||x||^2_{H^{-1}}, H from the rounded counts
    double bound = 0.0;         // d / (d lambda + s c)
    std::int64_t iterations = 0;
    std::int64_t pulls = 0;
    std::string error;  // non-empty when the solver failed
};

/// Solves the design, rounds it with the batch allocation rule (no horizon cap), forms
/// H = lambda I + sum_i n_i x_i x_i^T and compares its max leverage with (1 + tol) d / (d lambda + s c).
inline DesignBoundResult check_design_bound(const ArmSet& arms, double lambda, double c, double scale, double tol,
                                            double design_tol = 1e-3) {
    DesignBoundResult r;
    const std::size_t d = arms.d();
    r.bound = design_bound(d, lambda, c, scale) / c;
    try {
        const DesignProblem problem(arms.features(), lambda, c, scale);
        const DesignSolution sol =
            solve_design_traced(problem, design_tol, default_design_max_iters(arms.K(), d));
        r.iterations = sol.iterations;
        const std::vector<std::int64_t> counts =
            allocate(sol.weights, c, scale, std::numeric_limits<std::int64_t>::max());
        Eigen::MatrixXd H = lambda * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < arms.K(); ++i) {
            const Eigen::VectorXd x = arms.arm(i);
            H.noalias() += static_cast<double>(counts[i]) * x * x.transpose();
            r.pulls += counts[i];
        }
        r.max_leverage = leverages(H, arms.features()).maxCoeff();
        r.pass = r.max_leverage <= (1.0 + tol) * r.bound;
    } catch (const std::exception& e) {
        r.error = e.what();
        r.pass = false;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Sphere cover
// ---------------------------------------------------------------------------

/// sqrt(2 pi d) (zeta^2 - zeta^4 / 4)^(-(d - 1) / 2).
inline double cover_bound(std::size_t d, double zeta) {
    const double r = zeta * zeta - std::pow(zeta, 4) / 4.0;
    return std::sqrt(2.0 * std::numbers::pi * static_cast<double>(d)) * std::pow(r, -(static_cast<double>(d) - 1.0) / 2.0);
}

/// Equally spaced circle cover: each center covers an arc of angular half-width 2 arcsin(zeta / 2).
struct CircleCover {
    std::size_t size = 0;
    double cap_radius = 0.0;    // angular, radians
    double max_distance = 0.0;  // chordal distance from the worst point to its nearest center
};

inline CircleCover analytic_circle_cover(double zeta) {
    if (!(zeta > 0.0 && zeta < 2.0)) throw std::invalid_argument("analytic_circle_cover: zeta must be in (0,2)");
    CircleCover c;
    c.cap_radius = 2.0 * std::asin(zeta / 2.0);
    c.size = static_cast<std::size_t>(std::ceil(2.0 * std::numbers::pi / (2.0 * c.cap_radius) - 1e-12));
    c.max_distance = 2.0 * std::sin(std::numbers::pi / (2.0 * static_cast<double>(c.size)));
    return c;
}

enum class CoverStatus { Covered, Inconclusive };

inline std::string to_string(CoverStatus s) { return s == CoverStatus::Covered ? "covered" : "inconclusive"; }

struct CoverOptions {
    std::int64_t rejection_streak = 20000;  // consecutive rejections that end the greedy phase
    std::int64_t mc_samples = 100000;
    int max_refinements = 20;  // MC passes allowed to add uncovered points as new centers
};

struct CoverReport {
    double zeta = 0.0;
    std::size_t d = 0;
    std::vector<Eigen::VectorXd> centers;
    std::size_t cardinality = 0;
    double bound = 0.0;
    bool mc_coverage_ok = false;
    CoverStatus status = CoverStatus::Inconclusive;
    std::size_t greedy_size = 0;   // centers before MC refinement
    int refinement_passes = 0;     // MC passes run, the last one being clean when covered
    std::int64_t last_uncovered = 0;
    std::optional<CircleCover> circle;  // d = 2 only
};

/// Greedy maximal zeta-packing of S^{d-1} by rejection sampling. An MC pass that finds an
/// uncovered point adds it as a center (it is > zeta from all centers, so the set stays a
/// packing) and triggers a fresh pass; the cover is accepted after a pass with no misses.
inline CoverReport build_cover(std::size_t d, double zeta, std::uint64_t seed, const CoverOptions& opts = {}) {
    if (d < 2) throw std::invalid_argument("build_cover: d must be >= 2");
    if (!(zeta > 0.0 && zeta < 1.0)) throw std::invalid_argument("build_cover: zeta must be in (0,1)");
    std::mt19937_64 rng(seed);
    CoverReport rep;
    rep.zeta = zeta;
    rep.d = d;
    rep.bound = cover_bound(d, zeta);
    const double z2 = zeta * zeta;

    Eigen::MatrixXd C(64, static_cast<Eigen::Index>(d));
    Eigen::Index n = 0;
    auto nearest_sq = [&](const Eigen::VectorXd& v) {
        if (n == 0) return std::numeric_limits<double>::infinity();
        // ||u - v||^2 = 2 - 2 <u, v> for unit vectors.
        return 2.0 - 2.0 * (C.topRows(n) * v).maxCoeff();
    };
    auto add_center = [&](const Eigen::VectorXd& v) {
        if (n == C.rows()) C.conservativeResize(2 * C.rows(), Eigen::NoChange);
        C.row(n++) = v.transpose();
    };

    for (std::int64_t streak = 0; streak < opts.rejection_streak;) {
        const Eigen::VectorXd v = detail::random_unit(d, rng);
        if (nearest_sq(v) > z2) {
            add_center(v);
            streak = 0;
        } else {
            ++streak;
        }
    }
    rep.greedy_size = static_cast<std::size_t>(n);

    for (int pass = 0; pass < opts.max_refinements; ++pass) {
        rep.refinement_passes = pass + 1;
        std::int64_t misses = 0;
        for (std::int64_t s = 0; s < opts.mc_samples; ++s) {
            const Eigen::VectorXd v = detail::random_unit(d, rng);
            if (nearest_sq(v) > z2) {
                ++misses;
                add_center(v);
            }
        }
        rep.last_uncovered = misses;
        if (misses == 0) {
            rep.mc_coverage_ok = true;
            rep.status = CoverStatus::Covered;
            break;
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) rep.centers.emplace_back(C.row(i).transpose());
    rep.cardinality = rep.centers.size();
    if (d == 2) rep.circle = analytic_circle_cover(zeta);
    return rep;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const ConcentrationReport& r) {
    return {{"check", "concentration"}, {"d", r.d},           {"n_pulls", r.n_pulls},
            {"lambda", r.lambda},       {"delta", r.delta},   {"trials", r.trials},
            {"violations", r.violations}, {"rate", r.rate},   {"ceiling", r.ceiling},
            {"pass", r.pass}};
}

inline nlohmann::json to_json(const DesignBoundResult& r) {
    nlohmann::json j = {{"check", "design_bound"}, {"pass", r.pass},           {"max_leverage", r.max_leverage},
                        {"bound", r.bound},        {"iterations", r.iterations}, {"pulls", r.pulls}};
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

inline nlohmann::json to_json(const CoverReport& r, bool include_centers = false) {
    nlohmann::json j = {{"check", "cover"},
                        {"d", r.d},
                        {"zeta", r.zeta},
                        {"cardinality", r.cardinality},
                        {"bound", r.bound},
                        {"within_bound", static_cast<double>(r.cardinality) <= r.bound},
                        {"greedy_size", r.greedy_size},
                        {"refinement_passes", r.refinement_passes},
                        {"last_uncovered", r.last_uncovered},
                        {"mc_coverage_ok", r.mc_coverage_ok},
                        {"status", to_string(r.status)}};
    if (r.circle) {
        j["analytic_circle_cover"] = {
            {"size", r.circle->size}, {"cap_radius", r.circle->cap_radius}, {"max_distance", r.circle->max_distance}};
    }
    if (include_centers) {
        nlohmann::json cs = nlohmann::json::array();
        for (const auto& c : r.centers) cs.push_back(std::vector<double>(c.data(), c.data() + c.size()));
        j["centers"] = std::move(cs);
    }
    return j;
}

}  // namespace blae::verify
