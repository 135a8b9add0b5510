#pragma once

// Comparison algorithms and the name -> algorithm registry used by the benchmark runner.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blae/algorithm.hpp"
#include "blae/blae.hpp"
#include "blae/design.hpp"
#include "blae/envsim.hpp"
#include "blae/estimator.hpp"

namespace blae {

// ---------------------------------------------------------------------------
// Rarely switching OFUL
// ---------------------------------------------------------------------------

struct RSOFULConfig {
    double lambda = 1.0;
    double C = 0.5;               // recompute when det V_t > (1 + C) det V_tau
    std::optional<double> delta;  // defaults to 1/T
    double S = 1.0;               // bound on ||theta*||
    double sigma = 1.0;           // noise scale
};

/// sqrt(lambda) S + sigma sqrt(2 log(1/delta) + d log(1 + T / (d lambda))).
inline double rs_oful_radius(std::size_t d, std::int64_t T, const RSOFULConfig& cfg) {
    const double delta = resolve_delta(cfg.delta, T);
    const double dd = static_cast<double>(d);
    return std::sqrt(cfg.lambda) * cfg.S +
           cfg.sigma * std::sqrt(2.0 * std::log(1.0 / delta) + dd * std::log(1.0 + static_cast<double>(T) / (dd * cfg.lambda)));
}

/// Analytic ceiling on policy recomputations after the first: d log_{1+C}(1 + T / (d lambda)).
inline double rs_oful_switch_bound(std::size_t d, std::int64_t T, const RSOFULConfig& cfg) {
    const double dd = static_cast<double>(d);
    return dd * std::log(1.0 + static_cast<double>(T) / (dd * cfg.lambda)) / std::log(1.0 + cfg.C);
}

struct RSOFULOutcome {
    AlgorithmOutcome outcome;
    std::size_t switch_count = 0;  // recomputations after the initial policy
    double radius = 0.0;
};

template <RewardChannel Channel>
RSOFULOutcome run_rs_oful(Channel& channel, const RSOFULConfig& cfg) {
    if (!(cfg.lambda > 0.0)) throw std::invalid_argument("rs-oful: lambda must be > 0");
    if (!(cfg.C > 0.0)) throw std::invalid_argument("rs-oful: C must be > 0");
    const ArmSet& arms = channel.arms();
    const Eigen::MatrixXd& X = arms.features();
    const std::int64_t T = channel.horizon();
    const auto d = static_cast<Eigen::Index>(arms.d());

    RSOFULOutcome result;
    result.radius = rs_oful_radius(arms.d(), T, cfg);

    Eigen::MatrixXd V = cfg.lambda * Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(d);

    ArmIndex current = 0;
    double current_leverage = 0.0;  // ||x_current||^2 under V_tau^{-1}
    std::int64_t pulls_since_switch = 0;

    auto recompute = [&]() {
        Eigen::LLT<Eigen::MatrixXd> llt(V);
        if (llt.info() != Eigen::Success) throw NumericalError("rs-oful: V not positive definite");
        const Eigen::VectorXd theta = llt.solve(b);
        const Eigen::MatrixXd w = llt.matrixL().solve(X.transpose());
        const Eigen::VectorXd lev = w.colwise().squaredNorm().transpose();
        const Eigen::VectorXd ucb = X * theta + result.radius * lev.cwiseSqrt();
        current = 0;
        for (Eigen::Index i = 1; i < ucb.size(); ++i) {
            if (ucb[i] > ucb[static_cast<Eigen::Index>(current)]) current = static_cast<ArmIndex>(i);
        }
        current_leverage = lev[static_cast<Eigen::Index>(current)];
        pulls_since_switch = 0;
    };

    recompute();
    for (std::int64_t t = 0; t < T; ++t) {
        // Only the current arm has been pulled since the last switch, so
        // det V_t / det V_tau = 1 + n x^T V_tau^{-1} x exactly.
        if (arms.K() > 1 && 1.0 + static_cast<double>(pulls_since_switch) * current_leverage > 1.0 + cfg.C) {
            result.outcome.batch_boundaries.push_back(t);
            ++result.switch_count;
            recompute();
        }
        const auto x = X.row(static_cast<Eigen::Index>(current));
        const double r = channel.pull(current);
        V.noalias() += x.transpose() * x;
        b.noalias() += r * x.transpose();
        ++pulls_since_switch;
    }
    result.outcome.batch_boundaries.push_back(T);
    return result;
}

// ---------------------------------------------------------------------------
// Phased elimination with D-optimal design
// ---------------------------------------------------------------------------

struct PhaElimDConfig {
    double lambda = 0.1;          // ridge keeping the design and the estimate well posed
    std::optional<double> delta;  // defaults to 1/T
    double width_scale = 1.0;     // multiplies the confidence width
    double design_tol = 1e-3;
    std::int64_t design_max_iters = 0;
};

/// Confidence width of phase i: sqrt(2 d log(K i (i + 1) / delta) / s_i) with s_i the phase budget.
inline double phaelim_width(std::size_t d, std::size_t K, int phase, double budget, double delta) {
    const double i = static_cast<double>(phase);
    return std::sqrt(2.0 * static_cast<double>(d) * std::log(static_cast<double>(K) * i * (i + 1.0) / delta) / budget);
}

struct PhaElimDOutcome {
    AlgorithmOutcome outcome;
    std::vector<double> phase_budgets;
    std::vector<double> widths;
};

template <RewardChannel Channel>
PhaElimDOutcome run_phaelim_d(Channel& channel, const PhaElimDConfig& cfg) {
    if (!(cfg.lambda > 0.0)) throw std::invalid_argument("phaelim-d: lambda must be > 0");
    const ArmSet& arms = channel.arms();
    const std::int64_t T = channel.horizon();
    const double delta = resolve_delta(cfg.delta, T);
    const std::size_t d = arms.d();

    std::vector<ArmIndex> active(arms.K());
    for (std::size_t i = 0; i < active.size(); ++i) active[i] = i;

    PhaElimDOutcome result;
    std::int64_t t = 0;
    for (int phase = 1; t < T; ++phase) {
        const double budget = batch_budget(T, phase);
        const Eigen::MatrixXd rows = arms.rows(active);
        const DesignProblem problem(rows, cfg.lambda, 1.0, budget);
        const std::int64_t iters =
            cfg.design_max_iters > 0 ? cfg.design_max_iters : default_design_max_iters(active.size(), d);
        DesignWeights pi;
        try {
            pi = solve_design_traced(problem, cfg.design_tol, iters).weights;
        } catch (const DesignConvergenceError& e) {
            throw DesignConvergenceError("phase " + std::to_string(phase) + ": " + e.what(), e.best_iterate(),
                                         e.best_max_leverage(), e.bound());
        }
        const std::vector<std::int64_t> counts = allocate(pi, 1.0, budget, T - t);

        BatchAccumulator acc(d, cfg.lambda);
        for (std::size_t i = 0; i < active.size(); ++i) {
            const auto row = rows.row(static_cast<Eigen::Index>(i));
            for (std::int64_t n = 0; n < counts[i]; ++n) acc.add(row, channel.pull(active[i]));
            t += counts[i];
        }
        const Estimate est = estimate(acc.data(), rows);
        const double width = cfg.width_scale * phaelim_width(d, arms.K(), phase, budget, delta);
        active = eliminate(est, rows, active, 2.0 * width);

        result.phase_budgets.push_back(budget);
        result.widths.push_back(width);
        result.outcome.batch_boundaries.push_back(t);
        result.outcome.active_sets.push_back(active);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

/// Flat key/value options as given on the command line (e.g. {"lambda", "1"}).
using AlgorithmOptions = std::map<std::string, std::string>;
using AlgorithmFn = std::function<AlgorithmOutcome(PullChannel&, const AlgorithmOptions&)>;

namespace options {

inline std::optional<std::string> find(const AlgorithmOptions& opts, const std::string& key) {
    const auto it = opts.find(key);
    if (it == opts.end()) return std::nullopt;
    return it->second;
}

inline double get_double(const AlgorithmOptions& opts, const std::string& key, double fallback) {
    const auto v = find(opts, key);
    if (!v) return fallback;
    std::size_t used = 0;
    const double out = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("option " + key + ": not a number: " + *v);
    return out;
}

inline std::optional<double> get_optional_double(const AlgorithmOptions& opts, const std::string& key) {
    if (!find(opts, key)) return std::nullopt;
    return get_double(opts, key, 0.0);
}

}  // namespace options

inline BLAEConfig blae_config_from(const AlgorithmOptions& opts) {
    BLAEConfig cfg;
    cfg.lambda = options::get_double(opts, "lambda", cfg.lambda);
    if (const auto rule = options::find(opts, "c-rule")) cfg.c_rule = CRule::parse(*rule);
    cfg.c1 = options::get_optional_double(opts, "c1");
    cfg.delta = options::get_optional_double(opts, "delta");
    cfg.design_tol = options::get_double(opts, "design-tol", cfg.design_tol);
    cfg.design_max_iters = static_cast<std::int64_t>(options::get_double(opts, "design-max-iters", 0.0));
    return cfg;
}

inline RSOFULConfig rs_oful_config_from(const AlgorithmOptions& opts) {
    RSOFULConfig cfg;
    cfg.lambda = options::get_double(opts, "lambda", cfg.lambda);
    cfg.C = options::get_double(opts, "rsoful-C", cfg.C);
    cfg.delta = options::get_optional_double(opts, "delta");
    cfg.S = options::get_double(opts, "rsoful-S", cfg.S);
    cfg.sigma = options::get_double(opts, "rsoful-sigma", cfg.sigma);
    return cfg;
}

inline PhaElimDConfig phaelim_config_from(const AlgorithmOptions& opts) {
    PhaElimDConfig cfg;
    cfg.lambda = options::get_double(opts, "phaelim-lambda", cfg.lambda);
    cfg.delta = options::get_optional_double(opts, "delta");
    cfg.width_scale = options::get_double(opts, "phaelim-width-scale", cfg.width_scale);
    cfg.design_tol = options::get_double(opts, "design-tol", cfg.design_tol);
    cfg.design_max_iters = static_cast<std::int64_t>(options::get_double(opts, "design-max-iters", 0.0));
    return cfg;
}

/// Name -> algorithm table. The built-in algorithms are registered on first use;
/// external implementations can be added with add().
class AlgorithmRegistry {
public:
    static AlgorithmRegistry& global() {
        static AlgorithmRegistry registry = with_builtins();
        return registry;
    }

    void add(const std::string& name, AlgorithmFn fn) {
        if (name.empty()) throw std::invalid_argument("AlgorithmRegistry: empty name");
        if (!fn) throw std::invalid_argument("AlgorithmRegistry: empty algorithm for " + name);
        if (!table_.emplace(name, std::move(fn)).second) {
            throw std::invalid_argument("AlgorithmRegistry: '" + name + "' already registered");
        }
    }

    const AlgorithmFn* find(const std::string& name) const {
        const auto it = table_.find(name);
        return it == table_.end() ? nullptr : &it->second;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [name, fn] : table_) out.push_back(name);
        return out;
    }

private:
    static AlgorithmRegistry with_builtins() {
        AlgorithmRegistry r;
        r.add("blae", [](PullChannel& ch, const AlgorithmOptions& o) { return run_blae(ch, blae_config_from(o)).outcome; });
        r.add("rs-oful",
              [](PullChannel& ch, const AlgorithmOptions& o) { return run_rs_oful(ch, rs_oful_config_from(o)).outcome; });
        r.add("phaelim-d",
              [](PullChannel& ch, const AlgorithmOptions& o) { return run_phaelim_d(ch, phaelim_config_from(o)).outcome; });
        return r;
    }

    std::map<std::string, AlgorithmFn> table_;
};

/// Runs a registered algorithm on a fresh simulator and returns its trace.
inline RunTrace run_algorithm(const std::string& name, const BanditInstance& instance, std::int64_t T,
                              const AlgorithmOptions& opts, std::uint64_t noise_seed,
                              NoiseMode noise = NoiseMode::Gaussian) {
    const AlgorithmFn* fn = AlgorithmRegistry::global().find(name);
    if (!fn) throw std::invalid_argument("unknown algorithm '" + name + "'");
    Environment env(instance, T, noise_seed, noise);
    PullChannel channel(env);
    const auto start = std::chrono::steady_clock::now();
    const AlgorithmOutcome out = (*fn)(channel, opts);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (env.remaining() != 0) {
        throw std::logic_error("algorithm '" + name + "' stopped after " + std::to_string(env.rounds()) + " of " +
                               std::to_string(T) + " rounds");
    }
    return make_trace(env, out, wall);
}

inline RunTrace run_rs_oful(const BanditInstance& instance, std::int64_t T, const RSOFULConfig& cfg, std::uint64_t seed,
                            NoiseMode noise = NoiseMode::Gaussian) {
    Environment env(instance, T, seed, noise);
    PullChannel channel(env);
    const auto start = std::chrono::steady_clock::now();
    const RSOFULOutcome out = run_rs_oful(channel, cfg);
    return make_trace(env, out.outcome, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
}

inline RunTrace run_phaelim_d(const BanditInstance& instance, std::int64_t T, const PhaElimDConfig& cfg,
                              std::uint64_t seed, NoiseMode noise = NoiseMode::Gaussian) {
    Environment env(instance, T, seed, noise);
    PullChannel channel(env);
    const auto start = std::chrono::steady_clock::now();
    const PhaElimDOutcome out = run_phaelim_d(channel, cfg);
    return make_trace(env, out.outcome, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
}

}  // namespace blae
