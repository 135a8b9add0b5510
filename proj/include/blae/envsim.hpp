#pragma once

// Seeded bandit environment: instance generation, reward sampling and regret accounting.

#include <concepts>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blae/core_types.hpp"

namespace blae {

enum class Distribution { Uniform, Normal };

inline std::string to_string(Distribution d) { return d == Distribution::Uniform ? "uniform" : "normal"; }

inline Distribution parse_distribution(const std::string& s) {
    if (s == "uniform") return Distribution::Uniform;
    if (s == "normal") return Distribution::Normal;
    throw std::invalid_argument("unknown distribution '" + s + "' (expected uniform|normal)");
}

struct InstanceSpec {
    std::size_t K = 1;
    std::size_t d = 2;
    Distribution distribution = Distribution::Uniform;
    std::uint64_t seed = 0;
    // Support of the uniform distribution is [uniform_low, 1]^d.
    double uniform_low = -1.0;
};

enum class NoiseMode { Gaussian, Disabled };

struct PullResult {
    double reward = 0.0;
    double instantaneous_gap = 0.0;
};

/// Independent 64-bit seed for (master, replication, stream).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replication, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(replication), static_cast<std::uint32_t>(replication >> 32),
                      static_cast<std::uint32_t>(stream), 0x626c6165u};
    std::mt19937_64 gen(seq);
    return gen();
}

namespace seed_stream {
inline constexpr std::uint64_t kInstance = 0;
inline constexpr std::uint64_t kNoise = 1;
}  // namespace seed_stream

namespace detail {

inline void project_to_ball(Eigen::Ref<Eigen::VectorXd> v) {
    const double n = v.norm();
    if (n > 1.0) v /= n;
}

}  // namespace detail

/// Draws K arms and theta* i.i.d. from the spec's distribution, then rescales any vector with
/// norm above 1 onto the unit sphere. Arms are drawn first, row by row, then theta*.
inline BanditInstance sample_instance(const InstanceSpec& spec) {
    if (spec.K < 1) throw std::invalid_argument("sample_instance: K must be >= 1");
    if (spec.d < 2) throw std::invalid_argument("sample_instance: d must be >= 2");
    if (!(spec.uniform_low < 1.0)) throw std::invalid_argument("sample_instance: uniform_low must be < 1");
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> uni(spec.uniform_low, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto draw = [&]() { return spec.distribution == Distribution::Uniform ? uni(rng) : gauss(rng); };

    const auto K = static_cast<Eigen::Index>(spec.K);
    const auto d = static_cast<Eigen::Index>(spec.d);
    Eigen::MatrixXd arms(K, d);
    Eigen::VectorXd row(d);
    for (Eigen::Index i = 0; i < K; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) row[j] = draw();
        detail::project_to_ball(row);
        arms.row(i) = row.transpose();
    }
    Eigen::VectorXd theta(d);
    for (Eigen::Index j = 0; j < d; ++j) theta[j] = draw();
    detail::project_to_ball(theta);
    return BanditInstance(ArmSet(std::move(arms)), std::move(theta));
}

/// One reward draw: <x, theta*> + eta with eta ~ N(0, 1) (or 0 when noise is disabled).
inline PullResult pull(const BanditInstance& instance, ArmIndex arm, std::mt19937_64& rng,
                       NoiseMode mode = NoiseMode::Gaussian) {
    if (arm >= instance.arms.K()) throw std::invalid_argument("pull: arm index out of range");
    const auto i = static_cast<Eigen::Index>(arm);
    const double mean = instance.arms.features().row(i).dot(instance.theta_star);
    double noise = 0.0;
    if (mode == NoiseMode::Gaussian) {
        std::normal_distribution<double> gauss(0.0, instance.noise_sigma);
        noise = gauss(rng);
    }
    PullResult r;
    r.reward = mean + noise;
    const Eigen::Index best = static_cast<Eigen::Index>(instance.best_arm());
    r.instantaneous_gap = std::max(0.0, instance.arms.features().row(best).dot(instance.theta_star) - mean);
    return r;
}

/// Simulator for a single run. Noise is drawn from one stream in round order, so two
/// algorithms run on environments with the same seed see the same eta_t at round t.
class Environment {
public:
    Environment(BanditInstance instance, std::int64_t horizon, std::uint64_t noise_seed,
                NoiseMode mode = NoiseMode::Gaussian)
        : instance_(std::move(instance)), horizon_(horizon), rng_(noise_seed), mode_(mode) {
        if (horizon_ < 1) throw std::invalid_argument("Environment: horizon must be >= 1");
        const Eigen::VectorXd means = instance_.arms.features() * instance_.theta_star;
        best_ = instance_.best_arm();
        gaps_ = Eigen::VectorXd::Constant(means.size(), means[static_cast<Eigen::Index>(best_)]) - means;
        means_ = means;
        cumulative_.reserve(static_cast<std::size_t>(horizon_));
    }

    const ArmSet& arms() const { return instance_.arms; }
    std::int64_t horizon() const { return horizon_; }
    std::int64_t rounds() const { return static_cast<std::int64_t>(cumulative_.size()); }
    std::int64_t remaining() const { return horizon_ - rounds(); }

    double pull(ArmIndex arm) {
        if (arm >= instance_.arms.K()) throw std::invalid_argument("Environment::pull: arm index out of range");
        if (remaining() <= 0) throw std::logic_error("Environment::pull: horizon exhausted");
        const auto i = static_cast<Eigen::Index>(arm);
        double noise = 0.0;
        if (mode_ == NoiseMode::Gaussian) noise = gauss_(rng_);
        const double prev = cumulative_.empty() ? 0.0 : cumulative_.back();
        cumulative_.push_back(prev + gaps_[i]);
        pulls_.push_back(arm);
        return means_[i] + noise;
    }

    // Simulator-side accessors; algorithms only ever see a PullChannel.
    const BanditInstance& instance() const { return instance_; }
    ArmIndex best_arm() const { return best_; }
    const std::vector<double>& cumulative_regret() const { return cumulative_; }
    const std::vector<ArmIndex>& pull_history() const { return pulls_; }

private:
    BanditInstance instance_;
    std::int64_t horizon_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> gauss_{0.0, 1.0};
    NoiseMode mode_;
    ArmIndex best_ = 0;
    Eigen::VectorXd means_;
    Eigen::VectorXd gaps_;
    std::vector<double> cumulative_;
    std::vector<ArmIndex> pulls_;
};

/// Algorithm-facing view of an Environment: arm features, horizon, and the pull channel.
class PullChannel {
public:
    explicit PullChannel(Environment& env) : env_(&env) {}

    const ArmSet& arms() const { return env_->arms(); }
    std::int64_t horizon() const { return env_->horizon(); }
    std::int64_t remaining() const { return env_->remaining(); }
    double pull(ArmIndex arm) { return env_->pull(arm); }

private:
    Environment* env_;
};

template <typename C>
concept RewardChannel = requires(C& ch, const C& cch, ArmIndex i) {
    { cch.arms() } -> std::convertible_to<const ArmSet&>;
    { cch.horizon() } -> std::convertible_to<std::int64_t>;
    { cch.remaining() } -> std::convertible_to<std::int64_t>;
    { ch.pull(i) } -> std::convertible_to<double>;
};

// Plain-text instance format:
//   # comment lines are ignored
//   arm x_1 x_2 ... x_d        (one line per arm, in index order)
//   theta t_1 ... t_d
inline void write_instance(std::ostream& out, const BanditInstance& instance) {
    const auto& X = instance.arms.features();
    out << "# bandit instance K=" << X.rows() << " d=" << X.cols() << "\n";
    out << std::setprecision(17);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        out << "arm";
        for (Eigen::Index j = 0; j < X.cols(); ++j) out << ' ' << X(i, j);
        out << '\n';
    }
    out << "theta";
    for (Eigen::Index j = 0; j < instance.theta_star.size(); ++j) out << ' ' << instance.theta_star[j];
    out << '\n';
}

inline BanditInstance read_instance(std::istream& in) {
    std::vector<std::vector<double>> arms;
    std::vector<double> theta;
    bool have_theta = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        std::vector<double> values;
        std::string tok;
        while (ls >> tok) {
            try {
                std::size_t used = 0;
                values.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw std::invalid_argument("read_instance: bad number '" + tok + "' on line " + std::to_string(line_no));
            }
        }
        if (tag == "arm") {
            arms.push_back(std::move(values));
        } else if (tag == "theta") {
            if (have_theta) throw std::invalid_argument("read_instance: duplicate theta line");
            theta = std::move(values);
            have_theta = true;
        } else {
            throw std::invalid_argument("read_instance: unknown tag '" + tag + "' on line " + std::to_string(line_no));
        }
    }
    if (arms.empty()) throw std::invalid_argument("read_instance: no arms");
    if (!have_theta) throw std::invalid_argument("read_instance: missing theta line");
    const std::size_t d = theta.size();
    Eigen::MatrixXd X(static_cast<Eigen::Index>(arms.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < arms.size(); ++i) {
        if (arms[i].size() != d) throw std::invalid_argument("read_instance: arm " + std::to_string(i) + " has wrong dimension");
        for (std::size_t j = 0; j < d; ++j) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = arms[i][j];
    }
    return BanditInstance(ArmSet(std::move(X)), Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(d)));
}

}  // namespace blae
