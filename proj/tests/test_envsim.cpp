#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "blae/envsim.hpp"

using namespace blae;

TEST(SampleInstance, NormsBoundedForBothDistributions) {
    for (auto dist : {Distribution::Uniform, Distribution::Normal}) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto inst = sample_instance({40, 7, dist, seed});
            for (Eigen::Index i = 0; i < 40; ++i) EXPECT_LE(inst.arms.features().row(i).norm(), 1.0 + 1e-12);
            EXPECT_LE(inst.theta_star.norm(), 1.0 + 1e-12);
        }
    }
}

TEST(SampleInstance, SameSeedIsBitIdentical) {
    const InstanceSpec spec{25, 4, Distribution::Normal, 1234};
    const auto a = sample_instance(spec);
    const auto b = sample_instance(spec);
    EXPECT_EQ(a.arms.features(), b.arms.features());
    EXPECT_EQ(a.theta_star, b.theta_star);
    EXPECT_NE(sample_instance({25, 4, Distribution::Normal, 1235}).theta_star, a.theta_star);
}

TEST(SampleInstance, UniformCoordinatesInSupport) {
    const auto inst = sample_instance({200, 2, Distribution::Uniform, 5});
    // Rescaling only shrinks, so coordinates stay in [-1, 1] and both signs occur.
    EXPECT_LE(inst.arms.features().maxCoeff(), 1.0);
    EXPECT_GE(inst.arms.features().minCoeff(), -1.0);
    EXPECT_LT(inst.arms.features().minCoeff(), -0.3);
}

namespace {

// Independent re-implementation of the generator: coordinates, then shrink onto the ball.
double brute_force_max_gap(std::size_t K, std::size_t d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::vector<double>> arms(K, std::vector<double>(d));
    auto shrink = [](std::vector<double>& v) {
        double n = 0.0;
        for (double x : v) n += x * x;
        n = std::sqrt(n);
        if (n > 1.0)
            for (double& x : v) x /= n;
    };
    for (auto& a : arms) {
        for (double& x : a) x = u(rng);
        shrink(a);
    }
    std::vector<double> theta(d);
    for (double& x : theta) x = u(rng);
    shrink(theta);
    double hi = -1e300, lo = 1e300;
    for (const auto& a : arms) {
        double m = 0.0;
        for (std::size_t j = 0; j < d; ++j) m += a[j] * theta[j];
        hi = std::max(hi, m);
        lo = std::min(lo, m);
    }
    return hi - lo;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double D = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        D = std::max(D, std::abs(double(i) / a.size() - double(j) / b.size()));
    }
    return D;
}

}  // namespace

TEST(SampleInstance, MaxGapDistributionMatchesResampling) {
    // Two-sample KS at the 1% level: D > 1.628 sqrt((n + m) / (n m)) rejects.
    std::vector<double> ours;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        ours.push_back(sample_instance({400, 10, Distribution::Uniform, derive_seed(99, seed, 0)}).gaps().maxCoeff());
    }
    std::mt19937_64 rng(2024);
    std::vector<double> oracle;
    for (int i = 0; i < 100000; ++i) oracle.push_back(brute_force_max_gap(400, 10, rng));
    const double n = ours.size(), m = oracle.size();
    EXPECT_LT(ks_statistic(ours, oracle), 1.628 * std::sqrt((n + m) / (n * m)));
}

TEST(Pull, NoiseFreeAndGap) {
    const auto inst = sample_instance({10, 3, Distribution::Uniform, 1});
    std::mt19937_64 rng(0);
    const ArmIndex best = inst.best_arm();
    for (ArmIndex i = 0; i < 10; ++i) {
        const PullResult r = pull(inst, i, rng, NoiseMode::Disabled);
        EXPECT_EQ(r.reward, inst.arms.arm(i).dot(inst.theta_star));
        EXPECT_GE(r.instantaneous_gap, 0.0);
    }
    EXPECT_EQ(pull(inst, best, rng).instantaneous_gap, 0.0);
    EXPECT_THROW(pull(inst, 10, rng), std::invalid_argument);
}

TEST(Pull, SampleMeanWithinFourSigma) {
    const auto inst = sample_instance({3, 4, Distribution::Normal, 8});
    Environment env(inst, 1000000, 31);
    double sum = 0.0;
    for (int t = 0; t < 1000000; ++t) sum += env.pull(1);
    EXPECT_NEAR(sum / 1e6, inst.arms.arm(1).dot(inst.theta_star), 4.0 / 1000.0);
}

TEST(Environment, RegretAccountingAndHorizon) {
    const auto inst = sample_instance({6, 3, Distribution::Uniform, 2});
    Environment env(inst, 50, 4);
    const Eigen::VectorXd gaps = inst.gaps();
    double expected = 0.0;
    for (int t = 0; t < 50; ++t) {
        env.pull(static_cast<ArmIndex>(t % 6));
        expected += gaps[t % 6];
        EXPECT_NEAR(env.cumulative_regret().back(), expected, 1e-12);
    }
    EXPECT_EQ(env.remaining(), 0);
    EXPECT_THROW(env.pull(0), std::logic_error);
}

TEST(Environment, NoiseStreamIndexedByRound) {
    // Noise at round t does not depend on which arm was pulled.
    const auto inst = sample_instance({4, 2, Distribution::Uniform, 3});
    Environment a(inst, 100, 9), b(inst, 100, 9);
    const Eigen::VectorXd means = inst.arms.features() * inst.theta_star;
    for (int t = 0; t < 100; ++t) {
        const ArmIndex ia = t % 4, ib = (t * 7 + 1) % 4;
        EXPECT_NEAR(a.pull(ia) - means[ia], b.pull(ib) - means[ib], 1e-12);
    }
}

TEST(InstanceIo, RoundTripIsExact) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto inst = sample_instance({1 + seed * 5, 2 + seed % 6, seed % 2 ? Distribution::Normal : Distribution::Uniform, seed});
        std::stringstream ss;
        write_instance(ss, inst);
        const auto back = read_instance(ss);
        EXPECT_EQ(back.arms.features(), inst.arms.features());
        EXPECT_EQ(back.theta_star, inst.theta_star);
    }
}

TEST(InstanceIo, RejectsMalformedInput) {
    std::stringstream missing_theta("arm 1 0\n");
    EXPECT_THROW(read_instance(missing_theta), std::invalid_argument);
    std::stringstream bad_dim("arm 1 0 0\ntheta 0 1\n");
    EXPECT_THROW(read_instance(bad_dim), std::invalid_argument);
    std::stringstream bad_num("arm 1 zz\ntheta 0 1\n");
    EXPECT_THROW(read_instance(bad_num), std::invalid_argument);
    std::stringstream bad_tag("# c\nvec 1 0\ntheta 0 1\n");
    EXPECT_THROW(read_instance(bad_tag), std::invalid_argument);
}

TEST(DeriveSeed, DistinctStreams) {
    EXPECT_NE(derive_seed(1, 0, seed_stream::kInstance), derive_seed(1, 0, seed_stream::kNoise));
    EXPECT_NE(derive_seed(1, 0, 0), derive_seed(1, 1, 0));
    EXPECT_NE(derive_seed(1, 0, 0), derive_seed(2, 0, 0));
    EXPECT_EQ(derive_seed(5, 3, 1), derive_seed(5, 3, 1));
}
