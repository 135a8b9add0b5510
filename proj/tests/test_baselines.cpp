#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "blae/baselines.hpp"

using namespace blae;

namespace {

// Channel that knows only arm features and a reward table; there is no theta* to read.
class ScriptedChannel {
public:
    ScriptedChannel(ArmSet arms, std::vector<double> means, std::int64_t T) : arms_(std::move(arms)), means_(std::move(means)), T_(T) {}
    const ArmSet& arms() const { return arms_; }
    std::int64_t horizon() const { return T_; }
    std::int64_t remaining() const { return T_ - t_; }
    double pull(ArmIndex i) {
        if (t_ >= T_) throw std::logic_error("over-pull");
        ++t_;
        ++counts_.at(i);
        return means_.at(i) + std::sin(static_cast<double>(t_));
    }
    std::int64_t rounds() const { return t_; }
    const std::vector<std::int64_t>& counts() const { return counts_; }

private:
    ArmSet arms_;
    std::vector<double> means_;
    std::int64_t T_;
    std::int64_t t_ = 0;
    std::vector<std::int64_t> counts_ = std::vector<std::int64_t>(64, 0);
};

static_assert(RewardChannel<ScriptedChannel>);
static_assert(RewardChannel<PullChannel>);

ScriptedChannel scripted(std::int64_t T) {
    const auto inst = sample_instance({12, 3, Distribution::Uniform, 42});
    const Eigen::VectorXd m = inst.arms.features() * Eigen::Vector3d(0.5, -0.2, 0.3);
    return ScriptedChannel(inst.arms, std::vector<double>(m.data(), m.data() + m.size()), T);
}

}  // namespace

TEST(InterfaceHygiene, AlgorithmsRunOnChannelWithoutTheta) {
    {
        auto ch = scripted(5000);
        run_blae(ch, BLAEConfig{});
        EXPECT_EQ(ch.rounds(), 5000);
    }
    {
        auto ch = scripted(5000);
        run_rs_oful(ch, RSOFULConfig{});
        EXPECT_EQ(ch.rounds(), 5000);
    }
    {
        auto ch = scripted(5000);
        run_phaelim_d(ch, PhaElimDConfig{});
        EXPECT_EQ(ch.rounds(), 5000);
    }
}

TEST(RsOful, SingleArmNeverSwitches) {
    Eigen::MatrixXd X(1, 2);
    X << 1.0, 0.0;
    const BanditInstance inst(ArmSet(X), Eigen::Vector2d(0.5, 0.0));
    Environment env(inst, 10000, 3);
    PullChannel ch(env);
    const RSOFULOutcome out = run_rs_oful(ch, RSOFULConfig{});
    EXPECT_EQ(out.switch_count, 0u);
    EXPECT_EQ(env.cumulative_regret().back(), 0.0);
}

TEST(RsOful, SwitchCountWithinDeterminantBound) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t d = 2 + seed % 5;
        const auto inst = sample_instance({30, d, Distribution::Uniform, seed});
        const std::int64_t T = 20000;
        RSOFULConfig cfg;
        cfg.C = seed % 2 ? 0.5 : 0.1;
        Environment env(inst, T, seed + 100);
        PullChannel ch(env);
        const RSOFULOutcome out = run_rs_oful(ch, cfg);
        EXPECT_LE(static_cast<double>(out.switch_count), rs_oful_switch_bound(d, T, cfg)) << "seed " << seed;
        EXPECT_EQ(out.outcome.batch_boundaries.size(), out.switch_count + 1);
        EXPECT_EQ(out.outcome.batch_boundaries.back(), T);
    }
}

TEST(RsOful, DeterminantRatioMatchesDirectComputation) {
    // The switch rule uses 1 + n x^T V^{-1} x; check it against det(V + n x x^T) / det(V).
    const auto inst = sample_instance({5, 4, Distribution::Uniform, 8});
    Eigen::MatrixXd V = 1.3 * Eigen::MatrixXd::Identity(4, 4);
    for (int i = 0; i < 5; ++i) V += inst.arms.arm(i) * inst.arms.arm(i).transpose();
    const Eigen::VectorXd x = inst.arms.arm(2);
    const double n = 17.0;
    const double direct = (V + n * x * x.transpose()).determinant() / V.determinant();
    EXPECT_NEAR(1.0 + n * x.dot(V.inverse() * x), direct, 1e-10 * direct);
}

TEST(RsOful, Radius) {
    RSOFULConfig cfg;
    const double r = rs_oful_radius(5, 100000, cfg);
    EXPECT_NEAR(r, 1.0 + std::sqrt(2.0 * std::log(1e5) + 5.0 * std::log(1.0 + 1e5 / 5.0)), 1e-12);
}

TEST(PhaElimD, BudgetsFollowSchedule) {
    const auto inst = sample_instance({20, 3, Distribution::Uniform, 6});
    Environment env(inst, 65536, 2);
    PullChannel ch(env);
    const PhaElimDOutcome out = run_phaelim_d(ch, PhaElimDConfig{});
    ASSERT_GE(out.phase_budgets.size(), 3u);
    EXPECT_DOUBLE_EQ(out.phase_budgets[0], 256.0);
    EXPECT_DOUBLE_EQ(out.phase_budgets[1], 4096.0);
    EXPECT_DOUBLE_EQ(out.phase_budgets[2], 16384.0);
    for (std::size_t i = 0; i < out.phase_budgets.size(); ++i) {
        EXPECT_EQ(out.phase_budgets[i], batch_budget(65536, static_cast<int>(i + 1)));
    }
    EXPECT_EQ(out.outcome.batch_boundaries.back(), 65536);
}

TEST(PhaElimD, SingleArmZeroRegret) {
    Eigen::MatrixXd X(1, 3);
    X << 0.0, 1.0, 0.0;
    const BanditInstance inst(ArmSet(X), Eigen::Vector3d(0.0, 0.4, 0.1));
    const RunTrace tr = run_phaelim_d(inst, 5000, PhaElimDConfig{}, 1);
    EXPECT_EQ(tr.final_regret(), 0.0);
    EXPECT_EQ(tr.cumulative_regret.size(), 5000u);
}

TEST(PhaElimD, Width) {
    EXPECT_NEAR(phaelim_width(5, 50, 2, 5000.0, 1e-5), std::sqrt(2.0 * 5.0 * std::log(50.0 * 6.0 / 1e-5) / 5000.0), 1e-15);
}

TEST(Registry, BuiltinsAndPlugins) {
    auto& reg = AlgorithmRegistry::global();
    for (const char* name : {"blae", "rs-oful", "phaelim-d"}) EXPECT_NE(reg.find(name), nullptr) << name;
    EXPECT_EQ(reg.find("e4"), nullptr);
    EXPECT_THROW(reg.add("blae", [](PullChannel&, const AlgorithmOptions&) { return AlgorithmOutcome{}; }),
                 std::invalid_argument);

    // A plug-in that always pulls arm 0.
    reg.add("test-always-first", [](PullChannel& ch, const AlgorithmOptions&) {
        while (ch.remaining() > 0) ch.pull(0);
        return AlgorithmOutcome{{ch.horizon()}, {}};
    });
    const auto inst = sample_instance({5, 2, Distribution::Uniform, 1});
    const RunTrace tr = run_algorithm("test-always-first", inst, 100, {}, 3);
    EXPECT_NEAR(tr.final_regret(), 100.0 * inst.gaps()[0], 1e-9);
    EXPECT_THROW(run_algorithm("no-such-algo", inst, 100, {}, 3), std::invalid_argument);
}

TEST(Registry, StoppingEarlyIsAnError) {
    auto& reg = AlgorithmRegistry::global();
    reg.add("test-lazy", [](PullChannel& ch, const AlgorithmOptions&) {
        ch.pull(0);
        return AlgorithmOutcome{{1}, {}};
    });
    const auto inst = sample_instance({3, 2, Distribution::Uniform, 1});
    EXPECT_THROW(run_algorithm("test-lazy", inst, 50, {}, 1), std::logic_error);
}

TEST(Registry, OptionParsing) {
    const BLAEConfig b = blae_config_from({{"lambda", "0.5"}, {"c-rule", "const:0.3"}, {"delta", "0.01"}});
    EXPECT_EQ(b.lambda, 0.5);
    EXPECT_EQ(b.c_rule.kind, CRule::Kind::Constant);
    EXPECT_EQ(*b.delta, 0.01);
    EXPECT_EQ(rs_oful_config_from({{"rsoful-C", "0.25"}}).C, 0.25);
    EXPECT_EQ(phaelim_config_from({{"phaelim-lambda", "0.02"}}).lambda, 0.02);
    EXPECT_THROW(blae_config_from({{"lambda", "abc"}}), std::invalid_argument);
    EXPECT_THROW(blae_config_from({{"lambda", "1x"}}), std::invalid_argument);
}

TEST(Baselines, SwitchCountDiagnosticAtExperimentScale) {
    // Uniform K=50, d=5, T=1e5: RS-OFUL recomputes its policy far more often than BLAE's <= 6 batches.
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto inst = sample_instance({50, 5, Distribution::Uniform, derive_seed(1, seed, seed_stream::kInstance)});
        Environment env(inst, 100000, derive_seed(1, seed, seed_stream::kNoise));
        PullChannel ch(env);
        const RSOFULOutcome out = run_rs_oful(ch, RSOFULConfig{});
        RecordProperty("switches_seed_" + std::to_string(seed), static_cast<int>(out.switch_count));
        EXPECT_GT(out.switch_count, 50u);
        EXPECT_LE(static_cast<double>(out.switch_count), rs_oful_switch_bound(5, 100000, RSOFULConfig{}));
    }
}
