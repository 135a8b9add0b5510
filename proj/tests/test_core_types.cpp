#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <gtest/gtest.h>

#include "blae/core_types.hpp"

using namespace blae;

TEST(BatchBudget, PowerOfTwoHorizon) {
    EXPECT_DOUBLE_EQ(batch_budget(65536, 1), 256.0);
    EXPECT_DOUBLE_EQ(batch_budget(65536, 2), 4096.0);
    EXPECT_DOUBLE_EQ(batch_budget(65536, 3), 16384.0);
}

TEST(BatchBudget, RejectsDegenerateArguments) {
    EXPECT_THROW(batch_budget(3, 1), std::invalid_argument);
    EXPECT_THROW(batch_budget(100, 0), std::invalid_argument);
    EXPECT_THROW(batch_budget(100, -2), std::invalid_argument);
}

TEST(BatchBudget, IncreasingAndBelowHorizon) {
    for (std::int64_t T : {4, 5, 16, 17, 1000, 65536, 100000, 1000000}) {
        double prev = 0.0;
        for (int ell = 1; ell <= 8; ++ell) {
            const double s = batch_budget(T, ell);
            EXPECT_GT(s, prev) << "T=" << T << " ell=" << ell;
            EXPECT_LE(s, static_cast<double>(T));
            prev = s;
        }
    }
}

TEST(BatchCountBound, ExactValues) {
    EXPECT_EQ(batch_count_bound(65536), 5);
    EXPECT_EQ(batch_count_bound(4), 2);
    EXPECT_EQ(batch_count_bound(100000), 6);
    EXPECT_EQ(batch_count_bound(16), 3);
    EXPECT_EQ(batch_count_bound(17), 4);
    EXPECT_THROW(batch_count_bound(3), std::invalid_argument);
}

TEST(BatchCountBound, MatchesFloatingFormulaAwayFromPowers) {
    // Oracle: ceil(log2(log2 T)) in long double, skipping T within rounding distance of 2^(2^k).
    for (std::int64_t T = 4; T < 5000000; T = T * 3 / 2 + 1) {
        const long double v = std::log2(std::log2(static_cast<long double>(T)));
        if (std::abs(v - std::round(v)) < 1e-9L) continue;
        EXPECT_EQ(batch_count_bound(T), 1 + static_cast<int>(std::ceil(v))) << "T=" << T;
    }
}

TEST(BatchCountBound, PenultimateBudgetReachesHalfHorizon) {
    for (std::int64_t T : {4, 5, 16, 17, 257, 1000, 65536, 65537, 100000, 10000000}) {
        const int B = batch_count_bound(T);
        if (B >= 2) { EXPECT_GE(batch_budget(T, B - 1), static_cast<double>(T) / 2.0 - 1e-9) << "T=" << T; }
    }
}

TEST(ArmSet, ValidatesShapeAndNorm) {
    EXPECT_THROW(ArmSet(Eigen::MatrixXd(0, 3)), std::invalid_argument);
    EXPECT_THROW(ArmSet(Eigen::MatrixXd::Zero(3, 1)), std::invalid_argument);
    Eigen::MatrixXd big(1, 2);
    big << 1.0, 1.0;
    EXPECT_THROW(ArmSet{big}, std::invalid_argument);
    Eigen::MatrixXd ok(2, 2);
    ok << 1.0, 0.0, std::sqrt(0.5), std::sqrt(0.5);
    const ArmSet arms(ok);
    EXPECT_EQ(arms.K(), 2u);
    EXPECT_EQ(arms.d(), 2u);
    EXPECT_THROW(arms.rows({2}), std::invalid_argument);
    EXPECT_EQ(arms.rows({1, 0}).row(1), ok.row(0));
}

TEST(BanditInstance, BestArmTieBreaksToLowestIndex) {
    Eigen::MatrixXd X(3, 2);
    X << 0.0, 1.0, 1.0, 0.0, 1.0, 0.0;
    const BanditInstance inst(ArmSet(X), Eigen::Vector2d(1.0, 0.0));
    EXPECT_EQ(inst.best_arm(), 1u);
    EXPECT_DOUBLE_EQ(inst.gaps()[0], 1.0);
    EXPECT_DOUBLE_EQ(inst.gaps()[2], 0.0);
    EXPECT_THROW(BanditInstance(ArmSet(X), Eigen::Vector2d(1.0, 1.0)), std::invalid_argument);
}

TEST(ScheduleParams, FixedZetaAndValidation) {
    const ScheduleParams p(100, 1.0, 0.01);
    EXPECT_EQ(p.zeta, 0.5);
    EXPECT_THROW(ScheduleParams(3, 1.0, 0.1), std::invalid_argument);
    EXPECT_THROW(ScheduleParams(10, 0.0, 0.1), std::invalid_argument);
    EXPECT_THROW(ScheduleParams(10, 1.0, 1.0), std::invalid_argument);
}

TEST(RunTrace, BatchesStartedBy) {
    RunTrace tr;
    tr.batch_boundaries = {10, 30, 100};
    EXPECT_EQ(tr.batches_started_by(1), 1u);
    EXPECT_EQ(tr.batches_started_by(10), 1u);
    EXPECT_EQ(tr.batches_started_by(11), 2u);
    EXPECT_EQ(tr.batches_started_by(100), 3u);
}
