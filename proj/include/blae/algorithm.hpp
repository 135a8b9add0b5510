#pragma once

#include <cstdint>
#include <vector>

#include "blae/core_types.hpp"
#include "blae/envsim.hpp"

namespace blae {

/// What an algorithm reports about its own run; regret is tracked by the environment.
struct AlgorithmOutcome {
    std::vector<std::int64_t> batch_boundaries;
    // Surviving original arm indices after each batch; empty when the algorithm never eliminates.
    std::vector<std::vector<ArmIndex>> active_sets;
};

/// Combines the simulator's regret record with the algorithm's own report.
inline RunTrace make_trace(const Environment& env, const AlgorithmOutcome& outcome, double wall_time) {
    RunTrace trace;
    trace.cumulative_regret = env.cumulative_regret();
    trace.batch_boundaries = outcome.batch_boundaries;
    trace.eliminations = outcome.active_sets;
    trace.optimal_arm_retained.reserve(outcome.active_sets.size());
    const ArmIndex best = env.best_arm();
    for (const auto& active : outcome.active_sets) {
        bool kept = false;
        for (ArmIndex a : active) kept = kept || a == best;
        trace.optimal_arm_retained.push_back(kept);
    }
    trace.wall_time = wall_time;
    return trace;
}

}  // namespace blae
