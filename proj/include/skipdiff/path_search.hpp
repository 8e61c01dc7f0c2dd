#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "skipdiff/denoiser.hpp"
#include "skipdiff/latent.hpp"
#include "skipdiff/scheduler.hpp"

namespace skipdiff {

struct SearchTask {
    const SchedulerPlan* plan = nullptr;
    const GmmModel* model = nullptr;
    LatentState x_T;
    int target_skips = 0;            // N, in [0, T-1]
    NormKind distance = NormKind::L1;
    uint64_t seed = 0;               // injected-noise stream (SDE plans)
};

// Runs the reverse process under an externally fixed path: evaluates the
// denoiser exactly where path is true, reuses the last prediction elsewhere.
// A leading false is a hard error (no noise to reuse).
std::pair<Trajectory, Vec> run_with_path(const SchedulerPlan& plan, DenoiserHandle& denoiser,
                                         const LatentState& x_T, const SkipPath& path,
                                         uint64_t seed = 0);

struct GreedyRound {
    int n_skips = 0;
    SkipPath path;
    double distance = 0.0;
};

// Greedy search: starting from all-true, repeatedly flips the single index
// whose removal least perturbs the final latent (ties: lowest index). Index 0
// is never skippable. Returns one row per flip, distances against the
// full-step final latent.
std::vector<GreedyRound> greedy_search_trace(const SearchTask& task);
SkipPath greedy_search(const SearchTask& task);

// Exhaustive oracle over all paths with exactly N skips (index 0 kept).
// Guarded to C(T-1, N) <= 1e6 candidates; ties break to the
// lexicographically smallest path (skips sort before evaluations).
std::pair<SkipPath, double> brute_force_search(const SearchTask& task);

}  // namespace skipdiff
