#include "skipdiff/path_search.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace skipdiff {

namespace {

void check_finite(const Vec& v, int ordinal) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            std::ostringstream msg;
            msg << "non-finite latent at step " << ordinal
                << ", norm=" << latent_norm(v, NormKind::L2);
            throw std::runtime_error(msg.str());
        }
    }
}

double binomial_guarded(int n, int k) {
    double c = 1.0;
    for (int j = 1; j <= k; ++j) {
        c *= static_cast<double>(n - k + j) / static_cast<double>(j);
        if (c > 1e15) return c;
    }
    return c;
}

}  // namespace

std::pair<Trajectory, Vec> run_with_path(const SchedulerPlan& plan, DenoiserHandle& denoiser,
                                         const LatentState& x_T, const SkipPath& path,
                                         uint64_t seed) {
    int T = plan.steps();
    if (static_cast<int>(path.size()) != T) {
        throw std::invalid_argument("run_with_path: path length != T");
    }
    if (!path[0]) {
        throw std::invalid_argument("run_with_path: path[0] must evaluate, no noise to reuse");
    }
    std::size_t dim = x_T.values.size();

    Trajectory traj;
    traj.latents.reserve(T + 1);
    traj.noises.reserve(T);
    traj.evaluated.reserve(T);

    LatentState cur{x_T.values, T};
    traj.latents.push_back(cur);

    Vec cached;
    for (int j = 0; j < T; ++j) {
        int i = T - j;  // input latent index
        if (path[j]) {
            cached = denoiser.predict(cur.values, level_at(plan, i), j);
        }
        LatentState next;
        if (plan.stochastic) {
            Vec inj = injected_noise(plan, seed, j, dim);
            next = apply_update(plan, i, cur, cached, &inj);
        } else {
            next = apply_update(plan, i, cur, cached, nullptr);
        }
        check_finite(next.values, j);
        traj.noises.push_back(cached);
        traj.evaluated.push_back(path[j]);
        traj.latents.push_back(next);
        cur = std::move(next);
    }
    Vec final_latent = traj.latents.back().values;
    return {std::move(traj), std::move(final_latent)};
}

std::vector<GreedyRound> greedy_search_trace(const SearchTask& task) {
    const SchedulerPlan& plan = *task.plan;
    int T = plan.steps();
    int N = task.target_skips;
    if (N >= T) throw std::invalid_argument("greedy_search: N must be < T");
    if (N < 0) throw std::invalid_argument("greedy_search: N must be >= 0");

    DenoiserHandle ref_handle = make_gmm_denoiser(*task.model);
    SkipPath all_true(T, true);
    Vec x0_ref = run_with_path(plan, ref_handle, task.x_T, all_true, task.seed).second;

    SkipPath path = all_true;
    std::vector<GreedyRound> rounds;
    for (int n = 1; n <= N; ++n) {
        int best_index = -1;
        double best_dist = 0.0;
        for (int idx = 1; idx < T; ++idx) {
            if (!path[idx]) continue;
            SkipPath candidate = path;
            candidate[idx] = false;
            DenoiserHandle h = make_gmm_denoiser(*task.model);
            Vec x0 = run_with_path(plan, h, task.x_T, candidate, task.seed).second;
            double dist = latent_norm(first_diff(x0, x0_ref), task.distance);
            if (best_index < 0 || dist < best_dist) {
                best_index = idx;
                best_dist = dist;
            }
        }
        path[best_index] = false;
        rounds.push_back({n, path, best_dist});
    }
    return rounds;
}

SkipPath greedy_search(const SearchTask& task) {
    if (task.target_skips == 0) {
        return SkipPath(task.plan->steps(), true);
    }
    return greedy_search_trace(task).back().path;
}

std::pair<SkipPath, double> brute_force_search(const SearchTask& task) {
    const SchedulerPlan& plan = *task.plan;
    int T = plan.steps();
    int N = task.target_skips;
    if (N < 0 || N > T - 1) throw std::invalid_argument("brute_force_search: N out of range");
    if (binomial_guarded(T - 1, N) > 1e6) {
        throw std::invalid_argument(
            "brute_force_search: C(T-1, N) exceeds 1e6 candidates, use smaller T or N");
    }

    DenoiserHandle ref_handle = make_gmm_denoiser(*task.model);
    SkipPath all_true(T, true);
    Vec x0_ref = run_with_path(plan, ref_handle, task.x_T, all_true, task.seed).second;
    if (N == 0) return {all_true, 0.0};

    // skip positions chosen from 1..T-1, enumerated in ascending tuple order,
    // which coincides with lexicographic path order (skips sort first)
    std::vector<int> pos(N);
    for (int m = 0; m < N; ++m) pos[m] = m + 1;

    SkipPath best_path;
    double best_dist = 0.0;
    bool have_best = false;
    while (true) {
        SkipPath candidate(T, true);
        for (int p : pos) candidate[p] = false;
        DenoiserHandle h = make_gmm_denoiser(*task.model);
        Vec x0 = run_with_path(plan, h, task.x_T, candidate, task.seed).second;
        double dist = latent_norm(first_diff(x0, x0_ref), task.distance);
        if (!have_best || dist < best_dist) {
            have_best = true;
            best_dist = dist;
            best_path = candidate;
        }

        int m = N - 1;
        while (m >= 0 && pos[m] == T - 1 - (N - 1 - m)) --m;
        if (m < 0) break;
        ++pos[m];
        for (int r = m + 1; r < N; ++r) pos[r] = pos[r - 1] + 1;
    }
    return {best_path, best_dist};
}

}  // namespace skipdiff
