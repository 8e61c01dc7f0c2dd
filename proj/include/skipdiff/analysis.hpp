#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "skipdiff/controller.hpp"
#include "skipdiff/denoiser.hpp"
#include "skipdiff/latent.hpp"
#include "skipdiff/scheduler.hpp"

namespace skipdiff {

// Exact error of one skipped prediction before any Lipschitz relaxation:
// ||g(i-1) * (eps_prev - eps_curr)||.
double one_step_skip_error_exact(const SchedulerPlan& plan, int i, const Vec& eps_prev,
                                 const Vec& eps_curr, NormKind norm = NormKind::L2);

// Explicit k-step bound assembled from measured per-step difference norms,
// the time grid, and Lipschitz constants: B_1 = g(i-1)(Lx dx_i + Lt dt_i),
// B_m = f(i-m) B_{m-1} + g(i-m) sum_{l=i-m+1..i} (Lx dx_l + Lt dt_l).
// Expanding the recursion reproduces the composed coefficients
// h^{k-m+1}(i-m) = g(i-m) prod_j f(i-m-j). dx_norms[l] = ||x_l - x_{l+1}||,
// dt_abs[l] = |t_l - t_{l+1}|.
double k_step_error_bound(const SchedulerPlan& plan, int i, int k,
                          std::span<const double> dx_norms, std::span<const double> dt_abs,
                          double lip_x, double lip_t);

// Per-step ||x_l - x_{l+1}|| of a recorded trajectory, indexed by latent index l.
std::vector<double> step_diff_norms(const Trajectory& traj, NormKind norm = NormKind::L2);

// |t_l - t_{l+1}| from the plan's time grid, indexed by latent index l.
std::vector<double> t_grid_diffs(const SchedulerPlan& plan);

// Largest finite-difference slope of the denoiser across adjacent grid times,
// probed at the trajectory's own latents, inflated 2x.
double temporal_lipschitz_estimate(const SchedulerPlan& plan, const GmmModel& model,
                                   const Trajectory& baseline, NormKind norm = NormKind::L2);

// Paired full/skipped runs; one (ordinal, ||x_skip - x_ori||) entry per step.
std::vector<std::pair<int, double>> accumulation_curve(const SchedulerPlan& plan,
                                                       const GmmModel& model,
                                                       const LatentState& x_T,
                                                       const SkipPath& path, uint64_t seed = 0,
                                                       NormKind norm = NormKind::L2);

// Measured errors of a k-step skip starting at latent index i, next to the
// exact one-step identity and the assembled bounds. With certified constants
// bounds[m] >= measured[m] at every reported step.
struct ErrorBoundReport {
    int skip_start_index = 0;  // i
    int k = 0;
    double lip_x = 0.0;
    double lip_t = 0.0;
    double one_step_identity = 0.0;
    std::vector<double> measured;  // ||x_{i-m} - x_{i-m}^ori||, m = 1..k
    std::vector<double> bounds;    // B_m, m = 1..k
};

ErrorBoundReport skip_error_report(const SchedulerPlan& plan, const GmmModel& model,
                                   const LatentState& x_T, int i, int k, uint64_t seed = 0,
                                   NormKind norm = NormKind::L2);

// Aligned series over a fully evaluated trajectory: for each latent index i,
// ||eps(x_i,t_i) - eps(x_{i+1},t_{i+1})|| against ||d3x_{i-1}|| and the
// relative trace ||d3x_{i-1}|| / ||dx_i||. Rows ordered by trajectory
// progression; the Pearson correlation is taken over the trailing fraction.
struct RelationTrace {
    std::vector<int> latent_index;
    std::vector<double> d_eps;
    std::vector<double> d3x;
    std::vector<double> rel;
    double pearson_tail = 0.0;  // NaN when undefined
};
RelationTrace third_order_relation_trace(const Trajectory& traj, NormKind norm = NormKind::L2,
                                         double tail_fraction = 1.0 / 3.0);

double pearson(std::span<const double> a, std::span<const double> b);

// rows: estimated decision, cols: oracle decision; index 0 = skip, 1 = eval.
struct ContingencyTable2x2 {
    long counts[2][2] = {{0, 0}, {0, 0}};
    long total() const { return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]; }
};

ContingencyTable2x2 build_contingency(const SkipPath& estimated, const SkipPath& oracle);

// Pearson chi-squared with 1 dof, no continuity correction;
// p = erfc(sqrt(chi2 / 2)).
std::pair<double, double> chi2_2x2(const ContingencyTable2x2& table);

// 10*log10(R^2 / MSE) with R the reference dynamic range; identical inputs
// cap at the 200 dB sentinel.
double psnr(const Vec& reference, const Vec& candidate);

std::map<int, int> path_histogram(const std::vector<RunReport>& reports);

}  // namespace skipdiff
