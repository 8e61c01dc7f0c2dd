#include "skipdiff/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "skipdiff/path_search.hpp"

namespace skipdiff {

double one_step_skip_error_exact(const SchedulerPlan& plan, int i, const Vec& eps_prev,
                                 const Vec& eps_curr, NormKind norm) {
    if (i < 1 || i > plan.steps()) {
        throw std::out_of_range("one_step_skip_error_exact: step index out of range");
    }
    Vec diff = first_diff(eps_prev, eps_curr);
    return std::fabs(plan.g[i - 1]) * latent_norm(diff, norm);
}

double k_step_error_bound(const SchedulerPlan& plan, int i, int k,
                          std::span<const double> dx_norms, std::span<const double> dt_abs,
                          double lip_x, double lip_t) {
    if (k < 1) throw std::invalid_argument("k_step_error_bound: k must be >= 1");
    if (i - k < 0 || i > plan.steps() - 1) {
        throw std::invalid_argument("k_step_error_bound: insufficient history for (i, k)");
    }
    if (dx_norms.size() < static_cast<std::size_t>(i + 1) ||
        dt_abs.size() < static_cast<std::size_t>(i + 1)) {
        throw std::invalid_argument("k_step_error_bound: difference arrays too short");
    }
    auto term = [&](int l) { return lip_x * dx_norms[l] + lip_t * dt_abs[l]; };
    double bound = std::fabs(plan.g[i - 1]) * term(i);
    for (int m = 2; m <= k; ++m) {
        double sum = 0.0;
        for (int l = i - m + 1; l <= i; ++l) sum += term(l);
        bound = std::fabs(plan.f[i - m]) * bound + std::fabs(plan.g[i - m]) * sum;
    }
    return bound;
}

std::vector<double> step_diff_norms(const Trajectory& traj, NormKind norm) {
    int T = traj.steps();
    std::vector<double> out(T);
    for (int l = 0; l < T; ++l) {
        // latents[m] = x_{T-m}: x_l - x_{l+1} = latents[T-l] - latents[T-l-1]
        Vec d = first_diff(traj.latents[T - l], traj.latents[T - l - 1]);
        out[l] = latent_norm(d, norm);
    }
    return out;
}

std::vector<double> t_grid_diffs(const SchedulerPlan& plan) {
    int T = plan.steps();
    std::vector<double> out(T);
    for (int l = 0; l < T; ++l) {
        out[l] = std::fabs(plan.t_at(l) - plan.t_at(l + 1));
    }
    return out;
}

double temporal_lipschitz_estimate(const SchedulerPlan& plan, const GmmModel& model,
                                   const Trajectory& baseline, NormKind norm) {
    int T = plan.steps();
    double worst = 0.0;
    for (int l = 0; l < T; ++l) {
        const Vec& x = baseline.latents[T - l].values;  // x_l
        Vec a = gmm_epsilon(model, x, level_at(plan, l));
        Vec b = gmm_epsilon(model, x, level_at(plan, l + 1));
        double dt = std::fabs(plan.t_at(l) - plan.t_at(l + 1));
        if (dt > 0.0) {
            worst = std::max(worst, latent_norm(first_diff(a, b), norm) / dt);
        }
    }
    return 2.0 * worst;
}

std::vector<std::pair<int, double>> accumulation_curve(const SchedulerPlan& plan,
                                                       const GmmModel& model,
                                                       const LatentState& x_T,
                                                       const SkipPath& path, uint64_t seed,
                                                       NormKind norm) {
    int T = plan.steps();
    DenoiserHandle full_handle = make_gmm_denoiser(model);
    DenoiserHandle path_handle = make_gmm_denoiser(model);
    SkipPath all_true(T, true);
    Trajectory full = run_with_path(plan, full_handle, x_T, all_true, seed).first;
    Trajectory skipped = run_with_path(plan, path_handle, x_T, path, seed).first;

    std::vector<std::pair<int, double>> series;
    series.reserve(T);
    for (int j = 0; j < T; ++j) {
        Vec d = first_diff(skipped.latents[j + 1], full.latents[j + 1]);
        series.emplace_back(j, latent_norm(d, norm));
    }
    return series;
}

ErrorBoundReport skip_error_report(const SchedulerPlan& plan, const GmmModel& model,
                                   const LatentState& x_T, int i, int k, uint64_t seed,
                                   NormKind norm) {
    int T = plan.steps();
    if (k < 1 || i - k < 0 || i > T - 1) {
        throw std::invalid_argument("skip_error_report: insufficient history for (i, k)");
    }

    DenoiserHandle full_handle = make_gmm_denoiser(model);
    Trajectory full = run_with_path(plan, full_handle, x_T, SkipPath(T, true), seed).first;

    SkipPath path(T, true);
    for (int m = 1; m <= k; ++m) path[T - i + m - 1] = false;
    DenoiserHandle skip_handle = make_gmm_denoiser(model);
    Trajectory skipped = run_with_path(plan, skip_handle, x_T, path, seed).first;

    ErrorBoundReport report;
    report.skip_start_index = i;
    report.k = k;
    for (int m = 0; m <= T; ++m) {
        report.lip_x = std::max(report.lip_x, gmm_lipschitz_bound(model, level_at(plan, m)));
    }
    report.lip_t = temporal_lipschitz_estimate(plan, model, full, norm);
    int first_skip = T - i;
    report.one_step_identity = one_step_skip_error_exact(
        plan, i, full.noises[first_skip - 1], full.noises[first_skip], norm);

    std::vector<double> dx = step_diff_norms(full, norm);
    std::vector<double> dt = t_grid_diffs(plan);
    for (int m = 1; m <= k; ++m) {
        int ordinal = T - i + m - 1;
        report.measured.push_back(latent_norm(
            first_diff(skipped.latents[ordinal + 1], full.latents[ordinal + 1]), norm));
        report.bounds.push_back(
            k_step_error_bound(plan, i, m, dx, dt, report.lip_x, report.lip_t));
    }
    return report;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return sab / std::sqrt(saa * sbb);
}

RelationTrace third_order_relation_trace(const Trajectory& traj, NormKind norm,
                                         double tail_fraction) {
    int T = traj.steps();
    for (bool e : traj.evaluated) {
        if (!e) {
            throw std::invalid_argument(
                "third_order_relation_trace: requires a fully evaluated trajectory");
        }
    }
    if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) {
        throw std::invalid_argument("third_order_relation_trace: bad tail fraction");
    }

    RelationTrace trace;
    // noises[j] = eps(x_{T-j}, t_{T-j}); d_eps at latent index i pairs with
    // d3x_{i-1}, defined for i in [1, T-2], ordered by trajectory progression.
    for (int i = T - 2; i >= 1; --i) {
        Vec de = first_diff(traj.noises[T - i], traj.noises[T - i - 1]);
        auto lat = [&](int idx) { return traj.latents[T - idx].values; };
        Vec dx_new = first_diff(lat(i - 1), lat(i));
        Vec dx_mid = first_diff(lat(i), lat(i + 1));
        Vec dx_old = first_diff(lat(i + 1), lat(i + 2));
        Vec d3(dx_new.size());
        for (std::size_t d = 0; d < d3.size(); ++d) {
            d3[d] = dx_new[d] - 2.0 * dx_mid[d] + dx_old[d];
        }
        double dxn = latent_norm(dx_mid, norm);
        double d3n = latent_norm(d3, norm);
        trace.latent_index.push_back(i);
        trace.d_eps.push_back(latent_norm(de, norm));
        trace.d3x.push_back(d3n);
        trace.rel.push_back(dxn > 0.0 ? d3n / dxn
                                      : std::numeric_limits<double>::quiet_NaN());
    }

    std::size_t n = trace.d_eps.size();
    std::size_t tail = std::max<std::size_t>(2, static_cast<std::size_t>(
                                                    std::floor(tail_fraction * n)));
    tail = std::min(tail, n);
    trace.pearson_tail = pearson(
        std::span<const double>(trace.d_eps).subspan(n - tail),
        std::span<const double>(trace.d3x).subspan(n - tail));
    return trace;
}

ContingencyTable2x2 build_contingency(const SkipPath& estimated, const SkipPath& oracle) {
    if (estimated.size() != oracle.size()) {
        throw std::invalid_argument("build_contingency: path length mismatch");
    }
    if (eval_count(estimated) != eval_count(oracle)) {
        throw std::invalid_argument("build_contingency: skip counts differ");
    }
    ContingencyTable2x2 table;
    for (std::size_t j = 0; j < estimated.size(); ++j) {
        int r = estimated[j] ? 1 : 0;
        int c = oracle[j] ? 1 : 0;
        ++table.counts[r][c];
    }
    return table;
}

std::pair<double, double> chi2_2x2(const ContingencyTable2x2& table) {
    double n = static_cast<double>(table.total());
    if (n <= 0.0) throw std::invalid_argument("chi2_2x2: empty table");
    double row[2] = {static_cast<double>(table.counts[0][0] + table.counts[0][1]),
                     static_cast<double>(table.counts[1][0] + table.counts[1][1])};
    double col[2] = {static_cast<double>(table.counts[0][0] + table.counts[1][0]),
                     static_cast<double>(table.counts[0][1] + table.counts[1][1])};
    double chi2 = 0.0;
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
            double expected = row[r] * col[c] / n;
            if (!(expected > 0.0)) {
                throw std::invalid_argument("chi2_2x2: zero marginal, re-bin the paths");
            }
            double d = static_cast<double>(table.counts[r][c]) - expected;
            chi2 += d * d / expected;
        }
    }
    double p = std::erfc(std::sqrt(chi2 / 2.0));
    return {chi2, p};
}

double psnr(const Vec& reference, const Vec& candidate) {
    if (reference.size() != candidate.size() || reference.empty()) {
        throw std::invalid_argument("psnr: dimension mismatch");
    }
    auto [lo, hi] = std::minmax_element(reference.begin(), reference.end());
    double range = *hi - *lo;
    if (!(range > 0.0)) throw std::invalid_argument("psnr: zero dynamic range");
    double mse = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        double d = reference[i] - candidate[i];
        mse += d * d;
    }
    mse /= static_cast<double>(reference.size());
    if (mse == 0.0) return 200.0;
    return std::min(200.0, 10.0 * std::log10(range * range / mse));
}

std::map<int, int> path_histogram(const std::vector<RunReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("path_histogram: no reports");
    std::map<int, int> hist;
    for (const RunReport& r : reports) ++hist[r.eval_count];
    return hist;
}

}  // namespace skipdiff
