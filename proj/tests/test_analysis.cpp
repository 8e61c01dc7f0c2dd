#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "skipdiff/analysis.hpp"
#include "skipdiff/path_search.hpp"
#include "skipdiff/rng.hpp"

using namespace skipdiff;

namespace {

LatentState ve_initial(const SchedulerPlan& plan, std::size_t dim, uint64_t seed) {
    LatentState x;
    x.step_index = plan.steps();
    x.values.resize(dim);
    rng::Stream stream = rng::init_stream(seed);
    stream.fill_gaussian(x.values);
    double s = plan.schedule.values.back();
    for (double& v : x.values) v *= s;
    return x;
}

GmmModel unit_gaussian(int dim) {
    GmmModel m;
    m.weights = {1.0};
    m.means = {Vec(dim, 0.0)};
    m.scales = {1.0};
    return m;
}

double max_lipschitz_over_plan(const GmmModel& model, const SchedulerPlan& plan) {
    double worst = 0.0;
    for (int i = 0; i <= plan.steps(); ++i) {
        worst = std::max(worst, gmm_lipschitz_bound(model, level_at(plan, i)));
    }
    return worst;
}

}  // namespace

TEST_CASE("one-step skip error, direct formula") {
    SchedulerPlan plan;
    plan.f = {1.0, 1.0};
    plan.g = {0.5, 0.25};
    plan.sde_noise_scale = {0.0, 0.0};
    plan.schedule.values = {0.1, 0.2, 0.3};
    plan.schedule.t_grid = {0.1, 0.2, 0.3};

    Vec eps{1.0, 1.0};
    CHECK(one_step_skip_error_exact(plan, 1, eps, eps) == 0.0);
    // g = 0.5, ||d_eps|| = 2
    CHECK(one_step_skip_error_exact(plan, 1, {2.0, 2.0}, {0.0, 0.0}) ==
          doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(one_step_skip_error_exact(plan, 3, eps, eps), std::out_of_range);
}

TEST_CASE("one-step skip error equals the paired-run difference") {
    rng::Stream stream(61);
    int checked = 0;
    for (int rep = 0; rep < 30 && checked < 15; ++rep) {
        GmmModel model = seeded_gmm_model(300 + rep, 1 + rep % 3, 4);
        SchedulerPlan plan = rep % 2 == 0 ? build_euler_ve_plan(20, 40.0, 0.01)
                                          : build_ddim_plan(20, 1e-4, 0.02, 1000);
        LatentState x_T = rep % 2 == 0 ? ve_initial(plan, 4, 400 + rep)
                                       : LatentState{{stream.gaussian(), stream.gaussian(),
                                                      stream.gaussian(), stream.gaussian()},
                                                     20};
        int T = plan.steps();
        int j = 1 + static_cast<int>(stream.uniform() * (T - 1));  // skip ordinal

        SkipPath path(T, true);
        path[j] = false;
        DenoiserHandle h1 = make_gmm_denoiser(model);
        DenoiserHandle h2 = make_gmm_denoiser(model);
        Trajectory full = run_with_path(plan, h1, x_T, SkipPath(T, true), rep).first;
        Trajectory skipped = run_with_path(plan, h2, x_T, path, rep).first;

        double measured = latent_norm(
            first_diff(skipped.latents[j + 1], full.latents[j + 1]), NormKind::L2);
        double identity =
            one_step_skip_error_exact(plan, T - j, full.noises[j - 1], full.noises[j]);
        // skip draws whose perturbation sits at the latents' rounding floor
        double floor = latent_norm(full.latents[j + 1].values, NormKind::L2) / 2000.0;
        if (identity < floor) continue;
        ++checked;
        CHECK(std::fabs(measured - identity) / identity < 1e-12);
    }
    CHECK(checked >= 15);
}

TEST_CASE("k-step bound, single-term instantiation and zero case") {
    SchedulerPlan plan;
    plan.f = {0.9, 0.8, 0.7};
    plan.g = {0.5, 0.4, 0.3};
    plan.sde_noise_scale = {0.0, 0.0, 0.0};
    plan.schedule.values = {0.1, 0.2, 0.3, 0.4};
    plan.schedule.t_grid = {0.1, 0.2, 0.3, 0.4};

    std::vector<double> dx{0.1, 0.2, 0.3};
    std::vector<double> dt{0.01, 0.02, 0.03};
    double lx = 2.0, lt = 5.0;
    // k = 1 at i = 2: g(1) * (lx dx[2] + lt dt[2])
    CHECK(k_step_error_bound(plan, 2, 1, dx, dt, lx, lt) ==
          doctest::Approx(0.4 * (2.0 * 0.3 + 5.0 * 0.03)).epsilon(1e-14));

    std::vector<double> zeros{0.0, 0.0, 0.0};
    CHECK(k_step_error_bound(plan, 2, 2, zeros, zeros, lx, lt) == 0.0);

    CHECK_THROWS_AS(k_step_error_bound(plan, 1, 2, dx, dt, lx, lt), std::invalid_argument);
    CHECK_THROWS_AS(k_step_error_bound(plan, 3, 1, dx, dt, lx, lt), std::invalid_argument);
}

TEST_CASE("k-step bound dominates measured errors, single gaussian") {
    GmmModel model = unit_gaussian(4);
    SchedulerPlan plan = build_euler_ve_plan(20, 40.0, 0.01);
    int T = plan.steps();

    for (uint64_t seed : {70, 71, 72}) {
        LatentState x_T = ve_initial(plan, 4, seed);
        DenoiserHandle h = make_gmm_denoiser(model);
        Trajectory full = run_with_path(plan, h, x_T, SkipPath(T, true), seed).first;
        std::vector<double> dx = step_diff_norms(full);
        std::vector<double> dt = t_grid_diffs(plan);
        double lx = max_lipschitz_over_plan(model, plan);
        double lt = temporal_lipschitz_estimate(plan, model, full);

        for (int i : {6, 12, 18}) {
            for (int k = 1; k <= 4; ++k) {
                SkipPath path(T, true);
                for (int m = 1; m <= k; ++m) path[T - i + m - 1] = false;
                DenoiserHandle hs = make_gmm_denoiser(model);
                Trajectory skipped = run_with_path(plan, hs, x_T, path, seed).first;
                for (int m = 1; m <= k; ++m) {
                    int ordinal = T - i + m - 1;
                    double measured = latent_norm(
                        first_diff(skipped.latents[ordinal + 1], full.latents[ordinal + 1]),
                        NormKind::L2);
                    double bound = k_step_error_bound(plan, i, m, dx, dt, lx, lt);
                    CHECK(measured <= bound * (1.0 + 1e-12));
                }
            }
        }
    }
}

TEST_CASE("skip error report assembles measurements, identity, and bounds") {
    GmmModel model = unit_gaussian(4);
    SchedulerPlan plan = build_euler_ve_plan(20, 40.0, 0.01);
    LatentState x_T = ve_initial(plan, 4, 73);
    ErrorBoundReport report = skip_error_report(plan, model, x_T, 10, 3, 73);
    REQUIRE(report.measured.size() == 3);
    REQUIRE(report.bounds.size() == 3);
    CHECK(report.one_step_identity == doctest::Approx(report.measured[0]).epsilon(1e-12));
    for (int m = 0; m < 3; ++m) CHECK(report.measured[m] <= report.bounds[m]);
    CHECK(report.lip_x > 0.0);
    CHECK(report.lip_t > 0.0);
    CHECK_THROWS_AS(skip_error_report(plan, model, x_T, 2, 3, 73), std::invalid_argument);
}

TEST_CASE("accumulation curve") {
    GmmModel model = default_gmm_model();
    SchedulerPlan plan = build_euler_ve_plan(30, 80.0, 0.002);
    LatentState x_T = ve_initial(plan, 16, 81);

    auto zero_series = accumulation_curve(plan, model, x_T, SkipPath(30, true), 81);
    for (const auto& [step, err] : zero_series) CHECK(err == 0.0);

    SkipPath one(30, true);
    one[10] = false;
    auto series = accumulation_curve(plan, model, x_T, one, 81);
    DenoiserHandle h = make_gmm_denoiser(model);
    Trajectory full = run_with_path(plan, h, x_T, SkipPath(30, true), 81).first;
    double identity =
        one_step_skip_error_exact(plan, 30 - 10, full.noises[9], full.noises[10]);
    for (int j = 0; j < 10; ++j) CHECK(series[j].second == 0.0);
    CHECK(series[10].second == doctest::Approx(identity).epsilon(1e-12));

    // over a contiguous skip run the error keeps growing on the default config
    SkipPath burst(30, true);
    for (int j = 10; j < 14; ++j) burst[j] = false;
    auto burst_series = accumulation_curve(plan, model, x_T, burst, 81);
    for (int j = 10; j < 13; ++j) {
        CHECK(burst_series[j + 1].second >= burst_series[j].second);
    }
}

TEST_CASE("relation trace rejects skipped trajectories and degenerate input") {
    GmmModel model = default_gmm_model();
    SchedulerPlan plan = build_euler_ve_plan(20, 80.0, 0.002);
    LatentState x_T = ve_initial(plan, 16, 91);
    SkipPath path(20, true);
    path[5] = false;
    DenoiserHandle h = make_gmm_denoiser(model);
    Trajectory skipped = run_with_path(plan, h, x_T, path, 91).first;
    CHECK_THROWS_AS(third_order_relation_trace(skipped), std::invalid_argument);

    // constant trajectory: all series zero, correlation undefined
    Trajectory constant;
    for (int m = 0; m <= 10; ++m) constant.latents.push_back({Vec(4, 1.0), 10 - m});
    for (int j = 0; j < 10; ++j) {
        constant.noises.push_back(Vec(4, 0.25));
        constant.evaluated.push_back(true);
    }
    RelationTrace trace = third_order_relation_trace(constant);
    for (double v : trace.d_eps) CHECK(v == 0.0);
    for (double v : trace.d3x) CHECK(v == 0.0);
    CHECK(std::isnan(trace.pearson_tail));
}

TEST_CASE("relation trace on the affine single-gaussian flow") {
    GmmModel model = unit_gaussian(4);
    SchedulerPlan plan = build_euler_ve_plan(30, 40.0, 0.01);
    LatentState x_T = ve_initial(plan, 4, 101);
    DenoiserHandle h = make_gmm_denoiser(model);
    auto [traj, report] = run_baseline(plan, h, x_T, 101);
    RelationTrace trace = third_order_relation_trace(traj);
    REQUIRE(trace.d_eps.size() == 28);
    for (std::size_t r = 0; r < trace.d_eps.size(); ++r) {
        CHECK(trace.d_eps[r] > 0.0);
        CHECK(trace.d3x[r] > 0.0);
        CHECK(std::isfinite(trace.d_eps[r] / trace.d3x[r]));
    }
}

TEST_CASE("relation trace correlation is positive on default GMM runs") {
    GmmModel model = default_gmm_model();
    SchedulerPlan plan = build_euler_ve_plan(50, 80.0, 0.002);
    for (uint64_t seed : {111, 112, 113}) {
        LatentState x_T = ve_initial(plan, 16, seed);
        DenoiserHandle h = make_gmm_denoiser(model);
        auto [traj, report] = run_baseline(plan, h, x_T, seed);
        RelationTrace trace = third_order_relation_trace(traj);
        CHECK(trace.pearson_tail > 0.0);
    }
}

TEST_CASE("contingency table construction") {
    SkipPath est = path_from_string("ESES");
    ContingencyTable2x2 t = build_contingency(est, est);
    CHECK(t.counts[0][0] == 2);  // skip, skip
    CHECK(t.counts[1][1] == 2);  // eval, eval
    CHECK(t.counts[0][1] == 0);
    CHECK(t.counts[1][0] == 0);

    SkipPath complement = path_from_string("SESE");
    ContingencyTable2x2 c = build_contingency(est, complement);
    CHECK(c.counts[0][0] == 0);
    CHECK(c.counts[1][1] == 0);
    CHECK(c.counts[0][1] == 2);
    CHECK(c.counts[1][0] == 2);

    CHECK_THROWS_AS(build_contingency(est, path_from_string("ES")), std::invalid_argument);
    CHECK_THROWS_AS(build_contingency(est, path_from_string("EEES")), std::invalid_argument);
}

TEST_CASE("contingency counting with partial overlap") {
    // two length-50 paths with 25 skips each, 20 overlapping
    SkipPath a(50, true), b(50, true);
    for (int j = 0; j < 25; ++j) a[j] = false;
    for (int j = 5; j < 30; ++j) b[j] = false;
    ContingencyTable2x2 t = build_contingency(a, b);
    CHECK(t.counts[0][0] == 20);
    CHECK(t.counts[0][1] == 5);
    CHECK(t.counts[1][0] == 5);
    CHECK(t.counts[1][1] == 20);
}

TEST_CASE("chi-squared reference values") {
    ContingencyTable2x2 t1;
    t1.counts[0][0] = 10;
    t1.counts[0][1] = 20;
    t1.counts[1][0] = 20;
    t1.counts[1][1] = 10;
    auto [chi1, p1] = chi2_2x2(t1);
    CHECK(chi1 == doctest::Approx(6.6667).epsilon(2e-4));
    CHECK(p1 == doctest::Approx(0.00982).epsilon(1e-2));
    CHECK(std::fabs(p1 - 0.00982) < 1e-4);

    ContingencyTable2x2 t2;
    t2.counts[0][0] = 5;
    t2.counts[0][1] = 5;
    t2.counts[1][0] = 5;
    t2.counts[1][1] = 5;
    auto [chi2v, p2] = chi2_2x2(t2);
    CHECK(chi2v == 0.0);
    CHECK(p2 == 1.0);

    ContingencyTable2x2 t3;
    t3.counts[0][0] = 20;
    t3.counts[0][1] = 5;
    t3.counts[1][0] = 5;
    t3.counts[1][1] = 20;
    auto [chi3, p3] = chi2_2x2(t3);
    CHECK(chi3 == doctest::Approx(18.0).epsilon(1e-6));
    CHECK(p3 < 3e-5);

    ContingencyTable2x2 zero_marginal;
    zero_marginal.counts[1][0] = 7;
    zero_marginal.counts[1][1] = 3;
    CHECK_THROWS_AS(chi2_2x2(zero_marginal), std::invalid_argument);
}

TEST_CASE("chi-squared label-permutation invariance and p monotonicity") {
    ContingencyTable2x2 t;
    t.counts[0][0] = 17;
    t.counts[0][1] = 6;
    t.counts[1][0] = 9;
    t.counts[1][1] = 21;
    ContingencyTable2x2 swapped;
    swapped.counts[0][0] = t.counts[1][1];
    swapped.counts[0][1] = t.counts[1][0];
    swapped.counts[1][0] = t.counts[0][1];
    swapped.counts[1][1] = t.counts[0][0];
    CHECK(chi2_2x2(t).first == doctest::Approx(chi2_2x2(swapped).first).epsilon(1e-14));

    double prev_chi = -1.0, prev_p = 2.0;
    for (int d : {0, 2, 5, 8}) {
        ContingencyTable2x2 g;
        g.counts[0][0] = 10 + d;
        g.counts[0][1] = 10 - d;
        g.counts[1][0] = 10 - d;
        g.counts[1][1] = 10 + d;
        auto [chi, p] = chi2_2x2(g);
        CHECK(chi >= 0.0);
        CHECK(chi > prev_chi);
        CHECK(p < prev_p + 1e-15);
        prev_chi = chi;
        prev_p = p;
    }
}

TEST_CASE("psnr") {
    Vec ref{0.0, 1.0};  // range 1
    CHECK(psnr(ref, ref) == 200.0);
    CHECK(psnr(ref, {0.1, 1.1}) == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(psnr(ref, {1.0, 2.0}) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS(psnr({1.0, 1.0}, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(psnr({1.0, 2.0}, {1.0}), std::invalid_argument);

    double prev = 1e9;
    for (double mse_scale : {0.001, 0.01, 0.1, 1.0}) {
        double offset = std::sqrt(mse_scale);
        double v = psnr(ref, {0.0 + offset, 1.0 + offset});
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("path histogram") {
    std::vector<RunReport> reports(1);
    reports[0].eval_count = 26;
    auto single = path_histogram(reports);
    CHECK(single.size() == 1);
    CHECK(single[26] == 1);

    std::vector<RunReport> all_full(7);
    for (auto& r : all_full) r.eval_count = 50;
    auto full = path_histogram(all_full);
    CHECK(full[50] == 7);

    std::vector<RunReport> many(100);
    rng::Stream stream(3);
    for (auto& r : many) r.eval_count = 10 + static_cast<int>(stream.uniform() * 40.0);
    auto hist = path_histogram(many);
    int total = 0;
    for (const auto& [evals, count] : hist) total += count;
    CHECK(total == 100);

    CHECK_THROWS_AS(path_histogram({}), std::invalid_argument);
}
