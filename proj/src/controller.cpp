#include "skipdiff/controller.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "skipdiff/analysis.hpp"
#include "skipdiff/path_search.hpp"

namespace skipdiff {

namespace {

constexpr double kStationaryTol = 1e-15;

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

RunReport make_report(const SchedulerPlan& plan, uint64_t seed, const ControllerConfig& cfg,
                      const Trajectory& traj, const Vec& reference_final) {
    RunReport r;
    r.seed = seed;
    r.sampler = plan.name;
    r.delta = cfg.delta;
    r.c_max = cfg.c_max;
    r.skip_path = traj.evaluated;
    r.eval_count = eval_count(traj.evaluated);
    r.speedup = static_cast<double>(plan.steps()) / static_cast<double>(r.eval_count);
    r.final_latent = traj.final_latent();
    Vec diff = first_diff(r.final_latent, reference_final);
    r.l1_err = latent_norm(diff, NormKind::L1);
    r.rms_err = latent_norm(diff, NormKind::L2);
    r.psnr_db = psnr(reference_final, r.final_latent);
    return r;
}

}  // namespace

void ControllerConfig::validate() const {
    if (std::isnan(delta) || delta < 0.0) {
        throw std::invalid_argument("ControllerConfig: delta must be >= 0");
    }
    if (c_max < 1) throw std::invalid_argument("ControllerConfig: c_max must be positive");
    if (warmup < 3) throw std::invalid_argument("ControllerConfig: warmup must be >= 3");
    if (std::isnan(sde_delta) || sde_delta < 0.0) {
        throw std::invalid_argument("ControllerConfig: sde_delta must be >= 0");
    }
}

bool should_evaluate(const ControllerState& state, const ControllerConfig& cfg) {
    if (!state.window.full()) {
        throw std::invalid_argument("should_evaluate: window not populated");
    }
    double d3 = latent_norm(third_diff(state.window), cfg.norm_kind);
    double dx = latent_norm(state.window.diff(1), cfg.norm_kind);
    if (d3 < kStationaryTol && dx < kStationaryTol) return false;  // stationary
    if (state.consecutive_skips >= cfg.c_max) return true;
    return d3 >= cfg.delta * dx;
}

bool sde_should_evaluate(const ControllerState& state, const ControllerConfig& cfg) {
    if (!state.stochastic) {
        throw std::logic_error("sde_should_evaluate: plan has no injected noise stream");
    }
    if (!state.noise_window.full()) {
        throw std::invalid_argument("sde_should_evaluate: noise window not populated");
    }
    if (should_evaluate(state, cfg)) return true;

    // latent criterion says skip; require the injected stream to be stable too
    double peak = 0.0;
    for (int k = 0; k < 4; ++k) {
        peak = std::max(peak, latent_norm(state.noise_window.latent(k), cfg.norm_kind));
    }
    if (peak < kStationaryTol) return false;  // zero stream, latent criterion decides

    double dn3 = latent_norm(third_diff(state.noise_window), cfg.norm_kind);
    double dn = latent_norm(state.noise_window.diff(1), cfg.norm_kind);
    return !(dn3 < cfg.sde_delta * dn);
}

std::pair<Trajectory, RunReport> run_baseline(const SchedulerPlan& plan,
                                              DenoiserHandle& denoiser,
                                              const LatentState& x_T, uint64_t seed) {
    SkipPath all_true(plan.steps(), true);
    auto [traj, final_latent] = run_with_path(plan, denoiser, x_T, all_true, seed);
    ControllerConfig cfg;
    RunReport report = make_report(plan, seed, cfg, traj, final_latent);
    report.delta = 0.0;
    return {std::move(traj), std::move(report)};
}

std::pair<Trajectory, RunReport> run_adaptive(const SchedulerPlan& plan,
                                              DenoiserHandle& denoiser,
                                              const LatentState& x_T,
                                              const ControllerConfig& cfg, uint64_t seed) {
    cfg.validate();
    int T = plan.steps();
    std::size_t dim = x_T.values.size();

    Trajectory traj;
    traj.latents.reserve(T + 1);
    traj.noises.reserve(T);
    traj.evaluated.reserve(T);

    LatentState cur{x_T.values, T};
    traj.latents.push_back(cur);

    ControllerState state;
    state.stochastic = plan.stochastic;
    state.window.push(cur.values);
    if (state.stochastic) state.noise_window.push(Vec(dim, 0.0));

    bool next_eval = true;
    for (int j = 0; j < T; ++j) {
        int i = T - j;  // input latent index
        bool eval = j < cfg.warmup ? true : next_eval;
        if (eval) {
            state.cached_noise = denoiser.predict(cur.values, level_at(plan, i), j);
            state.consecutive_skips = 0;
        } else {
            ++state.consecutive_skips;
        }

        LatentState next;
        Vec inj;
        if (plan.stochastic) {
            inj = injected_noise(plan, seed, j, dim);
            next = apply_update(plan, i, cur, state.cached_noise, &inj);
        } else {
            next = apply_update(plan, i, cur, state.cached_noise, nullptr);
        }
        check_finite(next.values, j);

        traj.noises.push_back(state.cached_noise);
        traj.evaluated.push_back(eval);
        state.decisions.push_back(eval);

        state.window.push(next.values);
        if (state.stochastic) state.noise_window.push(inj);
        if (state.window.full() && j + 1 < T) {
            next_eval = state.stochastic ? sde_should_evaluate(state, cfg)
                                         : should_evaluate(state, cfg);
        }
        traj.latents.push_back(next);
        cur = std::move(next);
    }

    // paired reference with the same x_T and injected stream
    DenoiserHandle paired = denoiser;
    paired.eval_count = 0;
    SkipPath all_true(T, true);
    Vec reference_final = run_with_path(plan, paired, x_T, all_true, seed).second;

    RunReport report = make_report(plan, seed, cfg, traj, reference_final);
    return {std::move(traj), std::move(report)};
}

std::string report_to_json(const RunReport& report) {
    nlohmann::json j;
    j["seed"] = report.seed;
    j["sampler"] = report.sampler;
    j["delta"] = report.delta;
    j["c_max"] = report.c_max;
    j["eval_count"] = report.eval_count;
    j["skip_path"] = path_to_string(report.skip_path);
    j["speedup"] = report.speedup;
    j["l1_err"] = report.l1_err;
    j["rms_err"] = report.rms_err;
    j["psnr"] = report.psnr_db;
    return j.dump(2);
}

}  // namespace skipdiff
