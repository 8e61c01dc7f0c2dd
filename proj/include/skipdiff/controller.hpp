#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "skipdiff/denoiser.hpp"
#include "skipdiff/latent.hpp"
#include "skipdiff/scheduler.hpp"

namespace skipdiff {

struct ControllerConfig {
    double delta = 0.01;            // relative skip threshold
    int c_max = 4;                  // max consecutive skips
    int warmup = 3;                 // always-evaluate prefix
    NormKind norm_kind = NormKind::L2;
    double sde_delta = 0.01;        // threshold for the injected-noise estimator

    void validate() const;
};

struct ControllerState {
    DiffWindow window;              // last four latents
    DiffWindow noise_window;        // scaled injected noises (SDE only)
    Vec cached_noise;
    int consecutive_skips = 0;
    bool stochastic = false;
    SkipPath decisions;
};

// True = evaluate the denoiser at the next step. Evaluation is forced when
// consecutive_skips has reached c_max; a stationary window (both norms under
// 1e-15) skips.
bool should_evaluate(const ControllerState& state, const ControllerConfig& cfg);

// SDE variant: skip only if the latent criterion says skip AND the injected
// noise stream is stable under its own third-order test. An identically zero
// stream defers to the latent criterion. Hard error on ODE plans.
bool sde_should_evaluate(const ControllerState& state, const ControllerConfig& cfg);

struct RunReport {
    uint64_t seed = 0;
    std::string sampler;
    double delta = 0.0;
    int c_max = 0;
    int eval_count = 0;
    SkipPath skip_path;
    double speedup = 1.0;
    double l1_err = 0.0;
    double rms_err = 0.0;
    double psnr_db = 0.0;
    Vec final_latent;
};

std::string report_to_json(const RunReport& report);

// Full-step reference run: the denoiser is evaluated at every step.
std::pair<Trajectory, RunReport> run_baseline(const SchedulerPlan& plan,
                                              DenoiserHandle& denoiser,
                                              const LatentState& x_T, uint64_t seed);

// Adaptive run: warmup steps evaluate unconditionally, later steps consult
// the criterion recorded after the previous update. The latent update itself
// is never skipped. Error metrics are against a paired baseline run with the
// same x_T and injected noise stream.
std::pair<Trajectory, RunReport> run_adaptive(const SchedulerPlan& plan,
                                              DenoiserHandle& denoiser,
                                              const LatentState& x_T,
                                              const ControllerConfig& cfg, uint64_t seed);

}  // namespace skipdiff
