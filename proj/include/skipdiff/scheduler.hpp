#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "skipdiff/latent.hpp"

namespace skipdiff {

enum class ScheduleKind { VpAlphaBar, VeSigma };

// Per-step noise schedule, indexed by latent index 0..T.
// VP: values are alpha_bar, increasing from the x_T side toward x_0.
// VE: values are sigma, decreasing from sigma_max at T to sigma_min at 0.
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::VeSigma;
    std::vector<double> values;  // size T+1
    std::vector<double> t_grid;  // size T+1, continuous timesteps
};

// Immutable plan of update coefficients: x_{i-1} = f(i-1)*x_i - g(i-1)*eps.
// Arrays are indexed by the target latent index i-1 (0..T-1).
struct SchedulerPlan {
    std::string name;
    bool stochastic = false;
    std::vector<double> f;                // size T
    std::vector<double> g;                // size T
    std::vector<double> sde_noise_scale;  // size T, identically zero for ODE
    NoiseSchedule schedule;

    int steps() const { return static_cast<int>(f.size()); }
    double level(int latent_index) const { return schedule.values.at(latent_index); }
    double t_at(int latent_index) const { return schedule.t_grid.at(latent_index); }
};

// DDIM coefficients for one step between alpha_bar values.
std::pair<double, double> ddim_coeffs(double alphabar_prev, double alphabar_cur);

// Linear beta schedule over train_steps, uniform-stride subsampled to T.
SchedulerPlan build_ddim_plan(int T, double beta_start, double beta_end, int train_steps);

// Log-linear sigma grid; f = 1, g(i-1) = sigma_i - sigma_{i-1}.
SchedulerPlan build_euler_ve_plan(int T, double sigma_max, double sigma_min);

// Euler coefficients plus per-step injected-noise scales churn*sqrt|dsigma|.
SchedulerPlan build_sde_euler_plan(int T, double sigma_max, double sigma_min, double churn);

// One reverse update. `noise` may be a fresh prediction or a cached one;
// this function is oblivious. `injected` defaults to the zero vector.
LatentState apply_update(const SchedulerPlan& plan, int i, const LatentState& x_i,
                         const Vec& noise, const Vec* injected = nullptr);

// Injected SDE noise for update ordinal j (0-based from x_T), keyed by
// (seed, ordinal). Zero vector for ODE plans.
Vec injected_noise(const SchedulerPlan& plan, uint64_t seed, int ordinal, std::size_t dim);

// Columns: i, f, g, t, sigma_or_alphabar, sde_noise_scale.
void write_plan_csv(const SchedulerPlan& plan, std::ostream& out);

}  // namespace skipdiff
