#pragma once

#include <cstdint>
#include <vector>

#include "skipdiff/latent.hpp"
#include "skipdiff/scheduler.hpp"

namespace skipdiff {

// Isotropic Gaussian mixture standing in for the noise prediction model:
// exact, Lipschitz, training-free.
struct GmmModel {
    std::vector<double> weights;  // K positive reals summing to 1
    std::vector<Vec> means;       // K vectors of dimension D
    std::vector<double> scales;   // K per-component stds

    int components() const { return static_cast<int>(weights.size()); }
    int dim() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }
    void validate() const;
};

struct NoiseLevel {
    ScheduleKind kind = ScheduleKind::VeSigma;
    double value = 0.0;  // sigma for VE, alpha_bar for VP
};

inline NoiseLevel level_at(const SchedulerPlan& plan, int latent_index) {
    return {plan.schedule.kind, plan.level(latent_index)};
}

// Optimal noise prediction under the mixture:
//   VE: eps = -sigma * grad log p_sigma(x),  p_sigma = sum_k w_k N(mu_k, (s_k^2+sigma^2) I)
//   VP: same with means scaled by sqrt(alpha_bar) and variances
//       alpha_bar*s_k^2 + (1-alpha_bar), prefactor sqrt(1-alpha_bar).
// Responsibilities are computed in log space with max subtraction.
Vec gmm_epsilon(const GmmModel& model, const Vec& x, const NoiseLevel& level);

// Upper bound on the spatial Lipschitz constant of gmm_epsilon at this
// noise level. Exact for a single component; conservative for mixtures
// (per-component constant plus a responsibility-variation term).
double gmm_lipschitz_bound(const GmmModel& model, const NoiseLevel& level);

// Recorded noise for update ordinal j, regardless of the queried latent.
Vec replay_epsilon(const Trajectory& recorded, int ordinal);

// One handle per trajectory; eval_count increases by exactly one per
// prediction call and never on cache reuse.
struct DenoiserHandle {
    enum class Kind { AnalyticGmm, Replay };

    Kind kind = Kind::AnalyticGmm;
    const GmmModel* model = nullptr;
    const Trajectory* recorded = nullptr;
    long eval_count = 0;

    Vec predict(const Vec& x, const NoiseLevel& level, int ordinal);
};

DenoiserHandle make_gmm_denoiser(const GmmModel& model);
DenoiserHandle make_replay_denoiser(const Trajectory& recorded);

// Checked-in toy model: K=3, D=16, means and scales drawn once from a
// seeded stream.
GmmModel seeded_gmm_model(uint64_t seed, int components, int dim);
GmmModel default_gmm_model();

}  // namespace skipdiff
