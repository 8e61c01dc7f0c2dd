#include "skipdiff/scheduler.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "skipdiff/rng.hpp"

namespace skipdiff {

std::pair<double, double> ddim_coeffs(double alphabar_prev, double alphabar_cur) {
    double f = std::sqrt(alphabar_prev / alphabar_cur);
    double g = std::sqrt(alphabar_prev * (1.0 - alphabar_cur) / alphabar_cur) -
               std::sqrt(1.0 - alphabar_prev);
    return {f, g};
}

SchedulerPlan build_ddim_plan(int T, double beta_start, double beta_end, int train_steps) {
    if (T <= 0) throw std::invalid_argument("build_ddim_plan: T must be positive");
    if (T > train_steps) throw std::invalid_argument("build_ddim_plan: T > train_steps");
    if (!(0.0 < beta_start && beta_start < beta_end && beta_end < 1.0)) {
        throw std::invalid_argument("build_ddim_plan: need 0 < beta_start < beta_end < 1");
    }

    std::vector<double> alphabar_train(train_steps);
    double prod = 1.0;
    for (int k = 0; k < train_steps; ++k) {
        double beta = beta_start + (beta_end - beta_start) *
                                       static_cast<double>(k) /
                                       static_cast<double>(train_steps - 1);
        prod *= 1.0 - beta;
        alphabar_train[k] = prod;
    }

    SchedulerPlan plan;
    plan.name = "ddim";
    plan.schedule.kind = ScheduleKind::VpAlphaBar;
    plan.schedule.values.resize(T + 1);
    plan.schedule.t_grid.resize(T + 1);
    plan.schedule.values[0] = 1.0;  // clean-data endpoint
    plan.schedule.t_grid[0] = 0.0;
    for (int i = 1; i <= T; ++i) {
        int k = static_cast<int>((static_cast<long>(i) * train_steps) / T) - 1;
        plan.schedule.values[i] = alphabar_train[k];
        plan.schedule.t_grid[i] = static_cast<double>(k + 1);
    }

    plan.f.resize(T);
    plan.g.resize(T);
    plan.sde_noise_scale.assign(T, 0.0);
    for (int i = 1; i <= T; ++i) {
        auto [f, g] = ddim_coeffs(plan.schedule.values[i - 1], plan.schedule.values[i]);
        plan.f[i - 1] = f;
        plan.g[i - 1] = g;
    }
    return plan;
}

static NoiseSchedule log_linear_sigma_grid(int T, double sigma_max, double sigma_min) {
    if (!(sigma_max > sigma_min && sigma_min > 0.0)) {
        throw std::invalid_argument("sigma grid: need sigma_max > sigma_min > 0");
    }
    NoiseSchedule sched;
    sched.kind = ScheduleKind::VeSigma;
    sched.values.resize(T + 1);
    sched.t_grid.resize(T + 1);
    double lo = std::log(sigma_min);
    double hi = std::log(sigma_max);
    for (int i = 0; i <= T; ++i) {
        double s = std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(T));
        sched.values[i] = s;
        sched.t_grid[i] = s;  // VE time is the noise level itself
    }
    for (int i = 0; i < T; ++i) {
        if (!(sched.values[i + 1] > sched.values[i])) {
            throw std::invalid_argument("sigma grid: not strictly monotone");
        }
    }
    return sched;
}

SchedulerPlan build_euler_ve_plan(int T, double sigma_max, double sigma_min) {
    if (T <= 0) throw std::invalid_argument("build_euler_ve_plan: T must be positive");
    SchedulerPlan plan;
    plan.name = "euler-ve";
    plan.schedule = log_linear_sigma_grid(T, sigma_max, sigma_min);
    plan.f.assign(T, 1.0);
    plan.g.resize(T);
    plan.sde_noise_scale.assign(T, 0.0);
    for (int i = 1; i <= T; ++i) {
        plan.g[i - 1] = plan.schedule.values[i] - plan.schedule.values[i - 1];
    }
    return plan;
}

SchedulerPlan build_sde_euler_plan(int T, double sigma_max, double sigma_min, double churn) {
    if (churn < 0.0) throw std::invalid_argument("build_sde_euler_plan: churn must be >= 0");
    SchedulerPlan plan = build_euler_ve_plan(T, sigma_max, sigma_min);
    plan.name = "sde-euler";
    plan.stochastic = true;
    for (int i = 1; i <= T; ++i) {
        double ds = plan.schedule.values[i] - plan.schedule.values[i - 1];
        plan.sde_noise_scale[i - 1] = churn * std::sqrt(std::fabs(ds));
    }
    return plan;
}

LatentState apply_update(const SchedulerPlan& plan, int i, const LatentState& x_i,
                         const Vec& noise, const Vec* injected) {
    if (i < 1 || i > plan.steps()) {
        throw std::out_of_range("apply_update: step index out of range");
    }
    if (noise.size() != x_i.values.size()) {
        throw std::invalid_argument("apply_update: noise dimension mismatch");
    }
    if (injected != nullptr && injected->size() != x_i.values.size()) {
        throw std::invalid_argument("apply_update: injected dimension mismatch");
    }
    double f = plan.f[i - 1];
    double g = plan.g[i - 1];
    LatentState out;
    out.step_index = i - 1;
    out.values.resize(x_i.values.size());
    for (std::size_t d = 0; d < out.values.size(); ++d) {
        double v = f * x_i.values[d] - g * noise[d];
        if (injected != nullptr) v += (*injected)[d];
        out.values[d] = v;
    }
    return out;
}

Vec injected_noise(const SchedulerPlan& plan, uint64_t seed, int ordinal, std::size_t dim) {
    Vec z(dim, 0.0);
    int target = plan.steps() - 1 - ordinal;
    double scale = plan.sde_noise_scale.at(target);
    if (scale == 0.0) return z;
    rng::Stream stream = rng::step_stream(seed, static_cast<uint64_t>(ordinal));
    stream.fill_gaussian(z);
    for (double& x : z) x *= scale;
    return z;
}

void write_plan_csv(const SchedulerPlan& plan, std::ostream& out) {
    out << "i,f,g,t,sigma_or_alphabar,sde_noise_scale\n";
    char buf[160];
    for (int i = 0; i < plan.steps(); ++i) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", i,
                      plan.f[i], plan.g[i], plan.schedule.t_grid[i],
                      plan.schedule.values[i], plan.sde_noise_scale[i]);
        out << buf;
    }
}

}  // namespace skipdiff
