#pragma once

#include <cstdint>
#include <string>

#include "skipdiff/controller.hpp"
#include "skipdiff/denoiser.hpp"
#include "skipdiff/scheduler.hpp"

namespace skipdiff {

struct SamplerSpec {
    std::string name = "euler-ve";  // ddim | euler-ve | sde-euler
    int T = 50;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    int train_steps = 1000;
    double sigma_max = 80.0;
    double sigma_min = 0.002;
    double churn = 1.0;  // sde-euler only
};

// Fully specifies a run; equal configs produce bit-equal outputs.
struct RunConfig {
    SamplerSpec sampler;
    GmmModel model = default_gmm_model();
    double delta = 0.01;
    int c_max = 4;
    int warmup = 3;
    NormKind norm_kind = NormKind::L2;
    double sde_delta = 0.01;
    uint64_t seed = 1;
    std::string out_dir = "out";
};

RunConfig config_from_json_text(const std::string& text);
RunConfig load_config(const std::string& file);
std::string config_to_json_text(const RunConfig& cfg);
void save_config(const RunConfig& cfg, const std::string& file);

// FNV-1a over the canonical serialized form; recorded in every emitted CSV.
uint64_t config_hash(const RunConfig& cfg);

SchedulerPlan plan_from(const SamplerSpec& spec);
ControllerConfig controller_from(const RunConfig& cfg);

// x_T drawn from the seed's init stream: sigma_max * z for VE, z for VP.
LatentState initial_latent(const SchedulerPlan& plan, std::size_t dim, uint64_t seed);

}  // namespace skipdiff
