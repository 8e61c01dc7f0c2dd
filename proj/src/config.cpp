#include "skipdiff/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "skipdiff/rng.hpp"

namespace skipdiff {

RunConfig config_from_json_text(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    RunConfig cfg;
    if (j.contains("sampler")) {
        const auto& s = j["sampler"];
        cfg.sampler.name = s.value("name", cfg.sampler.name);
        cfg.sampler.T = s.value("T", cfg.sampler.T);
        cfg.sampler.beta_start = s.value("beta_start", cfg.sampler.beta_start);
        cfg.sampler.beta_end = s.value("beta_end", cfg.sampler.beta_end);
        cfg.sampler.train_steps = s.value("train_steps", cfg.sampler.train_steps);
        cfg.sampler.sigma_max = s.value("sigma_max", cfg.sampler.sigma_max);
        cfg.sampler.sigma_min = s.value("sigma_min", cfg.sampler.sigma_min);
        cfg.sampler.churn = s.value("churn", cfg.sampler.churn);
    }
    if (j.contains("model")) {
        const auto& m = j["model"];
        cfg.model.weights = m.at("weights").get<std::vector<double>>();
        cfg.model.means = m.at("means").get<std::vector<Vec>>();
        cfg.model.scales = m.at("scales").get<std::vector<double>>();
    } else {
        cfg.model = default_gmm_model();
    }
    cfg.model.validate();
    cfg.delta = j.value("delta", cfg.delta);
    cfg.c_max = j.value("c_max", cfg.c_max);
    cfg.warmup = j.value("warmup", cfg.warmup);
    cfg.norm_kind = norm_kind_from_string(j.value("norm", std::string("l2")));
    cfg.sde_delta = j.value("sde_delta", cfg.sde_delta);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    return cfg;
}

RunConfig load_config(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open config: " + file);
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_from_json_text(buf.str());
}

std::string config_to_json_text(const RunConfig& cfg) {
    nlohmann::json j;
    j["sampler"] = {{"name", cfg.sampler.name},
                    {"T", cfg.sampler.T},
                    {"beta_start", cfg.sampler.beta_start},
                    {"beta_end", cfg.sampler.beta_end},
                    {"train_steps", cfg.sampler.train_steps},
                    {"sigma_max", cfg.sampler.sigma_max},
                    {"sigma_min", cfg.sampler.sigma_min},
                    {"churn", cfg.sampler.churn}};
    j["model"] = {{"weights", cfg.model.weights},
                  {"means", cfg.model.means},
                  {"scales", cfg.model.scales}};
    j["delta"] = cfg.delta;
    j["c_max"] = cfg.c_max;
    j["warmup"] = cfg.warmup;
    j["norm"] = to_string(cfg.norm_kind);
    j["sde_delta"] = cfg.sde_delta;
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    return j.dump(2) + "\n";
}

void save_config(const RunConfig& cfg, const std::string& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot open for write: " + file);
    out << config_to_json_text(cfg);
}

uint64_t config_hash(const RunConfig& cfg) {
    std::string text = config_to_json_text(cfg);
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

SchedulerPlan plan_from(const SamplerSpec& spec) {
    if (spec.name == "ddim") {
        return build_ddim_plan(spec.T, spec.beta_start, spec.beta_end, spec.train_steps);
    }
    if (spec.name == "euler-ve") {
        return build_euler_ve_plan(spec.T, spec.sigma_max, spec.sigma_min);
    }
    if (spec.name == "sde-euler") {
        return build_sde_euler_plan(spec.T, spec.sigma_max, spec.sigma_min, spec.churn);
    }
    throw std::invalid_argument("unknown sampler: " + spec.name);
}

ControllerConfig controller_from(const RunConfig& cfg) {
    ControllerConfig c;
    c.delta = cfg.delta;
    c.c_max = cfg.c_max;
    c.warmup = cfg.warmup;
    c.norm_kind = cfg.norm_kind;
    c.sde_delta = cfg.sde_delta;
    return c;
}

LatentState initial_latent(const SchedulerPlan& plan, std::size_t dim, uint64_t seed) {
    LatentState x;
    x.step_index = plan.steps();
    x.values.resize(dim);
    rng::Stream stream = rng::init_stream(seed);
    stream.fill_gaussian(x.values);
    if (plan.schedule.kind == ScheduleKind::VeSigma) {
        double s = plan.schedule.values.back();
        for (double& v : x.values) v *= s;
    }
    return x;
}

}  // namespace skipdiff
