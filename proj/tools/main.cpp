#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "skipdiff/commands.hpp"

namespace {

struct CommonOpts {
    std::string config_file;
    std::string out_dir;
    uint64_t seed = 0;
    bool seed_set = false;
    double delta = 0.0;
    bool delta_set = false;
    int c_max = 0;
    bool c_max_set = false;
    int warmup = 0;
    bool warmup_set = false;
    std::string sampler;
    int T = 0;
    bool T_set = false;
    double churn = 0.0;
    bool churn_set = false;
    double sde_delta = 0.0;
    bool sde_delta_set = false;
    std::string norm;
    int jobs = 1;
};

void add_common(CLI::App* app, CommonOpts& opts) {
    app->add_option("--config", opts.config_file, "config file (JSON)");
    app->add_option("--out", opts.out_dir, "output directory");
    app->add_option("--seed", opts.seed, "master seed")->each([&](const std::string&) {
        opts.seed_set = true;
    });
    app->add_option("--delta", opts.delta, "skip threshold")->each([&](const std::string&) {
        opts.delta_set = true;
    });
    app->add_option("--c-max", opts.c_max, "max consecutive skips")
        ->each([&](const std::string&) { opts.c_max_set = true; });
    app->add_option("--warmup", opts.warmup, "always-evaluate prefix")
        ->each([&](const std::string&) { opts.warmup_set = true; });
    app->add_option("--sampler", opts.sampler, "ddim | euler-ve | sde-euler");
    app->add_option("--T", opts.T, "number of steps")->each([&](const std::string&) {
        opts.T_set = true;
    });
    app->add_option("--churn", opts.churn, "sde noise scale factor")
        ->each([&](const std::string&) { opts.churn_set = true; });
    app->add_option("--sde-delta", opts.sde_delta, "injected-noise threshold")
        ->each([&](const std::string&) { opts.sde_delta_set = true; });
    app->add_option("--norm", opts.norm, "l1 | l2");
    app->add_option("--jobs", opts.jobs, "worker threads");
}

// precedence: flags > SKIPDIFF_OUT > config file > defaults
skipdiff::RunConfig resolve(const CommonOpts& opts, std::string& out_dir) {
    skipdiff::RunConfig cfg;
    if (!opts.config_file.empty()) cfg = skipdiff::load_config(opts.config_file);
    if (opts.seed_set) cfg.seed = opts.seed;
    if (opts.delta_set) cfg.delta = opts.delta;
    if (opts.c_max_set) cfg.c_max = opts.c_max;
    if (opts.warmup_set) cfg.warmup = opts.warmup;
    if (!opts.sampler.empty()) cfg.sampler.name = opts.sampler;
    if (opts.T_set) cfg.sampler.T = opts.T;
    if (opts.churn_set) cfg.sampler.churn = opts.churn;
    if (opts.sde_delta_set) cfg.sde_delta = opts.sde_delta;
    if (!opts.norm.empty()) cfg.norm_kind = skipdiff::norm_kind_from_string(opts.norm);

    out_dir = cfg.out_dir;
    if (const char* env = std::getenv("SKIPDIFF_OUT")) {
        if (env[0] != '\0') out_dir = env;
    }
    if (!opts.out_dir.empty()) out_dir = opts.out_dir;
    return cfg;
}

std::vector<double> parse_doubles(const std::string& csv) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        std::size_t end = csv.find(',', start);
        if (end == std::string::npos) end = csv.size();
        out.push_back(std::stod(csv.substr(start, end - start)));
        start = end + 1;
    }
    return out;
}

std::vector<int> parse_ints(const std::string& csv) {
    std::vector<int> out;
    for (double v : parse_doubles(csv)) out.push_back(static_cast<int>(v));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"skipdiff: diffusion sampling with third-order skip scheduling"};
    app.require_subcommand(1);

    CommonOpts opts;

    CLI::App* sample = app.add_subcommand("sample", "paired baseline + adaptive run");
    add_common(sample, opts);

    CLI::App* oracle = app.add_subcommand("oracle", "greedy skip-path search");
    add_common(oracle, opts);
    int n_min = 0, n_max = -1, n_single = -1;
    bool brute = false;
    oracle->add_option("--n", n_single, "single skip target");
    oracle->add_option("--n-min", n_min, "skip target range start");
    oracle->add_option("--n-max", n_max, "skip target range end");
    oracle->add_flag("--brute-force", brute, "cross-check against exhaustive search");

    CLI::App* sweep = app.add_subcommand("sweep", "grid over delta, c_max, seeds");
    add_common(sweep, opts);
    std::string deltas_csv = "0.001,0.005,0.01,0.05,0.1";
    std::string cmaxes_csv = "2,4,6";
    int num_seeds = 10;
    sweep->add_option("--deltas", deltas_csv, "comma-separated delta grid");
    sweep->add_option("--c-maxes", cmaxes_csv, "comma-separated c_max grid");
    sweep->add_option("--num-seeds", num_seeds, "seeds per cell");

    CLI::App* stats = app.add_subcommand("stats", "chi-squared path statistics");
    add_common(stats, opts);
    std::string estimated_file, oracle_file;
    stats->add_option("--estimated", estimated_file, "CSV with estimated paths")->required();
    stats->add_option("--oracle", oracle_file, "CSV with oracle paths")->required();

    CLI::App* compare = app.add_subcommand("compare", "update-strategy comparison");
    add_common(compare, opts);

    CLI11_PARSE(app, argc, argv);

    try {
        std::string out_dir;
        if (sample->parsed()) {
            skipdiff::RunConfig cfg = resolve(opts, out_dir);
            return skipdiff::cmd_sample(cfg, out_dir);
        }
        if (oracle->parsed()) {
            skipdiff::RunConfig cfg = resolve(opts, out_dir);
            if (n_single >= 0) n_min = n_max = n_single;
            if (n_max < 0) throw std::invalid_argument("oracle: give --n or --n-min/--n-max");
            return skipdiff::cmd_oracle(cfg, n_min, n_max, brute, out_dir);
        }
        if (sweep->parsed()) {
            skipdiff::RunConfig cfg = resolve(opts, out_dir);
            return skipdiff::cmd_sweep(cfg, parse_doubles(deltas_csv), parse_ints(cmaxes_csv),
                                       num_seeds, opts.jobs, out_dir);
        }
        if (stats->parsed()) {
            skipdiff::RunConfig cfg = resolve(opts, out_dir);
            (void)cfg;
            return skipdiff::cmd_stats(estimated_file, oracle_file, out_dir);
        }
        if (compare->parsed()) {
            skipdiff::RunConfig cfg = resolve(opts, out_dir);
            return skipdiff::cmd_compare(cfg, out_dir);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
