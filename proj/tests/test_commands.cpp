#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "skipdiff/commands.hpp"

using namespace skipdiff;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("skipdiff_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& file) {
    std::ifstream in(file);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

RunConfig small_config() {
    RunConfig cfg;
    cfg.sampler.name = "ddim";
    cfg.sampler.T = 20;
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST_CASE("config json round trip and hashing") {
    RunConfig cfg = small_config();
    cfg.delta = 0.025;
    cfg.norm_kind = NormKind::L1;
    std::string text = config_to_json_text(cfg);
    RunConfig back = config_from_json_text(text);
    CHECK(back.sampler.name == cfg.sampler.name);
    CHECK(back.sampler.T == cfg.sampler.T);
    CHECK(back.delta == cfg.delta);
    CHECK(back.norm_kind == cfg.norm_kind);
    CHECK(back.model.weights == cfg.model.weights);
    CHECK(back.model.means == cfg.model.means);
    CHECK(config_hash(back) == config_hash(cfg));

    RunConfig other = cfg;
    other.delta = 0.5;
    CHECK(config_hash(other) != config_hash(cfg));

    // missing model block falls back to the default toy model
    RunConfig bare = config_from_json_text("{}");
    CHECK(bare.model.components() == 3);
    CHECK(bare.model.dim() == 16);
    CHECK_THROWS(config_from_json_text("{\"model\": {\"weights\": [2.0]}}"));
}

TEST_CASE("checked-in configs load and stay in sync with the builders") {
    std::string dir = std::string(SKIPDIFF_SOURCE_DIR) + "/configs/";
    RunConfig def = load_config(dir + "default.json");
    CHECK(def.model.weights == default_gmm_model().weights);
    CHECK(def.model.means == default_gmm_model().means);
    CHECK(def.model.scales == default_gmm_model().scales);
    CHECK(def.sampler.T == 50);
    CHECK(def.delta == 0.01);
    CHECK(def.c_max == 4);

    RunConfig alt = load_config(dir + "alt.json");
    CHECK(alt.model.means != def.model.means);
    CHECK(alt.seed != def.seed);
}

TEST_CASE("cmd_sample writes deterministic artifacts") {
    RunConfig cfg = small_config();
    fs::path out1 = temp_dir("sample1");
    fs::path out2 = temp_dir("sample2");
    CHECK(cmd_sample(cfg, out1.string()) == 0);
    CHECK(cmd_sample(cfg, out2.string()) == 0);
    for (const char* f : {"baseline.jsonl", "adaptive.jsonl", "report.json", "trace.csv"}) {
        CHECK(slurp(out1 / f) == slurp(out2 / f));
    }
    std::string trace = slurp(out1 / "trace.csv");
    CHECK(trace.rfind("# config_hash=", 0) == 0);
    CHECK(trace.find("step,dx_norm,d3x_norm,rel,decision") != std::string::npos);

    Trajectory base = read_trajectory_jsonl((out1 / "baseline.jsonl").string());
    Trajectory adapt = read_trajectory_jsonl((out1 / "adaptive.jsonl").string());
    CHECK(base.steps() == 20);
    CHECK(adapt.steps() == 20);
    CHECK(cache_invariant_holds(adapt));
    fs::remove_all(out1);
    fs::remove_all(out2);
}

TEST_CASE("cmd_sample at delta zero reports the degenerate run") {
    RunConfig cfg = small_config();
    cfg.delta = 0.0;
    fs::path out = temp_dir("sample_d0");
    CHECK(cmd_sample(cfg, out.string()) == 0);
    std::string report = slurp(out / "report.json");
    CHECK(report.find("\"speedup\": 1.0") != std::string::npos);
    CHECK(report.find("\"psnr\": 200.0") != std::string::npos);
    fs::remove_all(out);
}

TEST_CASE("oracle rows with brute-force cross-check") {
    RunConfig cfg = small_config();
    cfg.sampler.T = 12;
    std::vector<OracleRow> rows = oracle_rows(cfg, 0, 5, true);
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].path == SkipPath(12, true));
    CHECK(rows[0].distance == 0.0);
    for (const OracleRow& row : rows) {
        CHECK(eval_count(row.path) == 12 - row.n_skips);
        REQUIRE(row.has_optimal);
        CHECK(row.distance >= row.optimal_distance - 1e-15);
    }
    // single-step greedy is exhaustive
    CHECK(rows[1].path == rows[1].optimal_path);
    CHECK(rows[1].distance == doctest::Approx(rows[1].optimal_distance).epsilon(1e-12));

    // forced path at N = T-1
    std::vector<OracleRow> forced = oracle_rows(cfg, 11, 11, false);
    CHECK(path_to_string(forced[0].path) == "ESSSSSSSSSSS");
}

TEST_CASE("cmd_oracle writes the csv") {
    RunConfig cfg = small_config();
    cfg.sampler.T = 10;
    fs::path out = temp_dir("oracle");
    CHECK(cmd_oracle(cfg, 0, 3, false, out.string()) == 0);
    std::string csv = slurp(out / "oracle.csv");
    CHECK(csv.find("n,path,distance") != std::string::npos);
    CHECK(csv.find("0,EEEEEEEEEE,0") != std::string::npos);
    fs::remove_all(out);
}

TEST_CASE("sweep grid behavior") {
    RunConfig cfg = small_config();
    cfg.sampler.T = 30;
    std::vector<SweepCell> cells = sweep_runs(cfg, {0.0, 0.01, 0.1}, {2, 4, 6}, 4, 2);
    REQUIRE(cells.size() == 3 * 3 * 4);

    std::map<std::pair<double, int>, double> mean_evals;
    std::map<std::pair<double, int>, int> counts;
    for (const SweepCell& c : cells) {
        CHECK(static_cast<int>(c.report.skip_path.size()) == 30);
        CHECK(eval_count(c.report.skip_path) == c.report.eval_count);
        if (c.delta == 0.0) {
            CHECK(c.report.speedup == 1.0);
            CHECK(c.report.rms_err == 0.0);
        }
        mean_evals[{c.delta, c.c_max}] += c.report.eval_count;
        counts[{c.delta, c.c_max}] += 1;
    }
    for (auto& [key, total] : mean_evals) total /= counts[key];

    // mean eval count is non-increasing as c_max grows at fixed delta
    for (double delta : {0.01, 0.1}) {
        CHECK(mean_evals[{delta, 4}] <= mean_evals[{delta, 2}] + 1e-12);
        CHECK(mean_evals[{delta, 6}] <= mean_evals[{delta, 4}] + 1e-12);
    }
    // the cap binds once delta clears the criterion floor
    CHECK(mean_evals[{0.1, 6}] < mean_evals[{0.1, 2}]);

    // skip count non-decreasing in delta at fixed (c_max, seed)
    std::map<std::pair<int, uint64_t>, std::map<double, int>> by_run;
    for (const SweepCell& c : cells) {
        by_run[{c.c_max, c.seed}][c.delta] =
            static_cast<int>(c.report.skip_path.size()) - c.report.eval_count;
    }
    for (const auto& [key, row] : by_run) {
        int prev = -1;
        for (const auto& [delta, skips] : row) {
            CHECK(skips >= prev);
            prev = skips;
        }
    }

    CHECK_THROWS_AS(sweep_runs(cfg, {}, {2}, 1, 1), std::invalid_argument);
}

TEST_CASE("cmd_sweep emits per-run, aggregate, and histogram files") {
    RunConfig cfg = small_config();
    fs::path out = temp_dir("sweep");
    CHECK(cmd_sweep(cfg, {0.0, 0.01}, {4}, 3, 1, out.string()) == 0);
    std::string sweep = slurp(out / "sweep.csv");
    CHECK(sweep.find("delta,c_max,seed,eval_count,skip_count,speedup") != std::string::npos);
    std::string hist = slurp(out / "histogram.csv");
    CHECK(hist.find("eval_count,count") != std::string::npos);

    // parallel and serial execution agree row for row
    fs::path out_jobs = temp_dir("sweep_jobs");
    CHECK(cmd_sweep(cfg, {0.0, 0.01}, {4}, 3, 4, out_jobs.string()) == 0);
    CHECK(slurp(out / "sweep.csv") == slurp(out_jobs / "sweep.csv"));
    fs::remove_all(out);
    fs::remove_all(out_jobs);
}

TEST_CASE("paired path statistics") {
    // identical files: chi2 is maximal for the marginals (phi = 1, chi2 = N)
    std::vector<SkipPath> est = {path_from_string("EESSEESS"), path_from_string("ESESESEE")};
    std::vector<PathStats> stats = paired_path_stats(est, est);
    REQUIRE(stats.size() == 2);
    for (const PathStats& s : stats) {
        CHECK(s.chi2 == doctest::Approx(static_cast<double>(s.table.total())).epsilon(1e-12));
        CHECK(s.p < 0.011);
    }

    // unmatched skip counts are an error listing the offending rows
    std::vector<SkipPath> oracle = {path_from_string("EESSEESS")};
    CHECK_THROWS_WITH_AS(paired_path_stats(est, oracle),
                         doctest::Contains("skip_count=3"), std::invalid_argument);
}

TEST_CASE("random paired paths give valid p values") {
    std::vector<SkipPath> est, ora;
    uint64_t s = 12345;
    auto random_path = [&](int skips) {
        SkipPath p(40, true);
        int placed = 0;
        while (placed < skips) {
            s = s * 6364136223846793005ULL + 1442695040888963407ULL;
            int idx = 1 + static_cast<int>((s >> 33) % 39);
            if (p[idx]) {
                p[idx] = false;
                ++placed;
            }
        }
        return p;
    };
    for (int skips : {10, 15, 20}) {
        est.push_back(random_path(skips));
        ora.push_back(random_path(skips));
    }
    for (const PathStats& st : paired_path_stats(est, ora)) {
        CHECK(st.p >= 0.0);
        CHECK(st.p <= 1.0);
        CHECK(st.chi2 >= 0.0);
    }
}

TEST_CASE("cmd_stats pipeline over oracle output") {
    RunConfig cfg = small_config();
    cfg.sampler.T = 12;
    fs::path dir = temp_dir("stats");
    CHECK(cmd_oracle(cfg, 1, 4, false, (dir / "a").string()) == 0);
    CHECK(cmd_oracle(cfg, 1, 4, false, (dir / "b").string()) == 0);
    CHECK(cmd_stats((dir / "a" / "oracle.csv").string(), (dir / "b" / "oracle.csv").string(),
                    (dir / "out").string()) == 0);
    std::string csv = slurp(dir / "out" / "stats.csv");
    CHECK(csv.find("skip_count,chi2,p") != std::string::npos);
    std::string json = slurp(dir / "out" / "stats.json");
    CHECK(json.find("\"dof\": 1") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("strategy comparison") {
    RunConfig cfg = small_config();
    cfg.sampler.T = 30;
    std::vector<StrategyResult> results = compare_strategies(cfg);
    REQUIRE(results.size() == 4);
    CHECK(results[0].variant == "full");
    CHECK(results[0].l1_err == 0.0);
    CHECK(results[0].evals == 30);

    // b and d evaluate at the same steps
    CHECK(results[1].evals == results[3].evals);
    // keeping the latent update beats skipping it
    CHECK(results[1].rms_err <= results[3].rms_err);
    // half-step baseline evaluates T/2 times
    CHECK(results[2].evals == 15);
}

TEST_CASE("cmd_compare writes the table") {
    RunConfig cfg = small_config();
    fs::path out = temp_dir("compare");
    CHECK(cmd_compare(cfg, out.string()) == 0);
    std::string csv = slurp(out / "compare.csv");
    CHECK(csv.find("variant,evals,l1_err,rms_err,psnr") != std::string::npos);
    CHECK(csv.find("skip-noise-keep-update") != std::string::npos);
    CHECK(csv.find("skip-noise-and-update") != std::string::npos);
    fs::remove_all(out);
}
