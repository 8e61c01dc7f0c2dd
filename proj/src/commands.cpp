#include "skipdiff/commands.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "skipdiff/rng.hpp"

namespace skipdiff {

namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const fs::path& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write: " + file.string());
    return out;
}

void write_hash_line(std::ostream& out, const RunConfig& cfg) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "# config_hash=%016llx\n",
                  static_cast<unsigned long long>(config_hash(cfg)));
    out << buf;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

fs::path prepare_dir(const std::string& out_dir) {
    fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw std::runtime_error("cannot create output directory: " + out_dir);
    }
    return dir;
}

// variant d: where the path skips, neither the noise prediction nor the
// latent update runs
std::pair<Vec, int> run_skip_both(const SchedulerPlan& plan, const GmmModel& model,
                                  const LatentState& x_T, const SkipPath& path,
                                  uint64_t seed) {
    int T = plan.steps();
    DenoiserHandle handle = make_gmm_denoiser(model);
    LatentState cur{x_T.values, T};
    int evals = 0;
    for (int j = 0; j < T; ++j) {
        if (!path[j]) continue;
        int i = T - j;
        Vec noise = handle.predict(cur.values, level_at(plan, i), j);
        ++evals;
        Vec inj;
        if (plan.stochastic) {
            inj = injected_noise(plan, seed, j, cur.values.size());
            cur = apply_update(plan, i, cur, noise, &inj);
        } else {
            cur = apply_update(plan, i, cur, noise, nullptr);
        }
        cur.step_index = i - 1;
    }
    return {cur.values, evals};
}

}  // namespace

std::vector<SweepCell> sweep_runs(const RunConfig& cfg, const std::vector<double>& deltas,
                                  const std::vector<int>& c_maxes, int num_seeds, int jobs) {
    if (deltas.empty() || c_maxes.empty() || num_seeds < 1) {
        throw std::invalid_argument("sweep_runs: empty grid");
    }
    SchedulerPlan plan = plan_from(cfg.sampler);
    std::size_t dim = cfg.model.dim();

    struct Task {
        double delta;
        int c_max;
        uint64_t seed;
    };
    std::vector<Task> tasks;
    for (double d : deltas) {
        for (int c : c_maxes) {
            for (int s = 0; s < num_seeds; ++s) {
                tasks.push_back({d, c, rng::derive_seed(cfg.seed, static_cast<uint64_t>(s))});
            }
        }
    }

    std::vector<SweepCell> cells(tasks.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        try {
            while (true) {
                std::size_t idx = next.fetch_add(1);
                if (idx >= tasks.size()) break;
                const Task& t = tasks[idx];
                ControllerConfig ctrl = controller_from(cfg);
                ctrl.delta = t.delta;
                ctrl.c_max = t.c_max;
                DenoiserHandle handle = make_gmm_denoiser(cfg.model);
                LatentState x_T = initial_latent(plan, dim, t.seed);
                auto [traj, report] = run_adaptive(plan, handle, x_T, ctrl, t.seed);
                cells[idx] = {t.delta, t.c_max, t.seed, std::move(report)};
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    };

    int nthreads = std::max(1, jobs);
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    return cells;
}

std::vector<OracleRow> oracle_rows(const RunConfig& cfg, int n_min, int n_max,
                                   bool brute_force) {
    if (n_min < 0 || n_max < n_min) throw std::invalid_argument("oracle_rows: bad N range");
    SchedulerPlan plan = plan_from(cfg.sampler);
    if (n_max >= plan.steps()) throw std::invalid_argument("oracle_rows: N must be < T");

    SearchTask task;
    task.plan = &plan;
    task.model = &cfg.model;
    task.x_T = initial_latent(plan, cfg.model.dim(), cfg.seed);
    task.seed = cfg.seed;
    task.target_skips = n_max;

    std::vector<GreedyRound> rounds =
        n_max > 0 ? greedy_search_trace(task) : std::vector<GreedyRound>{};

    std::vector<OracleRow> rows;
    for (int n = n_min; n <= n_max; ++n) {
        OracleRow row;
        row.n_skips = n;
        if (n == 0) {
            row.path = SkipPath(plan.steps(), true);
            row.distance = 0.0;
        } else {
            row.path = rounds[n - 1].path;
            row.distance = rounds[n - 1].distance;
        }
        if (brute_force) {
            SearchTask bt = task;
            bt.target_skips = n;
            auto [best, dist] = brute_force_search(bt);
            row.has_optimal = true;
            row.optimal_path = std::move(best);
            row.optimal_distance = dist;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<StrategyResult> compare_strategies(const RunConfig& cfg) {
    SchedulerPlan plan = plan_from(cfg.sampler);
    int T = plan.steps();
    std::size_t dim = cfg.model.dim();
    LatentState x_T = initial_latent(plan, dim, cfg.seed);

    DenoiserHandle h_full = make_gmm_denoiser(cfg.model);
    SkipPath all_true(T, true);
    auto [full_traj, full_final] = run_with_path(plan, h_full, x_T, all_true, cfg.seed);

    auto result = [&](const std::string& name, const Vec& final_latent, int evals) {
        StrategyResult r;
        r.variant = name;
        r.evals = evals;
        Vec d = first_diff(final_latent, full_final);
        r.l1_err = latent_norm(d, NormKind::L1);
        r.rms_err = latent_norm(d, NormKind::L2);
        r.psnr_db = psnr(full_final, final_latent);
        return r;
    };

    std::vector<StrategyResult> out;
    out.push_back(result("full", full_final, T));

    DenoiserHandle h_adaptive = make_gmm_denoiser(cfg.model);
    auto [adaptive_traj, adaptive_report] =
        run_adaptive(plan, h_adaptive, x_T, controller_from(cfg), cfg.seed);
    out.push_back(result("skip-noise-keep-update", adaptive_traj.final_latent(),
                         adaptive_report.eval_count));

    if (T % 2 != 0) {
        std::fprintf(stderr, "compare: odd T=%d, half-step variant uses T=%d\n", T, T / 2);
    }
    SamplerSpec half_spec = cfg.sampler;
    half_spec.T = T / 2;
    SchedulerPlan half_plan = plan_from(half_spec);
    DenoiserHandle h_half = make_gmm_denoiser(cfg.model);
    LatentState x_T_half{x_T.values, half_plan.steps()};
    SkipPath half_true(half_plan.steps(), true);
    auto [half_traj, half_final] = run_with_path(half_plan, h_half, x_T_half, half_true, cfg.seed);
    out.push_back(result("half-steps", half_final, half_plan.steps()));

    auto [both_final, both_evals] =
        run_skip_both(plan, cfg.model, x_T, adaptive_report.skip_path, cfg.seed);
    out.push_back(result("skip-noise-and-update", both_final, both_evals));
    return out;
}

std::vector<PathStats> paired_path_stats(const std::vector<SkipPath>& estimated,
                                         const std::vector<SkipPath>& oracle) {
    std::map<int, std::vector<const SkipPath*>> est_by_count, ora_by_count;
    for (const auto& p : estimated) est_by_count[static_cast<int>(p.size()) - eval_count(p)].push_back(&p);
    for (const auto& p : oracle) ora_by_count[static_cast<int>(p.size()) - eval_count(p)].push_back(&p);

    std::ostringstream unmatched;
    for (const auto& [count, paths] : est_by_count) {
        if (!ora_by_count.count(count)) {
            unmatched << " estimated skip_count=" << count << " (" << paths.size() << " rows)";
        }
    }
    for (const auto& [count, paths] : ora_by_count) {
        if (!est_by_count.count(count)) {
            unmatched << " oracle skip_count=" << count << " (" << paths.size() << " rows)";
        }
    }
    if (!unmatched.str().empty()) {
        throw std::invalid_argument("paired_path_stats: unmatched rows:" + unmatched.str());
    }

    std::vector<PathStats> stats;
    for (const auto& [count, est_paths] : est_by_count) {
        const auto& ora_paths = ora_by_count[count];
        std::size_t pairs = std::min(est_paths.size(), ora_paths.size());
        PathStats ps;
        ps.skip_count = count;
        for (std::size_t q = 0; q < pairs; ++q) {
            ContingencyTable2x2 t = build_contingency(*est_paths[q], *ora_paths[q]);
            for (int r = 0; r < 2; ++r) {
                for (int c = 0; c < 2; ++c) ps.table.counts[r][c] += t.counts[r][c];
            }
        }
        auto [chi2, p] = chi2_2x2(ps.table);
        ps.chi2 = chi2;
        ps.p = p;
        stats.push_back(ps);
    }
    return stats;
}

int cmd_sample(const RunConfig& cfg, const std::string& out_dir) {
    fs::path dir = prepare_dir(out_dir);
    SchedulerPlan plan = plan_from(cfg.sampler);
    std::size_t dim = cfg.model.dim();
    LatentState x_T = initial_latent(plan, dim, cfg.seed);

    DenoiserHandle h_base = make_gmm_denoiser(cfg.model);
    auto [base_traj, base_report] = run_baseline(plan, h_base, x_T, cfg.seed);

    DenoiserHandle h_adapt = make_gmm_denoiser(cfg.model);
    auto [adapt_traj, adapt_report] =
        run_adaptive(plan, h_adapt, x_T, controller_from(cfg), cfg.seed);

    write_trajectory_jsonl(base_traj, (dir / "baseline.jsonl").string());
    write_trajectory_jsonl(adapt_traj, (dir / "adaptive.jsonl").string());
    {
        auto out = open_out(dir / "report.json");
        out << report_to_json(adapt_report) << "\n";
    }

    // per-step trace of the adaptive run for difference-vs-decision plots
    {
        auto out = open_out(dir / "trace.csv");
        write_hash_line(out, cfg);
        out << "step,dx_norm,d3x_norm,rel,decision\n";
        int T = adapt_traj.steps();
        for (int j = 0; j < T; ++j) {
            Vec dx = first_diff(adapt_traj.latents[j + 1], adapt_traj.latents[j]);
            double dxn = latent_norm(dx, cfg.norm_kind);
            double d3n = std::nan("");
            double rel = std::nan("");
            if (j >= 2) {
                DiffWindow w;
                for (int m = j - 2; m <= j + 1; ++m) w.push(adapt_traj.latents[m].values);
                d3n = latent_norm(third_diff(w), cfg.norm_kind);
                double mid = latent_norm(w.diff(1), cfg.norm_kind);
                rel = mid > 0.0 ? d3n / mid : std::nan("");
            }
            out << j << "," << fmt(dxn) << "," << fmt(d3n) << "," << fmt(rel) << ","
                << (adapt_traj.evaluated[j] ? "E" : "S") << "\n";
        }
    }
    return 0;
}

int cmd_oracle(const RunConfig& cfg, int n_min, int n_max, bool brute_force,
               const std::string& out_dir) {
    fs::path dir = prepare_dir(out_dir);
    std::vector<OracleRow> rows = oracle_rows(cfg, n_min, n_max, brute_force);
    auto out = open_out(dir / "oracle.csv");
    write_hash_line(out, cfg);
    out << (brute_force ? "n,path,distance,optimal_path,optimal_distance\n"
                        : "n,path,distance\n");
    for (const OracleRow& row : rows) {
        out << row.n_skips << "," << path_to_string(row.path) << "," << fmt(row.distance);
        if (brute_force) {
            out << "," << path_to_string(row.optimal_path) << ","
                << fmt(row.optimal_distance);
        }
        out << "\n";
    }
    return 0;
}

int cmd_sweep(const RunConfig& cfg, const std::vector<double>& deltas,
              const std::vector<int>& c_maxes, int num_seeds, int jobs,
              const std::string& out_dir) {
    fs::path dir = prepare_dir(out_dir);
    std::vector<SweepCell> cells = sweep_runs(cfg, deltas, c_maxes, num_seeds, jobs);

    // order-independent aggregation: sort by run key
    std::sort(cells.begin(), cells.end(), [](const SweepCell& a, const SweepCell& b) {
        if (a.delta != b.delta) return a.delta < b.delta;
        if (a.c_max != b.c_max) return a.c_max < b.c_max;
        return a.seed < b.seed;
    });

    {
        auto out = open_out(dir / "sweep.csv");
        write_hash_line(out, cfg);
        out << "delta,c_max,seed,eval_count,skip_count,speedup,l1_err,rms_err,psnr\n";
        for (const SweepCell& c : cells) {
            int T = static_cast<int>(c.report.skip_path.size());
            out << fmt(c.delta) << "," << c.c_max << "," << c.seed << ","
                << c.report.eval_count << "," << (T - c.report.eval_count) << ","
                << fmt(c.report.speedup) << "," << fmt(c.report.l1_err) << ","
                << fmt(c.report.rms_err) << "," << fmt(c.report.psnr_db) << "\n";
        }
    }
    {
        auto out = open_out(dir / "aggregate.csv");
        write_hash_line(out, cfg);
        out << "delta,c_max,runs,mean_eval_count,mean_speedup,mean_rms_err,mean_psnr\n";
        std::map<std::pair<double, int>, std::vector<const RunReport*>> groups;
        for (const SweepCell& c : cells) groups[{c.delta, c.c_max}].push_back(&c.report);
        for (const auto& [key, reports] : groups) {
            double n = static_cast<double>(reports.size());
            double evals = 0.0, speedup = 0.0, rms = 0.0, snr = 0.0;
            for (const RunReport* r : reports) {
                evals += r->eval_count;
                speedup += r->speedup;
                rms += r->rms_err;
                snr += r->psnr_db;
            }
            out << fmt(key.first) << "," << key.second << "," << reports.size() << ","
                << fmt(evals / n) << "," << fmt(speedup / n) << "," << fmt(rms / n) << ","
                << fmt(snr / n) << "\n";
        }
    }
    {
        auto out = open_out(dir / "histogram.csv");
        write_hash_line(out, cfg);
        out << "eval_count,count\n";
        std::vector<RunReport> reports;
        for (const SweepCell& c : cells) reports.push_back(c.report);
        for (const auto& [evals, count] : path_histogram(reports)) {
            out << evals << "," << count << "\n";
        }
    }
    return 0;
}

namespace {

std::vector<SkipPath> read_paths_csv(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open paths file: " + file);
    std::vector<SkipPath> paths;
    std::string line;
    int path_col = -1;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (path_col < 0) {  // header row
            for (std::size_t c = 0; c < fields.size(); ++c) {
                if (fields[c] == "path" || fields[c] == "skip_path") {
                    path_col = static_cast<int>(c);
                }
            }
            if (path_col < 0) throw std::runtime_error("no path column in: " + file);
            continue;
        }
        if (static_cast<int>(fields.size()) <= path_col) continue;
        paths.push_back(path_from_string(fields[path_col]));
    }
    if (paths.empty()) throw std::runtime_error("no path rows in: " + file);
    return paths;
}

}  // namespace

namespace {

uint64_t hash_file_bytes(const std::string& file, uint64_t h) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + file);
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

int cmd_stats(const std::string& estimated_file, const std::string& oracle_file,
              const std::string& out_dir) {
    fs::path dir = prepare_dir(out_dir);
    std::vector<SkipPath> estimated = read_paths_csv(estimated_file);
    std::vector<SkipPath> oracle = read_paths_csv(oracle_file);
    std::vector<PathStats> stats = paired_path_stats(estimated, oracle);
    uint64_t inputs_hash =
        hash_file_bytes(oracle_file, hash_file_bytes(estimated_file, 0xcbf29ce484222325ULL));

    nlohmann::json j = nlohmann::json::array();
    for (const PathStats& s : stats) {
        j.push_back({{"skip_count", s.skip_count},
                     {"chi2", s.chi2},
                     {"p", s.p},
                     {"dof", 1},
                     {"table",
                      {{s.table.counts[0][0], s.table.counts[0][1]},
                       {s.table.counts[1][0], s.table.counts[1][1]}}}});
    }
    {
        auto out = open_out(dir / "stats.json");
        out << j.dump(2) << "\n";
    }
    {
        auto out = open_out(dir / "stats.csv");
        char buf[64];
        std::snprintf(buf, sizeof(buf), "# inputs_hash=%016llx\n",
                      static_cast<unsigned long long>(inputs_hash));
        out << buf;
        out << "skip_count,chi2,p\n";
        for (const PathStats& s : stats) {
            out << s.skip_count << "," << fmt(s.chi2) << "," << fmt(s.p) << "\n";
        }
    }
    return 0;
}

int cmd_compare(const RunConfig& cfg, const std::string& out_dir) {
    fs::path dir = prepare_dir(out_dir);
    std::vector<StrategyResult> results = compare_strategies(cfg);
    auto out = open_out(dir / "compare.csv");
    write_hash_line(out, cfg);
    out << "variant,evals,l1_err,rms_err,psnr\n";
    for (const StrategyResult& r : results) {
        out << r.variant << "," << r.evals << "," << fmt(r.l1_err) << "," << fmt(r.rms_err)
            << "," << fmt(r.psnr_db) << "\n";
    }
    return 0;
}

}  // namespace skipdiff
