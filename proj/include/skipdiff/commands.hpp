#pragma once

#include <string>
#include <vector>

#include "skipdiff/analysis.hpp"
#include "skipdiff/config.hpp"
#include "skipdiff/path_search.hpp"

namespace skipdiff {

struct SweepCell {
    double delta = 0.0;
    int c_max = 0;
    uint64_t seed = 0;
    RunReport report;
};

// One adaptive run per (delta, c_max, seed) tuple, each against its paired
// baseline; tuples may execute on up to `jobs` worker threads.
std::vector<SweepCell> sweep_runs(const RunConfig& cfg, const std::vector<double>& deltas,
                                  const std::vector<int>& c_maxes, int num_seeds, int jobs);

struct OracleRow {
    int n_skips = 0;
    SkipPath path;
    double distance = 0.0;
    bool has_optimal = false;
    SkipPath optimal_path;
    double optimal_distance = 0.0;
};

std::vector<OracleRow> oracle_rows(const RunConfig& cfg, int n_min, int n_max, bool brute_force);

// Update-strategy comparison:
//   a) full baseline   b) adaptive (skip noise, keep update)
//   c) half-step baseline   d) skip noise and update at b's steps
struct StrategyResult {
    std::string variant;
    int evals = 0;
    double l1_err = 0.0;
    double rms_err = 0.0;
    double psnr_db = 0.0;
};
std::vector<StrategyResult> compare_strategies(const RunConfig& cfg);

struct PathStats {
    int skip_count = 0;
    ContingencyTable2x2 table;
    double chi2 = 0.0;
    double p = 0.0;
};
std::vector<PathStats> paired_path_stats(const std::vector<SkipPath>& estimated,
                                         const std::vector<SkipPath>& oracle);

// CLI entry points; each writes its artifacts under out_dir and returns 0,
// throwing on invalid input or unwritable output.
int cmd_sample(const RunConfig& cfg, const std::string& out_dir);
int cmd_oracle(const RunConfig& cfg, int n_min, int n_max, bool brute_force,
               const std::string& out_dir);
int cmd_sweep(const RunConfig& cfg, const std::vector<double>& deltas,
              const std::vector<int>& c_maxes, int num_seeds, int jobs,
              const std::string& out_dir);
int cmd_stats(const std::string& estimated_file, const std::string& oracle_file,
              const std::string& out_dir);
int cmd_compare(const RunConfig& cfg, const std::string& out_dir);

}  // namespace skipdiff
