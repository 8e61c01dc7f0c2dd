#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace skipdiff {

using Vec = std::vector<double>;

// Denoiser-evaluated flag per update step: true = fresh prediction,
// false = cached noise reused.
using SkipPath = std::vector<bool>;

enum class NormKind { L1, L2 };

NormKind norm_kind_from_string(const std::string& s);
std::string to_string(NormKind kind);

// One latent x_i of the reverse process, step_index counts down T -> 0.
struct LatentState {
    Vec values;
    int step_index = 0;
};

// a.values - b.values, elementwise. Dimension mismatch is a hard error.
Vec first_diff(const LatentState& a, const LatentState& b);
Vec first_diff(const Vec& a, const Vec& b);

// Dimension-normalized norms: L1 = mean absolute value, L2 = root mean
// square, so thresholds compare across latent sizes.
double latent_norm(const Vec& v, NormKind kind);

// Sliding window of the last four latents (x_{i+2}, x_{i+1}, x_i, x_{i-1}),
// the minimum history for one third-order difference.
class DiffWindow {
public:
    void push(const Vec& x);
    void clear();
    bool full() const { return count_ >= 4; }
    std::size_t size() const { return count_ < 4 ? count_ : 4; }

    // k = 0 newest latent (x_{i-1}), k = 3 oldest (x_{i+2}).
    const Vec& latent(int k) const;

    // k = 0 newest difference (dx_{i-1} = x_{i-1} - x_i), k = 2 oldest.
    Vec diff(int k) const;

private:
    std::array<Vec, 4> ring_;
    std::size_t count_ = 0;
};

// dx_{i-1} - 2*dx_i + dx_{i+1}. Underfilled window is a hard error.
Vec third_diff(const DiffWindow& w);

// Recorded reverse trajectory: latents x_T..x_0 plus per-update noises and
// evaluated flags.
struct Trajectory {
    std::vector<LatentState> latents;  // size T+1, latents[m] = x_{T-m}
    std::vector<Vec> noises;           // size T, noises[j] used by update j
    SkipPath evaluated;                // size T

    int steps() const { return static_cast<int>(noises.size()); }
    const Vec& final_latent() const { return latents.back().values; }
};

// Replays the evaluated flags: every skipped step must carry, bit for bit,
// the most recent evaluated noise.
bool cache_invariant_holds(const Trajectory& t);

std::string path_to_string(const SkipPath& path);   // "EESS..."
SkipPath path_from_string(const std::string& s);
int eval_count(const SkipPath& path);

void write_trajectory_jsonl(const Trajectory& t, const std::string& file);
Trajectory read_trajectory_jsonl(const std::string& file);

}  // namespace skipdiff
