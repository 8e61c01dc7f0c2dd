#include "skipdiff/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "skipdiff/rng.hpp"

namespace skipdiff {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Mixture parameters after folding in the noise level.
struct LeveledGmm {
    double coef = 0.0;            // sigma (VE) or sqrt(1-alpha_bar) (VP)
    std::vector<Vec> means;       // scaled means
    std::vector<double> vars;     // per-component total variances
    const std::vector<double>* weights = nullptr;
};

LeveledGmm fold_level(const GmmModel& model, const NoiseLevel& level) {
    model.validate();
    LeveledGmm lg;
    lg.weights = &model.weights;
    int K = model.components();
    lg.means.resize(K);
    lg.vars.resize(K);
    if (level.kind == ScheduleKind::VeSigma) {
        if (level.value < 0.0) throw std::invalid_argument("gmm: sigma must be >= 0");
        double s2 = level.value * level.value;
        lg.coef = level.value;
        for (int k = 0; k < K; ++k) {
            lg.means[k] = model.means[k];
            lg.vars[k] = model.scales[k] * model.scales[k] + s2;
        }
    } else {
        double ab = level.value;
        if (!(ab > 0.0 && ab <= 1.0)) {
            throw std::invalid_argument("gmm: alpha_bar must be in (0, 1]");
        }
        double root = std::sqrt(ab);
        lg.coef = std::sqrt(1.0 - ab);
        for (int k = 0; k < K; ++k) {
            lg.means[k].resize(model.means[k].size());
            for (std::size_t d = 0; d < model.means[k].size(); ++d) {
                lg.means[k][d] = root * model.means[k][d];
            }
            lg.vars[k] = ab * model.scales[k] * model.scales[k] + (1.0 - ab);
        }
    }
    return lg;
}

}  // namespace

void GmmModel::validate() const {
    if (weights.empty() || means.size() != weights.size() || scales.size() != weights.size()) {
        throw std::invalid_argument("GmmModel: inconsistent component counts");
    }
    double sum = 0.0;
    for (double w : weights) {
        if (!(w > 0.0)) throw std::invalid_argument("GmmModel: weights must be positive");
        sum += w;
    }
    if (std::fabs(sum - 1.0) > 1e-12) {
        throw std::invalid_argument("GmmModel: weights must sum to 1");
    }
    std::size_t d = means[0].size();
    for (const Vec& m : means) {
        if (m.size() != d || d == 0) throw std::invalid_argument("GmmModel: bad mean dimension");
    }
    for (double s : scales) {
        if (!(s > 0.0)) throw std::invalid_argument("GmmModel: scales must be positive");
    }
}

Vec gmm_epsilon(const GmmModel& model, const Vec& x, const NoiseLevel& level) {
    LeveledGmm lg = fold_level(model, level);
    int K = model.components();
    if (x.size() != lg.means[0].size()) {
        throw std::invalid_argument("gmm_epsilon: latent dimension mismatch");
    }
    std::size_t D = x.size();

    std::vector<double> logp(K);
    for (int k = 0; k < K; ++k) {
        double q = 0.0;
        for (std::size_t d = 0; d < D; ++d) {
            double r = x[d] - lg.means[k][d];
            q += r * r;
        }
        logp[k] = std::log((*lg.weights)[k]) -
                  0.5 * static_cast<double>(D) * std::log(kTwoPi * lg.vars[k]) -
                  0.5 * q / lg.vars[k];
    }
    double m = *std::max_element(logp.begin(), logp.end());
    double z = 0.0;
    std::vector<double> resp(K);
    for (int k = 0; k < K; ++k) {
        resp[k] = std::exp(logp[k] - m);
        z += resp[k];
    }

    Vec eps(D, 0.0);
    for (int k = 0; k < K; ++k) {
        double w = lg.coef * resp[k] / (z * lg.vars[k]);
        for (std::size_t d = 0; d < D; ++d) {
            eps[d] += w * (x[d] - lg.means[k][d]);
        }
    }
    return eps;
}

double gmm_lipschitz_bound(const GmmModel& model, const NoiseLevel& level) {
    LeveledGmm lg = fold_level(model, level);
    int K = model.components();
    std::size_t D = lg.means[0].size();

    double inv_v_max = 0.0;
    for (int k = 0; k < K; ++k) inv_v_max = std::max(inv_v_max, 1.0 / lg.vars[k]);
    if (K == 1) return lg.coef * inv_v_max;

    // Responsibility-variation term: || Cov_r(grad log rho) || is bounded by
    // sum over pairs of sup_x r_j r_k ||g_j - g_k||^2, each pair reduced to a
    // 1-D optimization in t = ||x - mu_j||.
    double variation = 0.0;
    for (int a = 0; a < K; ++a) {
        for (int b = a + 1; b < K; ++b) {
            int j = a, k = b;
            if (lg.vars[j] > lg.vars[k]) std::swap(j, k);  // v_j <= v_k
            double vj = lg.vars[j], vk = lg.vars[k];
            double d2 = 0.0;
            for (std::size_t dd = 0; dd < D; ++dd) {
                double r = lg.means[j][dd] - lg.means[k][dd];
                d2 += r * r;
            }
            double d = std::sqrt(d2);

            if ((vk - vj) / vk < 1e-12) {
                // equal variances: ||g_j - g_k|| is the constant d/v
                variation += 0.25 * d2 / (vj * vk);
                continue;
            }

            double beta = 0.5 / vj - 0.5 / vk;
            double logc = std::log((*lg.weights)[j] / (*lg.weights)[k]) +
                          0.5 * static_cast<double>(D) * std::log(vk / vj);
            double c0 = logc + 0.5 * d2 / vk;
            // beyond t_max the exp factor kills the quadratic growth
            double disc = (d / vk) * (d / vk) + 4.0 * beta * (std::max(0.0, c0) + 80.0);
            double t_max = (d / vk + std::sqrt(disc)) / (2.0 * beta);

            auto value = [&](double t) {
                double e = c0 + t * d / vk - beta * t * t;
                double w = e > 0.0 ? 0.25 : std::min(0.25, std::exp(e));
                double slope = t / vj + (t + d) / vk;
                return w * slope * slope;
            };
            const int n = 8192;
            double best = 0.0;
            double t_best = 0.0;
            for (int s = 0; s <= n; ++s) {
                double t = t_max * static_cast<double>(s) / n;
                double v = value(t);
                if (v > best) {
                    best = v;
                    t_best = t;
                }
            }
            double h = t_max / n;
            for (int s = 0; s <= 512; ++s) {
                double t = std::max(0.0, t_best - h) + 2.0 * h * static_cast<double>(s) / 512;
                best = std::max(best, value(t));
            }
            variation += 1.1 * best;  // grid-coarseness margin
        }
    }
    return lg.coef * (inv_v_max + variation);
}

Vec replay_epsilon(const Trajectory& recorded, int ordinal) {
    if (ordinal < 0 || ordinal >= recorded.steps()) {
        throw std::out_of_range("replay_epsilon: step not in recorded trajectory");
    }
    return recorded.noises[ordinal];
}

Vec DenoiserHandle::predict(const Vec& x, const NoiseLevel& level, int ordinal) {
    ++eval_count;
    if (kind == Kind::AnalyticGmm) return gmm_epsilon(*model, x, level);
    return replay_epsilon(*recorded, ordinal);
}

DenoiserHandle make_gmm_denoiser(const GmmModel& model) {
    DenoiserHandle h;
    h.kind = DenoiserHandle::Kind::AnalyticGmm;
    h.model = &model;
    return h;
}

DenoiserHandle make_replay_denoiser(const Trajectory& recorded) {
    DenoiserHandle h;
    h.kind = DenoiserHandle::Kind::Replay;
    h.recorded = &recorded;
    return h;
}

GmmModel seeded_gmm_model(uint64_t seed, int components, int dim) {
    rng::Stream stream(rng::mix(seed, 0x6d0d3f8be7a15c42ULL));
    GmmModel model;
    model.weights.resize(components);
    model.means.resize(components);
    model.scales.resize(components);
    double sum = 0.0;
    for (int k = 0; k < components; ++k) {
        model.weights[k] = 0.5 + stream.uniform();
        sum += model.weights[k];
    }
    for (int k = 0; k < components; ++k) model.weights[k] /= sum;
    for (int k = 0; k < components; ++k) {
        model.means[k].resize(dim);
        for (int d = 0; d < dim; ++d) {
            model.means[k][d] = 3.0 * stream.uniform() - 1.5;
        }
        model.scales[k] = 0.2 + 0.8 * stream.uniform();
    }
    return model;
}

GmmModel default_gmm_model() {
    return seeded_gmm_model(0x00c0ffee, 3, 16);
}

}  // namespace skipdiff
