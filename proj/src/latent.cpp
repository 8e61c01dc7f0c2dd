#include "skipdiff/latent.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace skipdiff {

NormKind norm_kind_from_string(const std::string& s) {
    if (s == "l1" || s == "L1") return NormKind::L1;
    if (s == "l2" || s == "L2") return NormKind::L2;
    throw std::invalid_argument("unknown norm kind: " + s);
}

std::string to_string(NormKind kind) {
    return kind == NormKind::L1 ? "l1" : "l2";
}

Vec first_diff(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("first_diff: dimension mismatch");
    }
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

Vec first_diff(const LatentState& a, const LatentState& b) {
    return first_diff(a.values, b.values);
}

double latent_norm(const Vec& v, NormKind kind) {
    if (v.empty()) throw std::invalid_argument("latent_norm: empty vector");
    double acc = 0.0;
    if (kind == NormKind::L1) {
        for (double x : v) acc += std::fabs(x);
        return acc / static_cast<double>(v.size());
    }
    for (double x : v) acc += x * x;
    return std::sqrt(acc / static_cast<double>(v.size()));
}

void DiffWindow::push(const Vec& x) {
    ring_[count_ % 4] = x;
    ++count_;
}

void DiffWindow::clear() {
    for (auto& v : ring_) v.clear();
    count_ = 0;
}

const Vec& DiffWindow::latent(int k) const {
    if (k < 0 || k > 3 || static_cast<std::size_t>(k) >= size()) {
        throw std::out_of_range("DiffWindow::latent: index out of range");
    }
    return ring_[(count_ - 1 - static_cast<std::size_t>(k)) % 4];
}

Vec DiffWindow::diff(int k) const {
    return first_diff(latent(k), latent(k + 1));
}

Vec third_diff(const DiffWindow& w) {
    if (!w.full()) throw std::invalid_argument("third_diff: window not populated");
    Vec d0 = w.diff(0);  // dx_{i-1}
    Vec d1 = w.diff(1);  // dx_i
    Vec d2 = w.diff(2);  // dx_{i+1}
    Vec out(d0.size());
    for (std::size_t i = 0; i < d0.size(); ++i) {
        out[i] = d0[i] - 2.0 * d1[i] + d2[i];
    }
    return out;
}

bool cache_invariant_holds(const Trajectory& t) {
    if (t.noises.size() != t.evaluated.size()) return false;
    const Vec* cached = nullptr;
    for (std::size_t j = 0; j < t.noises.size(); ++j) {
        if (t.evaluated[j]) {
            cached = &t.noises[j];
        } else {
            if (cached == nullptr) return false;  // skip with no prior evaluation
            if (t.noises[j] != *cached) return false;
        }
    }
    return true;
}

std::string path_to_string(const SkipPath& path) {
    std::string s;
    s.reserve(path.size());
    for (bool e : path) s.push_back(e ? 'E' : 'S');
    return s;
}

SkipPath path_from_string(const std::string& s) {
    SkipPath path;
    path.reserve(s.size());
    for (char c : s) {
        if (c == 'E') path.push_back(true);
        else if (c == 'S') path.push_back(false);
        else throw std::invalid_argument("path_from_string: expected E or S");
    }
    return path;
}

int eval_count(const SkipPath& path) {
    int n = 0;
    for (bool e : path) n += e ? 1 : 0;
    return n;
}

void write_trajectory_jsonl(const Trajectory& t, const std::string& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot open for write: " + file);
    // first record: initial latent, no noise attached
    {
        nlohmann::json rec;
        rec["step_index"] = t.latents.front().step_index;
        rec["latent"] = t.latents.front().values;
        rec["noise"] = nullptr;
        rec["evaluated"] = nullptr;
        out << rec.dump() << "\n";
    }
    for (int j = 0; j < t.steps(); ++j) {
        nlohmann::json rec;
        rec["step_index"] = t.latents[j + 1].step_index;
        rec["latent"] = t.latents[j + 1].values;
        rec["noise"] = t.noises[j];
        rec["evaluated"] = static_cast<bool>(t.evaluated[j]);
        out << rec.dump() << "\n";
    }
}

Trajectory read_trajectory_jsonl(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open for read: " + file);
    Trajectory t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line);
        LatentState st;
        st.step_index = rec.at("step_index").get<int>();
        st.values = rec.at("latent").get<Vec>();
        t.latents.push_back(std::move(st));
        if (first) {
            first = false;
            continue;
        }
        t.noises.push_back(rec.at("noise").get<Vec>());
        t.evaluated.push_back(rec.at("evaluated").get<bool>());
    }
    return t;
}

}  // namespace skipdiff
