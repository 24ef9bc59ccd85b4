#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>

#include "tensor.hpp"
#include "trajectory.hpp"

namespace sgtn {

/// Predicted and ground-truth absolute positions are N x P x 2; validity is
/// [step][agent] like TrajectoryWindow's future mask.
using StepMask = std::vector<std::vector<bool>>;

namespace detail {

inline void check_aligned(const Tensor& pred, const Tensor& gt, const StepMask& mask) {
    if (pred.shape() != gt.shape()) throw std::invalid_argument("metric: shape mismatch");
    if (pred.shape().size() != 3 || pred.extent(2) != 2)
        throw std::invalid_argument("metric: expected N x P x 2");
    if (mask.size() != pred.extent(1) || (mask.size() && mask[0].size() != pred.extent(0)))
        throw std::invalid_argument("metric: mask shape mismatch");
}

inline double dist(const Tensor& a, const Tensor& b, std::size_t n, std::size_t t) {
    const double dx = a.at({n, t, 0}) - b.at({n, t, 0});
    const double dy = a.at({n, t, 1}) - b.at({n, t, 1});
    return std::hypot(dx, dy);
}

} // namespace detail

/// Mean Euclidean error over all valid (agent, step) pairs.
inline double ade(const Tensor& pred, const Tensor& gt, const StepMask& mask) {
    detail::check_aligned(pred, gt, mask);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t a = 0; a < pred.extent(0); ++a)
        for (std::size_t t = 0; t < pred.extent(1); ++t)
            if (mask[t][a]) {
                sum += detail::dist(pred, gt, a, t);
                ++count;
            }
    if (count == 0) throw std::invalid_argument("ade: empty valid set");
    return sum / static_cast<double>(count);
}

/// Mean final-step error over agents whose final step is valid.
inline double fde(const Tensor& pred, const Tensor& gt, const StepMask& mask) {
    detail::check_aligned(pred, gt, mask);
    const std::size_t last = pred.extent(1) - 1;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t a = 0; a < pred.extent(0); ++a)
        if (mask[last][a]) {
            sum += detail::dist(pred, gt, a, last);
            ++count;
        }
    if (count == 0) throw std::invalid_argument("fde: no agent with a valid final step");
    return sum / static_cast<double>(count);
}

struct BestOfN {
    double ade = 0.0, fde = 0.0;
};

/// Per agent, the sample minimizing that agent's ADE supplies both reported
/// numbers; `independent_min` instead minimizes ADE and FDE separately.
inline BestOfN best_of_n(const std::vector<Tensor>& samples, const Tensor& gt, const StepMask& mask,
                         bool independent_min = false) {
    if (samples.empty()) throw std::invalid_argument("best_of_n: no samples");
    for (const auto& s : samples) detail::check_aligned(s, gt, mask);
    const std::size_t N = gt.extent(0), P = gt.extent(1), last = P - 1;
    double ade_sum = 0.0, fde_sum = 0.0;
    std::size_t ade_agents = 0, fde_agents = 0;
    for (std::size_t a = 0; a < N; ++a) {
        std::size_t valid = 0;
        for (std::size_t t = 0; t < P; ++t) valid += mask[t][a] ? 1 : 0;
        if (valid == 0) continue;
        double best_ade = 0.0, ade_pick_fde = 0.0, best_fde = 0.0;
        bool first = true;
        for (const auto& s : samples) {
            double sum = 0.0;
            for (std::size_t t = 0; t < P; ++t)
                if (mask[t][a]) sum += detail::dist(s, gt, a, t);
            const double sample_ade = sum / static_cast<double>(valid);
            const double sample_fde = mask[last][a] ? detail::dist(s, gt, a, last) : 0.0;
            if (first || sample_ade < best_ade) {
                best_ade = sample_ade;
                ade_pick_fde = sample_fde;
            }
            if (first || sample_fde < best_fde) best_fde = sample_fde;
            first = false;
        }
        ade_sum += best_ade;
        ++ade_agents;
        if (mask[last][a]) {
            fde_sum += independent_min ? best_fde : ade_pick_fde;
            ++fde_agents;
        }
    }
    if (ade_agents == 0) throw std::invalid_argument("best_of_n: empty valid set");
    BestOfN r;
    r.ade = ade_sum / static_cast<double>(ade_agents);
    r.fde = fde_agents ? fde_sum / static_cast<double>(fde_agents) : 0.0;
    return r;
}

/// True when any agent pair comes strictly within `threshold` at any step
/// where both are valid.
inline bool window_collides(const Tensor& pred, const StepMask& mask, double threshold) {
    const std::size_t N = pred.extent(0), P = pred.extent(1);
    for (std::size_t t = 0; t < P; ++t)
        for (std::size_t a = 0; a < N; ++a)
            for (std::size_t b = a + 1; b < N; ++b)
                if (mask[t][a] && mask[t][b]) {
                    const double dx = pred.at({a, t, 0}) - pred.at({b, t, 0});
                    const double dy = pred.at({a, t, 1}) - pred.at({b, t, 1});
                    if (std::hypot(dx, dy) < threshold) return true;
                }
    return false;
}

/// Percentage of windows containing at least one colliding pair-frame. The
/// per-pair variant counts colliding pairs over all pairs instead.
inline double col(const std::vector<Tensor>& window_preds, const std::vector<StepMask>& masks,
                  double threshold = 0.2, bool per_pair = false) {
    if (window_preds.size() != masks.size()) throw std::invalid_argument("col: size mismatch");
    if (window_preds.empty()) throw std::invalid_argument("col: no windows");
    if (!per_pair) {
        std::size_t hits = 0;
        for (std::size_t w = 0; w < window_preds.size(); ++w)
            hits += window_collides(window_preds[w], masks[w], threshold) ? 1 : 0;
        return 100.0 * static_cast<double>(hits) / static_cast<double>(window_preds.size());
    }
    std::size_t pairs = 0, hits = 0;
    for (std::size_t w = 0; w < window_preds.size(); ++w) {
        const Tensor& p = window_preds[w];
        const StepMask& m = masks[w];
        const std::size_t N = p.extent(0), P = p.extent(1);
        for (std::size_t a = 0; a < N; ++a)
            for (std::size_t b = a + 1; b < N; ++b) {
                bool shared = false, hit = false;
                for (std::size_t t = 0; t < P; ++t) {
                    if (!m[t][a] || !m[t][b]) continue;
                    shared = true;
                    const double dx = p.at({a, t, 0}) - p.at({b, t, 0});
                    const double dy = p.at({a, t, 1}) - p.at({b, t, 1});
                    if (std::hypot(dx, dy) < threshold) hit = true;
                }
                if (shared) {
                    ++pairs;
                    hits += hit ? 1 : 0;
                }
            }
    }
    if (pairs == 0) throw std::invalid_argument("col: no agent pairs");
    return 100.0 * static_cast<double>(hits) / static_cast<double>(pairs);
}

/// RMSE at the frame closest to each whole-second horizon, pooled over a set
/// of windows. Errors pool over agents and windows per horizon.
inline std::vector<double> rmse_per_horizon(const std::vector<Tensor>& preds,
                                            const std::vector<Tensor>& gts,
                                            const std::vector<StepMask>& masks,
                                            double frames_per_second,
                                            std::size_t horizons = 5) {
    if (preds.size() != gts.size() || preds.size() != masks.size())
        throw std::invalid_argument("rmse: size mismatch");
    if (preds.empty()) throw std::invalid_argument("rmse: no windows");
    std::vector<double> sq(horizons, 0.0);
    std::vector<std::size_t> counts(horizons, 0);
    for (std::size_t w = 0; w < preds.size(); ++w) {
        detail::check_aligned(preds[w], gts[w], masks[w]);
        const std::size_t P = preds[w].extent(1);
        for (std::size_t h = 1; h <= horizons; ++h) {
            const double target = static_cast<double>(h) * frames_per_second - 1.0;
            const auto frame = static_cast<std::size_t>(
                std::min<long long>(std::llround(std::max(0.0, target)),
                                    static_cast<long long>(P - 1)));
            if (static_cast<double>(h) * frames_per_second > static_cast<double>(P) + 0.5)
                throw std::invalid_argument("rmse: horizon beyond prediction length");
            for (std::size_t a = 0; a < preds[w].extent(0); ++a)
                if (masks[w][frame][a]) {
                    const double d = detail::dist(preds[w], gts[w], a, frame);
                    sq[h - 1] += d * d;
                    ++counts[h - 1];
                }
        }
    }
    std::vector<double> out(horizons);
    for (std::size_t h = 0; h < horizons; ++h) {
        if (counts[h] == 0) throw std::invalid_argument("rmse: empty horizon");
        out[h] = std::sqrt(sq[h] / static_cast<double>(counts[h]));
    }
    return out;
}

struct WeightedSums {
    double wsade = 0.0, wsfde = 0.0;
};

constexpr double kVehicleWeight = 0.20;
constexpr double kPedestrianWeight = 0.58;
constexpr double kBicyclistWeight = 0.22;

inline double weighted_sum(double vehicle, double pedestrian, double bicyclist) {
    return kVehicleWeight * vehicle + kPedestrianWeight * pedestrian + kBicyclistWeight * bicyclist;
}

inline WeightedSums weighted_sums(double ade_v, double ade_p, double ade_b, double fde_v,
                                  double fde_p, double fde_b) {
    return {weighted_sum(ade_v, ade_p, ade_b), weighted_sum(fde_v, fde_p, fde_b)};
}

struct MetricsReport {
    struct Entry {
        std::string name;
        double value = 0.0;
        std::size_t count = 0;
    };
    std::vector<Entry> entries;
    std::string config_echo;

    void add(const std::string& name, double value, std::size_t count) {
        entries.push_back({name, value, count});
    }

    std::string text() const {
        std::ostringstream ss;
        ss << std::fixed << std::setprecision(6);
        std::size_t width = 0;
        for (const auto& e : entries) width = std::max(width, e.name.size());
        for (const auto& e : entries)
            ss << std::left << std::setw(static_cast<int>(width) + 2) << e.name << std::right
               << std::setw(12) << e.value << "  (n=" << e.count << ")\n";
        if (!config_echo.empty()) ss << "# " << config_echo << "\n";
        return ss.str();
    }

    void write_kv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::invalid_argument("cannot write " + path);
        out.precision(17);
        for (const auto& e : entries) out << e.name << ' ' << e.value << ' ' << e.count << '\n';
    }
};

} // namespace sgtn
