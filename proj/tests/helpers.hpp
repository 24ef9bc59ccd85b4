#pragma once

#include <functional>

#include <sgtn/sgtn.hpp>

namespace sgtn::test {

inline Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo = -1.0,
                            double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

/// Central finite-difference check of d(root)/d(leaves). `build` must produce
/// a scalar root from the leaves' current values. Returns the maximum
/// relative error over all leaf elements.
inline double fd_check(const std::function<Var(std::vector<Var>&)>& build, std::vector<Var>& leaves,
                       double step = 1e-5) {
    for (auto& l : leaves) l.grad().fill(0.0);
    Var root = build(leaves);
    backward(root);
    double worst = 0.0;
    for (auto& leaf : leaves) {
        Tensor& value = leaf.node()->value;
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double keep = value[i];
            value[i] = keep + step;
            const double fp = build(leaves).value()[0];
            value[i] = keep - step;
            const double fm = build(leaves).value()[0];
            value[i] = keep;
            const double fd = (fp - fm) / (2.0 * step);
            const double ad = leaf.grad()[i];
            const double scale = std::max({1.0, std::abs(fd), std::abs(ad)});
            worst = std::max(worst, std::abs(ad - fd) / scale);
        }
    }
    return worst;
}

/// Random observation-only window (all agents present in every frame unless
/// `dropout` removes some interior frames; first/last rules still hold).
inline TrajectoryWindow random_window(Rng& rng, std::size_t n_agents, std::size_t t_obs,
                                      std::size_t t_pred, double dropout = 0.0) {
    TrajectoryWindow w;
    for (std::size_t a = 0; a < n_agents; ++a) {
        w.agent_ids.push_back(static_cast<long>(a * 3 + 1));
        w.agent_classes.push_back(AgentClass::pedestrian);
    }
    for (std::size_t t = 0; t < t_obs; ++t) w.obs_frames.push_back(static_cast<long>(t));
    for (std::size_t t = 0; t < t_pred; ++t) w.fut_frames.push_back(static_cast<long>(t_obs + t));
    w.obs_pos.assign(t_obs, std::vector<std::array<double, 2>>(n_agents, {0.0, 0.0}));
    w.obs_present.assign(t_obs, std::vector<bool>(n_agents, false));
    w.fut_pos.assign(t_pred, std::vector<std::array<double, 2>>(n_agents, {0.0, 0.0}));
    w.fut_present.assign(t_pred, std::vector<bool>(n_agents, false));
    for (std::size_t a = 0; a < n_agents; ++a) {
        const double x0 = rng.uniform(-5.0, 5.0), y0 = rng.uniform(-5.0, 5.0);
        const double vx = rng.uniform(-0.5, 0.5), vy = rng.uniform(-0.5, 0.5);
        for (std::size_t t = 0; t < t_obs; ++t) {
            const bool edge = t == 0 || t + 1 == t_obs;
            const bool present = edge || rng.uniform() >= dropout;
            if (!present) continue;
            w.obs_present[t][a] = true;
            w.obs_pos[t][a] = {x0 + vx * static_cast<double>(t) + 0.05 * rng.normal(),
                               y0 + vy * static_cast<double>(t) + 0.05 * rng.normal()};
        }
        for (std::size_t t = 0; t < t_pred; ++t) {
            if (rng.uniform() < dropout) continue;
            w.fut_present[t][a] = true;
            w.fut_pos[t][a] = {x0 + vx * static_cast<double>(t_obs + t) + 0.05 * rng.normal(),
                               y0 + vy * static_cast<double>(t_obs + t) + 0.05 * rng.normal()};
        }
    }
    w.validate();
    return w;
}

/// Eigenvalues of a symmetric matrix via cyclic Jacobi rotations.
inline std::vector<double> symmetric_eigenvalues(Tensor m) {
    const std::size_t n = m.extent(0);
    for (std::size_t sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += m.at({p, q}) * m.at({p, q});
        if (off < 1e-26) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = m.at({p, q});
                if (std::abs(apq) < 1e-18) continue;
                const double app = m.at({p, p}), aqq = m.at({q, q});
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = m.at({k, p}), akq = m.at({k, q});
                    m.at({k, p}) = c * akp - s * akq;
                    m.at({k, q}) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = m.at({p, k}), aqk = m.at({q, k});
                    m.at({p, k}) = c * apk - s * aqk;
                    m.at({q, k}) = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = m.at({i, i});
    return ev;
}

} // namespace sgtn::test
