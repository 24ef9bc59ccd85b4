#pragma once

#include <array>
#include <cmath>

#include "autodiff.hpp"
#include "rng.hpp"

namespace sgtn {

/// Per-slot, per-future-step bivariate Gaussian over displacement.
/// sigma is strictly positive (exp) and |rho| < 1 (tanh) by construction.
struct GaussianField {
    Var mu;    // K x P x 2
    Var sigma; // K x P x 2
    Var rho;   // K x P x 1
};

struct GaussianFieldValue {
    Tensor mu, sigma, rho;
};

/// Linear map D -> 5 per step, with the positivity / correlation constraints
/// applied channelwise.
inline GaussianField project_gaussian(const Var& hidden, const Var& w, const Var& b) {
    Var raw = matmul(hidden, w) + b;
    const std::size_t last = raw.shape().size() - 1;
    GaussianField f;
    f.mu = slice(raw, last, 0, 2);
    f.sigma = vexp(slice(raw, last, 2, 2));
    f.rho = vtanh(slice(raw, last, 4, 1));
    return f;
}

inline GaussianFieldValue field_value(const GaussianField& f) {
    return {f.mu.value(), f.sigma.value(), f.rho.value()};
}

/// Mean negative log-likelihood of target displacements over valid
/// slot-steps. `targets` is K x P x 2, `valid_mask` is K x P x 1 (0/1).
inline Var nll_loss(const GaussianField& f, const Tensor& targets, const Tensor& valid_mask) {
    double count = 0.0;
    for (std::size_t i = 0; i < valid_mask.size(); ++i) count += valid_mask[i];
    if (count == 0.0) throw std::invalid_argument("nll_loss: empty valid set");
    const std::size_t last = f.mu.shape().size() - 1;
    Var tx = constant(Tensor(f.rho.shape(), 0.0)), ty = tx;
    {
        Tensor txv(f.rho.shape()), tyv(f.rho.shape());
        for (std::size_t i = 0; i < txv.size(); ++i) {
            txv[i] = targets[2 * i];
            tyv[i] = targets[2 * i + 1];
        }
        tx = constant(std::move(txv));
        ty = constant(std::move(tyv));
    }
    Var dx = slice(f.mu, last, 0, 1) - tx;
    Var dy = slice(f.mu, last, 1, 1) - ty;
    Var sx = slice(f.sigma, last, 0, 1);
    Var sy = slice(f.sigma, last, 1, 1);
    Var rho = f.rho;
    Var omr2 = constant(1.0) - mul(rho, rho);
    Var nx = dx / sx;
    Var ny = dy / sy;
    Var z = mul(nx, nx) - 2.0 * mul(rho, mul(nx, ny)) + mul(ny, ny);
    Var per = constant(std::log(2.0 * 3.14159265358979323846)) + vlog(sx) + vlog(sy) +
              0.5 * vlog(omr2) + z / (2.0 * omr2);
    return sum(mul(per, constant(valid_mask))) / count;
}

/// One InfoNCE contrast: -log softmax over dot products scaled by 1/tau,
/// with the positive key at `positive_index`.
inline Var info_nce_term(const Var& query, const Var& keys, std::size_t positive_index, double tau) {
    if (keys.shape().size() != 2) throw std::invalid_argument("info_nce: keys must be M x E");
    const std::size_t M = keys.shape()[0], E = keys.shape()[1];
    if (positive_index >= M) throw std::invalid_argument("info_nce: positive index out of range");
    if (M < 2) throw std::invalid_argument("info_nce: need at least one negative key");
    if (tau <= 0.0) throw std::invalid_argument("info_nce: temperature must be positive");
    Var logits = reshape(matmul(keys, reshape(query, {E, 1})), {M}) / tau;
    double mx = logits.value()[0];
    for (std::size_t i = 1; i < M; ++i) mx = std::max(mx, logits.value()[i]);
    Var lse = vlog(sum(vexp(logits - mx))) + mx; // detached max shift
    return lse - reshape(slice(logits, 0, positive_index, 1), {});
}

inline Var total_loss(const Var& nll, const Var& nce, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("total_loss: lambda must be >= 0");
    if (lambda == 0.0) return nll;
    return nll + lambda * nce;
}

/// Draws n sampled future position trajectories per slot, integrating
/// per-step bivariate-Gaussian displacements (Cholesky) from the last
/// observed positions. Deterministic for a fixed generator state.
inline std::vector<Tensor> sample_trajectories(const GaussianFieldValue& f,
                                               const std::vector<std::array<double, 2>>& last_pos,
                                               std::size_t n_samples, Rng& rng) {
    const std::size_t K = f.mu.extent(0), P = f.mu.extent(1);
    if (last_pos.size() != K) throw std::invalid_argument("sample: last position count mismatch");
    std::vector<Tensor> out;
    out.reserve(n_samples);
    for (std::size_t s = 0; s < n_samples; ++s) {
        Tensor traj({K, P, 2});
        for (std::size_t k = 0; k < K; ++k) {
            double x = last_pos[k][0], y = last_pos[k][1];
            for (std::size_t t = 0; t < P; ++t) {
                const double sx = f.sigma.at({k, t, 0});
                const double sy = f.sigma.at({k, t, 1});
                const double rho = f.rho.at({k, t, 0});
                const double z1 = rng.normal();
                const double z2 = rng.normal();
                x += f.mu.at({k, t, 0}) + sx * z1;
                y += f.mu.at({k, t, 1}) + sy * (rho * z1 + std::sqrt(1.0 - rho * rho) * z2);
                traj.at({k, t, 0}) = x;
                traj.at({k, t, 1}) = y;
            }
        }
        out.push_back(std::move(traj));
    }
    return out;
}

/// The mu-integrated (mean) trajectory from the last observed positions.
inline Tensor mean_trajectory(const GaussianFieldValue& f,
                              const std::vector<std::array<double, 2>>& last_pos) {
    const std::size_t K = f.mu.extent(0), P = f.mu.extent(1);
    Tensor traj({K, P, 2});
    for (std::size_t k = 0; k < K; ++k) {
        double x = last_pos[k][0], y = last_pos[k][1];
        for (std::size_t t = 0; t < P; ++t) {
            x += f.mu.at({k, t, 0});
            y += f.mu.at({k, t, 1});
            traj.at({k, t, 0}) = x;
            traj.at({k, t, 1}) = y;
        }
    }
    return traj;
}

} // namespace sgtn
