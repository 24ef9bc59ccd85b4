#pragma once

#include <cmath>
#include <sstream>

#include "tensor.hpp"
#include "trajectory.hpp"

namespace sgtn {

/// Inverse-L2-distance social kernel: 1 at zero distance, 1/d otherwise.
inline double kernel_fa(double l2_distance) {
    if (l2_distance < 0.0) throw std::domain_error("kernel_fa: negative distance");
    if (l2_distance < 1e-12) return 1.0;
    return 1.0 / l2_distance;
}

/// Per-frame velocity nodes. The first observed frame of each agent maps to
/// (0,0); later present frames carry the displacement per unit time since the
/// agent's previous present frame (deltas across gaps are divided by the gap
/// length). Absent frames are invalid and never interpolated.
struct VelocityField {
    std::vector<std::vector<std::array<double, 2>>> vel; // [t][a]
    std::vector<std::vector<bool>> valid;                // [t][a]
};

inline VelocityField velocity_nodes(const TrajectoryWindow& w) {
    w.validate();
    const std::size_t T = w.t_obs(), N = w.n_agents();
    VelocityField f;
    f.vel.assign(T, std::vector<std::array<double, 2>>(N, {0.0, 0.0}));
    f.valid.assign(T, std::vector<bool>(N, false));
    for (std::size_t a = 0; a < N; ++a) {
        long prev = -1;
        for (std::size_t t = 0; t < T; ++t) {
            if (!w.obs_present[t][a]) continue;
            if (prev < 0) {
                f.vel[t][a] = {0.0, 0.0};
            } else {
                const double gap = static_cast<double>(t) - static_cast<double>(prev);
                f.vel[t][a] = {(w.obs_pos[t][a][0] - w.obs_pos[prev][a][0]) / gap,
                               (w.obs_pos[t][a][1] - w.obs_pos[prev][a][1]) / gap};
            }
            f.valid[t][a] = true;
            prev = static_cast<long>(t);
        }
    }
    return f;
}

/// Raw adjacency for one frame: A[n][m] = f_a(||p_n - p_m||) for present
/// pairs, zero rows/columns for absent agents. Symmetric, diagonal 1.
inline Tensor adjacency(const std::vector<std::array<double, 2>>& pos,
                        const std::vector<bool>& present) {
    const std::size_t N = pos.size();
    Tensor A({N, N}, 0.0);
    for (std::size_t n = 0; n < N; ++n) {
        if (!present[n]) continue;
        A.at({n, n}) = 1.0;
        for (std::size_t m = n + 1; m < N; ++m) {
            if (!present[m]) continue;
            const double dx = pos[n][0] - pos[m][0];
            const double dy = pos[n][1] - pos[m][1];
            const double w = kernel_fa(std::sqrt(dx * dx + dy * dy));
            A.at({n, m}) = w;
            A.at({m, n}) = w;
        }
    }
    return A;
}

/// Symmetric degree normalization restricted to present agents. The default
/// applies D^{-1/2} A D^{-1/2}; the literal variant applies the similarity
/// transform D^{1/2} A D^{-1/2} for comparison.
inline Tensor normalize_adjacency(const Tensor& A, const std::vector<bool>& present,
                                  bool literal_form = false) {
    const std::size_t N = A.extent(0);
    if (A.rank() != 2 || A.extent(1) != N) throw std::invalid_argument("normalize: square matrix required");
    std::vector<double> left(N, 0.0), right(N, 0.0);
    for (std::size_t n = 0; n < N; ++n) {
        if (!present[n]) continue;
        double deg = 0.0;
        for (std::size_t m = 0; m < N; ++m) deg += A.at({n, m});
        if (deg <= 0.0) throw std::runtime_error("normalize: zero degree for present agent");
        const double inv_sqrt = 1.0 / std::sqrt(deg);
        right[n] = inv_sqrt;
        left[n] = literal_form ? std::sqrt(deg) : inv_sqrt;
    }
    Tensor out({N, N}, 0.0);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t m = 0; m < N; ++m) out.at({n, m}) = left[n] * A.at({n, m}) * right[m];
    return out;
}

/// Per-frame vertex, velocity and adjacency structures over one window.
struct SpatioTemporalGraph {
    VelocityField velocities;
    std::vector<Tensor> adj;        // raw A_t, one per observed frame
    std::vector<Tensor> adj_norm;   // normalized A'_t
    std::size_t n_agents = 0;
    std::size_t t_obs = 0;
};

inline SpatioTemporalGraph build_graph(const TrajectoryWindow& w, bool literal_normalization = false) {
    SpatioTemporalGraph g;
    g.velocities = velocity_nodes(w);
    g.n_agents = w.n_agents();
    g.t_obs = w.t_obs();
    for (std::size_t t = 0; t < w.t_obs(); ++t) {
        Tensor A = adjacency(w.obs_pos[t], w.obs_present[t]);
        g.adj_norm.push_back(normalize_adjacency(A, w.obs_present[t], literal_normalization));
        g.adj.push_back(std::move(A));
    }
    return g;
}

constexpr long kEmptySlot = -1;

/// Constant-resolution packing of one slot group: velocity block T x K x 2,
/// adjacency block T x K x K, and a map from slots to window agent indices.
struct PseudoImage {
    Tensor v_block;                 // T x K x 2
    Tensor a_block;                 // T x K x K
    std::vector<long> slot_agent;   // K entries, window agent index or kEmptySlot
    std::vector<std::vector<bool>> valid; // T x K
};

/// Stacks the graph into ceil(N/K) pseudo-images. Agents are packed in
/// ascending-id order; when N > K the adjacency is intercepted into square
/// diagonal K x K blocks, dropping cross-group entries.
inline std::vector<PseudoImage> pseudo_images(const SpatioTemporalGraph& g, std::size_t K) {
    if (K < 1) throw std::invalid_argument("pseudo_images: K must be >= 1");
    const std::size_t N = g.n_agents, T = g.t_obs;
    const std::size_t groups = N == 0 ? 1 : (N + K - 1) / K;
    std::vector<PseudoImage> out;
    for (std::size_t grp = 0; grp < groups; ++grp) {
        PseudoImage im;
        im.v_block = Tensor({T, K, 2}, 0.0);
        im.a_block = Tensor({T, K, K}, 0.0);
        im.slot_agent.assign(K, kEmptySlot);
        im.valid.assign(T, std::vector<bool>(K, false));
        for (std::size_t s = 0; s < K; ++s) {
            const std::size_t a = grp * K + s;
            if (a < N) im.slot_agent[s] = static_cast<long>(a);
        }
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t s = 0; s < K; ++s) {
                const long a = im.slot_agent[s];
                if (a < 0 || !g.velocities.valid[t][a]) continue;
                im.valid[t][s] = true;
                im.v_block.at({t, s, 0}) = g.velocities.vel[t][a][0];
                im.v_block.at({t, s, 1}) = g.velocities.vel[t][a][1];
                for (std::size_t s2 = 0; s2 < K; ++s2) {
                    const long a2 = im.slot_agent[s2];
                    if (a2 < 0 || !g.velocities.valid[t][a2]) continue;
                    im.a_block.at({t, s, s2}) =
                        g.adj_norm[t].at({static_cast<std::size_t>(a), static_cast<std::size_t>(a2)});
                }
            }
        out.push_back(std::move(im));
    }
    return out;
}

/// Plain-text frame-major listing, used by golden tests.
inline std::string dump_pseudo_image(const PseudoImage& im) {
    std::ostringstream os;
    const std::size_t T = im.v_block.extent(0), K = im.v_block.extent(1);
    os << "pseudo-image T=" << T << " K=" << K << "\n";
    os << "slots:";
    for (long a : im.slot_agent) os << " " << (a == kEmptySlot ? std::string("EMPTY") : std::to_string(a));
    os << "\n";
    for (std::size_t t = 0; t < T; ++t) {
        os << "frame " << t << " V:";
        for (std::size_t s = 0; s < K; ++s)
            os << " (" << im.v_block.at({t, s, 0}) << "," << im.v_block.at({t, s, 1}) << ")";
        os << "\n";
        for (std::size_t s = 0; s < K; ++s) {
            os << "  A[" << s << "]:";
            for (std::size_t s2 = 0; s2 < K; ++s2) os << " " << im.a_block.at({t, s, s2});
            os << "\n";
        }
    }
    return os.str();
}

} // namespace sgtn
