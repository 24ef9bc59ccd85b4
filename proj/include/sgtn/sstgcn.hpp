#pragma once

#include "autodiff.hpp"

namespace sgtn {

struct SstgcnConfig {
    std::size_t layers = 1;
    bool no_spatial = false;   // swap adjacency for identity (ablation)
    bool no_temporal = false;  // 1x1 temporal kernel (ablation)
    bool activation_tanh = true;
};

/// One spatio-temporal layer: 1x1 spatial kernel, 3x1 temporal kernel,
/// residual 1x1 kernel only where the channel width changes (layer 1, 2->5).
struct SstgcnLayer {
    Var ws, bs;  // spatial 1x1 kernel {1,1,Cin,Cout} + bias {Cout}
    Var wt, bt;  // temporal kernel {Ht,1,Cout,Cout} + bias {Cout}
    Var wr;      // residual 1x1 kernel {1,1,Cin,Cout}; invalid beyond layer 1
    std::size_t cin = 0, cout = 0;
};

/// Feature transform then adjacency aggregation: Z_t = A_t . (conv1x1(V_t)).
inline Var spatial_conv(const Var& v_block, const Var& a_block, const SstgcnLayer& layer,
                        bool no_spatial = false) {
    Var x = conv2d(v_block, layer.ws) + layer.bs;
    if (no_spatial) return x;
    return matmul(a_block, x);
}

/// conv3x1(Z) + Res(V-in); the residual is a 1x1 convolution at layer 1 and
/// identity otherwise.
inline Var temporal_conv(const Var& z, const Var& v_in, const SstgcnLayer& layer) {
    Var out = conv2d(z, layer.wt) + layer.bt;
    if (layer.wr.valid()) return out + conv2d(v_in, layer.wr);
    return out + v_in;
}

/// Sequential layer application; the adjacency block is shared by all layers.
inline Var sstgcn_forward(const Var& v_block, const Var& a_block,
                          const std::vector<SstgcnLayer>& layers, const SstgcnConfig& cfg) {
    if (layers.empty()) throw std::invalid_argument("sstgcn: at least one layer required");
    Var v = v_block;
    for (const auto& layer : layers) {
        Var z = spatial_conv(v, a_block, layer, cfg.no_spatial);
        Var out = temporal_conv(z, v, layer);
        v = cfg.activation_tanh ? vtanh(out) : out;
    }
    return v;
}

} // namespace sgtn
