#pragma once

#include <cmath>

#include "autodiff.hpp"

namespace sgtn {

enum class AttentionMode { off, dense, sparse };

inline const char* attention_mode_name(AttentionMode m) {
    switch (m) {
        case AttentionMode::dense: return "dense";
        case AttentionMode::sparse: return "sparse";
        default: return "off";
    }
}

inline AttentionMode parse_attention_mode(const std::string& s) {
    if (s == "off") return AttentionMode::off;
    if (s == "dense") return AttentionMode::dense;
    if (s == "sparse") return AttentionMode::sparse;
    throw std::invalid_argument("unknown attention mode: " + s);
}

/// Attention over the adjacency block itself. Queries and keys are learned
/// linear projections of each K-length adjacency row (raw rows behind a
/// flag). The sparse variant thresholds at 0.5, strictly.
struct AdjacencyAttention {
    Var wq; // K x d_k
    Var wk; // K x d_k
    bool raw_qk = false;
    double threshold = 0.5;

    /// Row-stochastic attention map per frame: softmax(Q . K^T / sqrt(d_k)).
    Var attention_weights(const Var& a_block) const {
        Var q, kp;
        double dk;
        if (raw_qk) {
            q = a_block;
            kp = a_block;
            dk = static_cast<double>(a_block.shape().back());
        } else {
            q = matmul(a_block, wq);
            kp = matmul(a_block, wk);
            dk = static_cast<double>(wq.shape().back());
        }
        Var scores = matmul(q, transpose_last2(kp)) / std::sqrt(dk);
        return softmax(scores, 2);
    }

    /// 0/1 mask keeping entries with attention strictly above the threshold.
    /// Rows sum to 1, so at most one entry per row survives.
    Tensor sparse_mask(const Tensor& attn) const {
        Tensor m(attn.shape(), 0.0);
        for (std::size_t i = 0; i < attn.size(); ++i) m[i] = attn[i] > threshold ? 1.0 : 0.0;
        return m;
    }

    /// off: identity. dense: attn (.) A, gradients reach wq/wk. sparse:
    /// detached indicator mask (.) A; no gradient through the indicator.
    Var apply(const Var& a_block, AttentionMode mode) const {
        switch (mode) {
            case AttentionMode::off:
                return a_block;
            case AttentionMode::dense:
                return mul(attention_weights(a_block), a_block);
            case AttentionMode::sparse: {
                Var attn = attention_weights(a_block);
                return mul(constant(sparse_mask(attn.value())), a_block);
            }
        }
        throw std::logic_error("unreachable");
    }
};

} // namespace sgtn
