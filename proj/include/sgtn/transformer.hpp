#pragma once

#include <cmath>

#include "autodiff.hpp"
#include "rng.hpp"

namespace sgtn {

struct TransformerConfig {
    std::size_t heads = 4;
    std::size_t layers = 6;      // encoder and decoder stack depth
    std::size_t embed_dim = 8;   // D, divisible by heads
    std::size_t ffn_dim = 32;
    double dropout = 0.1;

    void validate() const {
        if (embed_dim == 0 || heads == 0 || layers == 0 || ffn_dim == 0)
            throw std::invalid_argument("transformer config: zero extent");
        if (embed_dim % heads != 0)
            throw std::invalid_argument("transformer config: embed_dim not divisible by heads");
    }
};

/// Sinusoidal timestamp encoding: even dims sin(t/10000^{d/D}), odd dims
/// cos(t/10000^{d/D}), with 0-indexed d. Deterministic in (t, D).
inline std::vector<double> positional_encoding(long t, std::size_t D) {
    if (t < 0) throw std::invalid_argument("positional_encoding: negative timestamp");
    std::vector<double> p(D);
    for (std::size_t d = 0; d < D; ++d) {
        const double angle = static_cast<double>(t) /
                             std::pow(10000.0, static_cast<double>(d) / static_cast<double>(D));
        p[d] = (d % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
    return p;
}

inline Tensor positional_encoding_block(const std::vector<long>& timestamps, std::size_t D) {
    Tensor out({timestamps.size(), D});
    for (std::size_t i = 0; i < timestamps.size(); ++i) {
        const auto p = positional_encoding(timestamps[i], D);
        for (std::size_t d = 0; d < D; ++d) out.at({i, d}) = p[d];
    }
    return out;
}

struct AttentionBlock {
    Var wq, bq, wk, bk, wv, bv, wo, bo; // all D x D mappings with D biases
};

struct LayerNormParams {
    Var gain, bias; // D each
};

struct FfnParams {
    Var w1, b1, w2, b2; // D->F->D
};

struct EncoderLayerParams {
    AttentionBlock self_attn;
    LayerNormParams ln1;
    FfnParams ffn;
    LayerNormParams ln2;
};

struct DecoderLayerParams {
    AttentionBlock self_attn;
    LayerNormParams ln1;
    AttentionBlock cross_attn;
    LayerNormParams ln2;
    FfnParams ffn;
    LayerNormParams ln3;
};

struct TransformerParams {
    Var embed_w, embed_b;         // feature channels -> D
    Var dec_embed_w, dec_embed_b; // velocity (2) -> D
    std::vector<EncoderLayerParams> encoder;
    std::vector<DecoderLayerParams> decoder;
};

constexpr double kMaskedScore = -1e30; // underflows to exactly 0 after softmax

/// Normalization over the feature axis with learned gain and bias.
inline Var layer_norm(const Var& x, const LayerNormParams& p) {
    const std::size_t last = x.shape().size() - 1;
    Var mu = mean(x, last, true);
    Var centered = x - mu;
    Var var = mean(mul(centered, centered), last, true);
    Var normed = centered / vsqrt(var + 1e-5);
    return mul(normed, p.gain) + p.bias;
}

inline Var feed_forward(const Var& x, const FfnParams& p) {
    return matmul(vtanh(matmul(x, p.w1) + p.b1), p.w2) + p.b2;
}

/// Inverted-dropout with a seeded generator; identity when rng is null or
/// the rate is zero (evaluation mode).
inline Var dropout(const Var& x, double rate, Rng* rng) {
    if (!rng || rate <= 0.0) return x;
    Tensor mask(x.shape());
    const double keep = 1.0 - rate;
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = rng->uniform() < keep ? 1.0 / keep : 0.0;
    return mul(x, constant(std::move(mask)));
}

/// Scaled dot-product attention over per-head projections; `mask` is an
/// additive score tensor (0 allowed, kMaskedScore disallowed), batched over
/// the leading slot axis. Throws if a row is fully masked.
inline Var multi_head_attention(const Var& q_in, const Var& kv_in, const Tensor& mask,
                                const AttentionBlock& p, std::size_t heads) {
    const std::size_t D = q_in.shape().back();
    if (D % heads != 0) throw std::invalid_argument("attention: heads must divide embed dim");
    const std::size_t dk = D / heads;
    const std::size_t Sq = q_in.shape()[q_in.shape().size() - 2];
    const std::size_t Sk = kv_in.shape()[kv_in.shape().size() - 2];
    {
        const std::size_t rows = mask.size() / Sk;
        for (std::size_t r = 0; r < rows; ++r) {
            bool open = false;
            for (std::size_t j = 0; j < Sk && !open; ++j) open = mask[r * Sk + j] > kMaskedScore / 2;
            if (!open) throw std::runtime_error("attention: fully masked row");
        }
    }
    (void)Sq;
    Var q = matmul(q_in, p.wq) + p.bq;
    Var k = matmul(kv_in, p.wk) + p.bk;
    Var v = matmul(kv_in, p.wv) + p.bv;
    Var maskv = constant(mask);
    std::vector<Var> ctx;
    for (std::size_t h = 0; h < heads; ++h) {
        Var qh = slice(q, q.shape().size() - 1, h * dk, dk);
        Var kh = slice(k, k.shape().size() - 1, h * dk, dk);
        Var vh = slice(v, v.shape().size() - 1, h * dk, dk);
        Var scores = matmul(qh, transpose_last2(kh)) / std::sqrt(static_cast<double>(dk));
        Var attn = softmax(scores + maskv, scores.shape().size() - 1);
        ctx.push_back(matmul(attn, vh));
    }
    Var cat = heads == 1 ? ctx[0] : concat(ctx, ctx[0].shape().size() - 1);
    return matmul(cat, p.wo) + p.bo;
}

namespace detail {

/// Key mask over valid frames; slots with no valid frame are left fully
/// open (their embeddings are zero and their outputs are re-masked).
inline Tensor key_mask(const std::vector<std::vector<bool>>& valid_kt, std::size_t Sq) {
    const std::size_t K = valid_kt.size();
    const std::size_t Sk = K ? valid_kt[0].size() : 0;
    Tensor m({K, Sq, Sk}, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        bool any = false;
        for (std::size_t j = 0; j < Sk; ++j) any = any || valid_kt[k][j];
        if (!any) continue;
        for (std::size_t i = 0; i < Sq; ++i)
            for (std::size_t j = 0; j < Sk; ++j)
                if (!valid_kt[k][j]) m.at({k, i, j}) = kMaskedScore;
    }
    return m;
}

inline Tensor causal_mask(std::size_t K, std::size_t S) {
    Tensor m({K, S, S}, 0.0);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t i = 0; i < S; ++i)
            for (std::size_t j = i + 1; j < S; ++j) m.at({k, i, j}) = kMaskedScore;
    return m;
}

inline Tensor valid_multiplier(const std::vector<std::vector<bool>>& valid_kt) {
    const std::size_t K = valid_kt.size();
    const std::size_t S = K ? valid_kt[0].size() : 0;
    Tensor m({K, S, 1}, 0.0);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t t = 0; t < S; ++t)
            if (valid_kt[k][t]) m.at({k, t, 0}) = 1.0;
    return m;
}

} // namespace detail

/// Encoder over the observed steps. `features` is K x T x C (slot-major),
/// `valid` is [slot][frame]; invalid frames are zeroed on entry, masked out
/// of attention, and zeroed on exit, so their contents never matter.
inline Var encode(const Var& features, const std::vector<long>& timestamps,
                  const std::vector<std::vector<bool>>& valid, const TransformerParams& p,
                  const TransformerConfig& cfg, Rng* drop_rng = nullptr) {
    cfg.validate();
    const std::size_t K = features.shape()[0], T = features.shape()[1];
    if (timestamps.size() != T) throw std::invalid_argument("encode: timestamp count mismatch");
    const Tensor vm = detail::valid_multiplier(valid);
    Var masked_in = mul(features, constant(vm));
    Var e = matmul(masked_in, p.embed_w) + p.embed_b;
    e = e + constant(positional_encoding_block(timestamps, cfg.embed_dim));
    e = mul(e, constant(vm));
    const Tensor mask = detail::key_mask(valid, T);
    for (const auto& layer : p.encoder) {
        Var a = multi_head_attention(e, e, mask, layer.self_attn, cfg.heads);
        e = layer_norm(e + dropout(a, cfg.dropout, drop_rng), layer.ln1);
        Var f = feed_forward(e, layer.ffn);
        e = layer_norm(e + dropout(f, cfg.dropout, drop_rng), layer.ln2);
    }
    (void)K;
    return mul(e, constant(vm));
}

/// Decoder over future steps: causal self-attention on embedded previous-step
/// velocities, cross-attention over encoder memory.
inline Var decode(const Var& memory, const std::vector<std::vector<bool>>& memory_valid,
                  const Var& inputs, const std::vector<long>& timestamps,
                  const TransformerParams& p, const TransformerConfig& cfg,
                  Rng* drop_rng = nullptr) {
    cfg.validate();
    const std::size_t K = inputs.shape()[0], P = inputs.shape()[1];
    if (timestamps.size() != P) throw std::invalid_argument("decode: timestamp count mismatch");
    Var e = matmul(inputs, p.dec_embed_w) + p.dec_embed_b;
    e = e + constant(positional_encoding_block(timestamps, cfg.embed_dim));
    const Tensor self_mask = detail::causal_mask(K, P);
    const Tensor cross_mask = detail::key_mask(memory_valid, P);
    for (const auto& layer : p.decoder) {
        Var a = multi_head_attention(e, e, self_mask, layer.self_attn, cfg.heads);
        e = layer_norm(e + dropout(a, cfg.dropout, drop_rng), layer.ln1);
        Var c = multi_head_attention(e, memory, cross_mask, layer.cross_attn, cfg.heads);
        e = layer_norm(e + dropout(c, cfg.dropout, drop_rng), layer.ln2);
        Var f = feed_forward(e, layer.ffn);
        e = layer_norm(e + dropout(f, cfg.dropout, drop_rng), layer.ln3);
    }
    return e;
}

} // namespace sgtn
