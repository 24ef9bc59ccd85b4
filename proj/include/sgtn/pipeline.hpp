#pragma once

#include <iostream>
#include <optional>

#include "attention_adjacency.hpp"
#include "checkpoint.hpp"
#include "gaussian_head.hpp"
#include "social_graph.hpp"
#include "sstgcn.hpp"
#include "transformer.hpp"

namespace sgtn {

struct NceConfig {
    double lambda = 1.0;      // 0 disables the loss exactly
    double temperature = 0.1;
    double radius = 0.2;      // collision zone, meters
    std::size_t samples_per_frame = 4;
    std::size_t dim = 8;      // contrast embedding width
};

struct ModelConfig {
    std::size_t slots = 8; // K
    std::size_t t_obs = 8;
    std::size_t t_pred = 12;
    AttentionMode attention_mode = AttentionMode::off;
    bool attention_raw_qk = false;
    std::size_t attn_dk = 8;
    SstgcnConfig sstgcn;
    TransformerConfig tx;
    NceConfig nce;
    bool literal_normalization = false;
    bool force_attention_ones = false; // diagnostic: dense mode with attn == 1
    std::size_t feature_dim = 5;       // SSTGCN output channels

    void validate() const {
        if (slots < 1 || t_obs < 1 || t_pred < 1)
            throw std::invalid_argument("model config: K, T_obs, T_pred must be >= 1");
        tx.validate();
        if (cfg_channels() < 5) throw std::invalid_argument("model config: feature dim must be >= 5");
    }
    std::size_t cfg_channels() const { return feature_dim; }
};

/// Per-window teacher-forcing targets: per-step ground-truth displacements
/// and their validity (both endpoints present).
struct FutureTargets {
    Tensor velocity;                     // N x P x 2
    std::vector<std::vector<bool>> valid; // [agent][step]
};

inline FutureTargets future_targets(const TrajectoryWindow& w) {
    const std::size_t N = w.n_agents(), P = w.t_pred(), T = w.t_obs();
    FutureTargets ft;
    ft.velocity = Tensor({N, P, 2}, 0.0);
    ft.valid.assign(N, std::vector<bool>(P, false));
    for (std::size_t a = 0; a < N; ++a) {
        for (std::size_t j = 0; j < P; ++j) {
            if (!w.fut_present[j][a]) continue;
            std::array<double, 2> prev;
            if (j == 0) {
                if (!w.obs_present[T - 1][a]) continue;
                prev = w.obs_pos[T - 1][a];
            } else {
                if (!w.fut_present[j - 1][a]) continue;
                prev = w.fut_pos[j - 1][a];
            }
            ft.velocity.at({a, j, 0}) = w.fut_pos[j][a][0] - prev[0];
            ft.velocity.at({a, j, 1}) = w.fut_pos[j][a][1] - prev[1];
            ft.valid[a][j] = true;
        }
    }
    return ft;
}

inline std::array<double, 2> last_observed_position(const TrajectoryWindow& w, std::size_t agent) {
    for (std::size_t t = w.t_obs(); t-- > 0;)
        if (w.obs_present[t][agent]) return w.obs_pos[t][agent];
    throw std::logic_error("agent never observed");
}

struct LossParts {
    Var total, nll, nce;
    double valid_steps = 0.0; // slot-steps contributing to the NLL mean
};

struct MultimodalPrediction {
    std::vector<Tensor> samples;    // each N x P x 2 absolute positions
    std::vector<bool> included;     // agent present at frame T_obs
    GaussianFieldValue field;       // per-agent N x P x {2,2,1}
};

/// The full Attention-aware Social Graph Transformer model: graph
/// construction, pseudo-images, optional adjacency attention, SSTGCN,
/// transformer extrapolation and the bivariate-Gaussian head.
class Model {
public:
    explicit Model(ModelConfig cfg, std::uint64_t init_seed = 1) : cfg_(std::move(cfg)) {
        cfg_.validate();
        Rng rng(init_seed ^ 0x5347544eULL);
        build_parameters(rng);
    }

    const ModelConfig& config() const { return cfg_; }
    ParameterStore& parameters() { return store_; }
    const ParameterStore& parameters() const { return store_; }

    /// Teacher-forced training loss over one window (mean NLL over valid
    /// slot-steps, plus lambda-scaled Social-NCE).
    LossParts loss(const TrajectoryWindow& w, Rng* drop_rng = nullptr) {
        check_window(w);
        const FutureTargets ft = future_targets(w);
        const SpatioTemporalGraph graph = build_graph(w, cfg_.literal_normalization);
        const auto images = pseudo_images(graph, cfg_.slots);
        warn_if_grouped(images.size());

        Var nll_sum = constant(0.0);
        double nll_count = 0.0;
        std::vector<Var> agent_queries(w.n_agents());

        for (const auto& im : images) {
            Var memory = front_end(im, drop_rng);
            Var hidden = decode_teacher(memory, im, ft, drop_rng);
            GaussianField field = project_gaussian(hidden, head_w_, head_b_);

            const std::size_t K = cfg_.slots, P = cfg_.t_pred;
            Tensor targets({K, P, 2}, 0.0);
            Tensor mask({K, P, 1}, 0.0);
            for (std::size_t s = 0; s < K; ++s) {
                const long a = im.slot_agent[s];
                if (a < 0) continue;
                for (std::size_t j = 0; j < P; ++j) {
                    if (!ft.valid[a][j]) continue;
                    targets.at({s, j, 0}) = ft.velocity.at({static_cast<std::size_t>(a), j, 0});
                    targets.at({s, j, 1}) = ft.velocity.at({static_cast<std::size_t>(a), j, 1});
                    mask.at({s, j, 0}) = 1.0;
                    nll_count += 1.0;
                }
            }
            bool any = false;
            for (std::size_t i = 0; i < mask.size(); ++i) any = any || mask[i] > 0.0;
            if (any) nll_sum = nll_sum + nll_masked_sum(field, targets, mask);

            if (cfg_.nce.lambda != 0.0) {
                Var queries = nce_queries(memory, im);
                for (std::size_t s = 0; s < K; ++s) {
                    const long a = im.slot_agent[s];
                    if (a >= 0) agent_queries[a] = reshape(slice(queries, 0, s, 1), {cfg_.nce.dim});
                }
            }
        }
        if (nll_count == 0.0) throw std::invalid_argument("loss: no valid future steps in window");
        Var nll = nll_sum / nll_count;
        Var nce = cfg_.nce.lambda != 0.0 ? nce_loss(w, agent_queries) : constant(0.0);
        return {total_loss(nll, nce, cfg_.nce.lambda), nll, nce, nll_count};
    }

    /// Autoregressive forward: each future step consumes the previous step's
    /// Gaussian mean displacement. Returns the per-agent field.
    GaussianFieldValue predict(const TrajectoryWindow& w) {
        check_window(w, /*need_future=*/false);
        const SpatioTemporalGraph graph = build_graph(w, cfg_.literal_normalization);
        const auto images = pseudo_images(graph, cfg_.slots);
        warn_if_grouped(images.size());

        const std::size_t N = w.n_agents(), P = cfg_.t_pred;
        GaussianFieldValue out{Tensor({N, P, 2}), Tensor({N, P, 2}, 1.0), Tensor({N, P, 1})};
        for (const auto& im : images) {
            const GaussianFieldValue f = autoregressive_field(im);
            for (std::size_t s = 0; s < cfg_.slots; ++s) {
                const long a = im.slot_agent[s];
                if (a < 0) continue;
                for (std::size_t j = 0; j < P; ++j) {
                    out.mu.at({static_cast<std::size_t>(a), j, 0}) = f.mu.at({s, j, 0});
                    out.mu.at({static_cast<std::size_t>(a), j, 1}) = f.mu.at({s, j, 1});
                    out.sigma.at({static_cast<std::size_t>(a), j, 0}) = f.sigma.at({s, j, 0});
                    out.sigma.at({static_cast<std::size_t>(a), j, 1}) = f.sigma.at({s, j, 1});
                    out.rho.at({static_cast<std::size_t>(a), j, 0}) = f.rho.at({s, j, 0});
                }
            }
        }
        return out;
    }

    /// Best-of-N style multimodal prediction: n sampled future trajectories
    /// per agent, deterministic for a fixed seed.
    MultimodalPrediction predict_multimodal(const TrajectoryWindow& w, std::size_t n_samples,
                                            std::uint64_t seed) {
        if (n_samples < 1) throw std::invalid_argument("predict_multimodal: n must be >= 1");
        MultimodalPrediction mp;
        mp.field = predict(w);
        std::vector<std::array<double, 2>> anchors(w.n_agents());
        mp.included.assign(w.n_agents(), false);
        for (std::size_t a = 0; a < w.n_agents(); ++a) {
            anchors[a] = last_observed_position(w, a);
            mp.included[a] = w.obs_present[w.t_obs() - 1][a];
        }
        Rng rng = Rng(seed).split(0x73616d70ULL);
        mp.samples = sample_trajectories(mp.field, anchors, n_samples, rng);
        return mp;
    }

    /// Teacher-forced per-agent field (used by tests and direct protocols).
    GaussianFieldValue forward_teacher(const TrajectoryWindow& w) {
        check_window(w);
        const FutureTargets ft = future_targets(w);
        const SpatioTemporalGraph graph = build_graph(w, cfg_.literal_normalization);
        const auto images = pseudo_images(graph, cfg_.slots);
        const std::size_t N = w.n_agents(), P = cfg_.t_pred;
        GaussianFieldValue out{Tensor({N, P, 2}), Tensor({N, P, 2}, 1.0), Tensor({N, P, 1})};
        for (const auto& im : images) {
            Var memory = front_end(im, nullptr);
            Var hidden = decode_teacher(memory, im, ft, nullptr);
            const GaussianFieldValue f = field_value(project_gaussian(hidden, head_w_, head_b_));
            for (std::size_t s = 0; s < cfg_.slots; ++s) {
                const long a = im.slot_agent[s];
                if (a < 0) continue;
                for (std::size_t j = 0; j < P; ++j) {
                    out.mu.at({static_cast<std::size_t>(a), j, 0}) = f.mu.at({s, j, 0});
                    out.mu.at({static_cast<std::size_t>(a), j, 1}) = f.mu.at({s, j, 1});
                    out.sigma.at({static_cast<std::size_t>(a), j, 0}) = f.sigma.at({s, j, 0});
                    out.sigma.at({static_cast<std::size_t>(a), j, 1}) = f.sigma.at({s, j, 1});
                    out.rho.at({static_cast<std::size_t>(a), j, 0}) = f.rho.at({s, j, 0});
                }
            }
        }
        return out;
    }

private:
    void check_window(const TrajectoryWindow& w, bool need_future = true) const {
        w.validate();
        if (w.n_agents() < 1) throw std::invalid_argument("model: window has no agents");
        if (w.t_obs() != cfg_.t_obs)
            throw std::invalid_argument("model: window T_obs does not match config");
        if (need_future && w.t_pred() != cfg_.t_pred)
            throw std::invalid_argument("model: window T_pred does not match config");
    }

    void warn_if_grouped(std::size_t groups) const {
        if (groups > 1)
            std::cerr << "[sgtn] window exceeds K=" << cfg_.slots << " slots; " << groups
                      << " interception groups predicted independently\n";
    }

    static Tensor uniform_init(Rng& rng, std::vector<std::size_t> shape, std::size_t fan_in) {
        Tensor t(shape);
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
        return t;
    }

    Var linear_w(Rng& rng, const std::string& name, std::size_t in, std::size_t out) {
        return store_.add(name, uniform_init(rng, {in, out}, in));
    }
    Var bias0(const std::string& name, std::size_t n) { return store_.add(name, Tensor({n}, 0.0)); }

    AttentionBlock make_attention(Rng& rng, const std::string& prefix, std::size_t D) {
        AttentionBlock b;
        b.wq = linear_w(rng, prefix + ".wq", D, D);
        b.bq = bias0(prefix + ".bq", D);
        b.wk = linear_w(rng, prefix + ".wk", D, D);
        b.bk = bias0(prefix + ".bk", D);
        b.wv = linear_w(rng, prefix + ".wv", D, D);
        b.bv = bias0(prefix + ".bv", D);
        b.wo = linear_w(rng, prefix + ".wo", D, D);
        b.bo = bias0(prefix + ".bo", D);
        return b;
    }

    LayerNormParams make_ln(const std::string& prefix, std::size_t D) {
        return {store_.add(prefix + ".gain", Tensor({D}, 1.0)),
                store_.add(prefix + ".bias", Tensor({D}, 0.0))};
    }

    FfnParams make_ffn(Rng& rng, const std::string& prefix, std::size_t D, std::size_t F) {
        return {linear_w(rng, prefix + ".w1", D, F), bias0(prefix + ".b1", F),
                linear_w(rng, prefix + ".w2", F, D), bias0(prefix + ".b2", D)};
    }

    void build_parameters(Rng& rng) {
        const std::size_t K = cfg_.slots, D = cfg_.tx.embed_dim, C = cfg_.feature_dim;
        if (cfg_.attention_mode != AttentionMode::off && !cfg_.attention_raw_qk) {
            attn_.wq = linear_w(rng, "attn.wq", K, cfg_.attn_dk);
            attn_.wk = linear_w(rng, "attn.wk", K, cfg_.attn_dk);
        }
        attn_.raw_qk = cfg_.attention_raw_qk;

        for (std::size_t l = 0; l < cfg_.sstgcn.layers; ++l) {
            const std::size_t cin = l == 0 ? 2 : C;
            const std::size_t ht = cfg_.sstgcn.no_temporal ? 1 : 3;
            SstgcnLayer layer;
            layer.cin = cin;
            layer.cout = C;
            const std::string p = "sstgcn.l" + std::to_string(l);
            layer.ws = store_.add(p + ".ws", uniform_init(rng, {1, 1, cin, C}, cin));
            layer.bs = bias0(p + ".bs", C);
            layer.wt = store_.add(p + ".wt", uniform_init(rng, {ht, 1, C, C}, ht * C));
            layer.bt = bias0(p + ".bt", C);
            if (cin != C) layer.wr = store_.add(p + ".wr", uniform_init(rng, {1, 1, cin, C}, cin));
            sstgcn_layers_.push_back(layer);
        }

        tx_.embed_w = linear_w(rng, "tx.embed.w", C, D);
        tx_.embed_b = bias0("tx.embed.b", D);
        tx_.dec_embed_w = linear_w(rng, "tx.dec_embed.w", 2, D);
        tx_.dec_embed_b = bias0("tx.dec_embed.b", D);
        for (std::size_t l = 0; l < cfg_.tx.layers; ++l) {
            const std::string pe = "tx.enc" + std::to_string(l);
            EncoderLayerParams el;
            el.self_attn = make_attention(rng, pe + ".self", D);
            el.ln1 = make_ln(pe + ".ln1", D);
            el.ffn = make_ffn(rng, pe + ".ffn", D, cfg_.tx.ffn_dim);
            el.ln2 = make_ln(pe + ".ln2", D);
            tx_.encoder.push_back(el);
            const std::string pd = "tx.dec" + std::to_string(l);
            DecoderLayerParams dl;
            dl.self_attn = make_attention(rng, pd + ".self", D);
            dl.ln1 = make_ln(pd + ".ln1", D);
            dl.cross_attn = make_attention(rng, pd + ".cross", D);
            dl.ln2 = make_ln(pd + ".ln2", D);
            dl.ffn = make_ffn(rng, pd + ".ffn", D, cfg_.tx.ffn_dim);
            dl.ln3 = make_ln(pd + ".ln3", D);
            tx_.decoder.push_back(dl);
        }

        head_w_ = linear_w(rng, "head.w", D, 5);
        head_b_ = bias0("head.b", 5);

        nce_query_w_ = linear_w(rng, "nce.query.w", D, cfg_.nce.dim);
        nce_query_b_ = bias0("nce.query.b", cfg_.nce.dim);
        nce_key_w_ = linear_w(rng, "nce.key.w", 2, cfg_.nce.dim);
        nce_key_b_ = bias0("nce.key.b", cfg_.nce.dim);
    }

    std::vector<std::vector<bool>> slot_valid(const PseudoImage& im) const {
        const std::size_t T = im.valid.size(), K = cfg_.slots;
        std::vector<std::vector<bool>> v(K, std::vector<bool>(T, false));
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t s = 0; s < K; ++s) v[s][t] = im.valid[t][s];
        return v;
    }

    /// Pseudo-image -> attention-aware adjacency -> SSTGCN -> encoder memory.
    Var front_end(const PseudoImage& im, Rng* drop_rng) {
        Var a = constant(im.a_block);
        if (cfg_.force_attention_ones && cfg_.attention_mode == AttentionMode::dense) {
            a = mul(constant(Tensor(im.a_block.shape(), 1.0)), a);
        } else {
            a = attn_.apply(a, cfg_.attention_mode);
        }
        Var feats = sstgcn_forward(constant(im.v_block), a, sstgcn_layers_, cfg_.sstgcn);
        Var slot_major = permute(feats, {1, 0, 2}); // K x T x C
        std::vector<long> ts(cfg_.t_obs);
        for (std::size_t t = 0; t < cfg_.t_obs; ++t) ts[t] = static_cast<long>(t);
        return encode(slot_major, ts, slot_valid(im), tx_, cfg_.tx, drop_rng);
    }

    std::vector<long> future_timestamps() const {
        std::vector<long> ts(cfg_.t_pred);
        for (std::size_t j = 0; j < cfg_.t_pred; ++j)
            ts[j] = static_cast<long>(cfg_.t_obs + j);
        return ts;
    }

    Var decode_teacher(const Var& memory, const PseudoImage& im, const FutureTargets& ft,
                       Rng* drop_rng) {
        const std::size_t K = cfg_.slots, P = cfg_.t_pred;
        Tensor dec_in({K, P, 2}, 0.0); // step 0 is the zero-velocity start token
        for (std::size_t s = 0; s < K; ++s) {
            const long a = im.slot_agent[s];
            if (a < 0) continue;
            for (std::size_t j = 1; j < P; ++j) {
                if (!ft.valid[a][j - 1]) continue;
                dec_in.at({s, j, 0}) = ft.velocity.at({static_cast<std::size_t>(a), j - 1, 0});
                dec_in.at({s, j, 1}) = ft.velocity.at({static_cast<std::size_t>(a), j - 1, 1});
            }
        }
        return decode(memory, slot_valid(im), constant(std::move(dec_in)), future_timestamps(),
                      tx_, cfg_.tx, drop_rng);
    }

    GaussianFieldValue autoregressive_field(const PseudoImage& im) {
        const std::size_t K = cfg_.slots, P = cfg_.t_pred;
        Var memory = front_end(im, nullptr);
        const auto valid = slot_valid(im);
        const auto ts_all = future_timestamps();
        GaussianFieldValue out{Tensor({K, P, 2}), Tensor({K, P, 2}, 1.0), Tensor({K, P, 1})};
        Tensor dec_in({K, P, 2}, 0.0);
        for (std::size_t j = 0; j < P; ++j) {
            Tensor step_in({K, j + 1, 2});
            for (std::size_t s = 0; s < K; ++s)
                for (std::size_t i = 0; i <= j; ++i) {
                    step_in.at({s, i, 0}) = dec_in.at({s, i, 0});
                    step_in.at({s, i, 1}) = dec_in.at({s, i, 1});
                }
            std::vector<long> ts(ts_all.begin(), ts_all.begin() + static_cast<long>(j) + 1);
            Var hidden = decode(memory, valid, constant(std::move(step_in)), ts, tx_, cfg_.tx, nullptr);
            Var last = slice(hidden, 1, j, 1);
            const GaussianFieldValue f = field_value(project_gaussian(last, head_w_, head_b_));
            for (std::size_t s = 0; s < K; ++s) {
                out.mu.at({s, j, 0}) = f.mu.at({s, 0, 0});
                out.mu.at({s, j, 1}) = f.mu.at({s, 0, 1});
                out.sigma.at({s, j, 0}) = f.sigma.at({s, 0, 0});
                out.sigma.at({s, j, 1}) = f.sigma.at({s, 0, 1});
                out.rho.at({s, j, 0}) = f.rho.at({s, 0, 0});
                if (j + 1 < P) {
                    dec_in.at({s, j + 1, 0}) = f.mu.at({s, 0, 0});
                    dec_in.at({s, j + 1, 1}) = f.mu.at({s, 0, 1});
                }
            }
        }
        return out;
    }

    /// Masked NLL sum (not mean) so multi-image windows combine correctly.
    static Var nll_masked_sum(const GaussianField& f, const Tensor& targets, const Tensor& mask) {
        double count = 0.0;
        for (std::size_t i = 0; i < mask.size(); ++i) count += mask[i];
        return nll_loss(f, targets, mask) * count;
    }

    /// Mean-pooled encoder memory per slot, projected to the contrast space.
    Var nce_queries(const Var& memory, const PseudoImage& im) {
        const std::size_t K = cfg_.slots, T = cfg_.t_obs;
        Tensor vm({K, T, 1}, 0.0);
        Tensor counts({K, 1}, 1.0);
        for (std::size_t s = 0; s < K; ++s) {
            double c = 0.0;
            for (std::size_t t = 0; t < T; ++t)
                if (im.valid[t][s]) {
                    vm.at({s, t, 0}) = 1.0;
                    c += 1.0;
                }
            if (c > 0.0) counts.at({s, 0}) = c;
        }
        Var pooled = sum(mul(memory, constant(vm)), 1) / constant(counts); // K x D
        return matmul(pooled, nce_query_w_) + nce_query_b_;               // K x E
    }

    /// Social-NCE over interpolated sub-frame samples: per agent and
    /// sub-frame, the ground-truth point contrasts against other agents'
    /// collision-zone points; mean over contrast instances.
    Var nce_loss(const TrajectoryWindow& w, const std::vector<Var>& queries) {
        const std::size_t N = w.n_agents(), P = w.t_pred(), T = w.t_obs();
        const std::size_t Q = cfg_.nce.samples_per_frame;
        // interpolated sample points per agent, [agent][sample] with validity
        std::vector<std::vector<std::array<double, 2>>> pts(N);
        std::vector<std::vector<bool>> ok(N);
        for (std::size_t a = 0; a < N; ++a) {
            pts[a].assign(P * Q, {0.0, 0.0});
            ok[a].assign(P * Q, false);
            for (std::size_t j = 0; j < P; ++j) {
                if (!w.fut_present[j][a]) continue;
                std::array<double, 2> prev;
                if (j == 0) {
                    if (!w.obs_present[T - 1][a]) continue;
                    prev = w.obs_pos[T - 1][a];
                } else {
                    if (!w.fut_present[j - 1][a]) continue;
                    prev = w.fut_pos[j - 1][a];
                }
                for (std::size_t q = 0; q < Q; ++q) {
                    const double f = static_cast<double>(q + 1) / static_cast<double>(Q);
                    pts[a][j * Q + q] = {prev[0] + f * (w.fut_pos[j][a][0] - prev[0]),
                                         prev[1] + f * (w.fut_pos[j][a][1] - prev[1])};
                    ok[a][j * Q + q] = true;
                }
            }
        }
        Var acc = constant(0.0);
        std::size_t terms = 0;
        for (std::size_t a = 0; a < N; ++a) {
            if (!queries[a].valid()) continue;
            const auto anchor = last_observed_position(w, a);
            for (std::size_t s = 0; s < P * Q; ++s) {
                if (!ok[a][s]) continue;
                std::vector<double> rows;
                rows.push_back(pts[a][s][0] - anchor[0]);
                rows.push_back(pts[a][s][1] - anchor[1]);
                std::size_t negatives = 0;
                for (std::size_t b = 0; b < N; ++b) {
                    if (b == a || !ok[b][s]) continue;
                    rows.push_back(pts[b][s][0] - anchor[0]);
                    rows.push_back(pts[b][s][1] - anchor[1]);
                    ++negatives;
                }
                if (negatives == 0) continue;
                Tensor pm({negatives + 1, 2}, std::move(rows));
                Var keys = matmul(constant(std::move(pm)), nce_key_w_) + nce_key_b_;
                acc = acc + info_nce_term(queries[a], keys, 0, cfg_.nce.temperature);
                ++terms;
            }
        }
        if (terms == 0) return constant(0.0);
        return acc / static_cast<double>(terms);
    }

    ModelConfig cfg_;
    ParameterStore store_;
    AdjacencyAttention attn_;
    std::vector<SstgcnLayer> sstgcn_layers_;
    TransformerParams tx_;
    Var head_w_, head_b_;
    Var nce_query_w_, nce_query_b_, nce_key_w_, nce_key_b_;
};

} // namespace sgtn
