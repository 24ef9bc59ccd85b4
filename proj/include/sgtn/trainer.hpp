#pragma once

#include <chrono>
#include <fstream>
#include <numeric>

#include "metrics.hpp"
#include "pipeline.hpp"

namespace sgtn {

/// Ground-truth future positions of a window as N x P x 2.
inline Tensor window_gt(const TrajectoryWindow& w) {
    const std::size_t N = w.n_agents(), P = w.t_pred();
    Tensor gt({N, P, 2});
    for (std::size_t t = 0; t < P; ++t)
        for (std::size_t a = 0; a < N; ++a) {
            gt.at({a, t, 0}) = w.fut_pos[t][a][0];
            gt.at({a, t, 1}) = w.fut_pos[t][a][1];
        }
    return gt;
}

inline StepMask window_future_mask(const TrajectoryWindow& w) { return w.fut_present; }

/// Constant-velocity baseline: repeat the displacement between the last two
/// present observed frames (scaled by the frame gap).
inline Tensor constant_velocity_prediction(const TrajectoryWindow& w, std::size_t t_pred) {
    const std::size_t N = w.n_agents(), T = w.t_obs();
    Tensor pred({N, t_pred, 2});
    for (std::size_t a = 0; a < N; ++a) {
        long last = -1, prev = -1;
        for (std::size_t t = T; t-- > 0;) {
            if (!w.obs_present[t][a]) continue;
            if (last < 0) last = static_cast<long>(t);
            else {
                prev = static_cast<long>(t);
                break;
            }
        }
        double vx = 0.0, vy = 0.0;
        std::array<double, 2> pos = {0.0, 0.0};
        if (last >= 0) pos = w.obs_pos[static_cast<std::size_t>(last)][a];
        if (prev >= 0) {
            const double gap = static_cast<double>(last - prev);
            vx = (pos[0] - w.obs_pos[static_cast<std::size_t>(prev)][a][0]) / gap;
            vy = (pos[1] - w.obs_pos[static_cast<std::size_t>(prev)][a][1]) / gap;
        }
        for (std::size_t t = 0; t < t_pred; ++t) {
            pos[0] += vx;
            pos[1] += vy;
            pred.at({a, t, 0}) = pos[0];
            pred.at({a, t, 1}) = pos[1];
        }
    }
    return pred;
}

struct TrainConfig {
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 1.0; // 0 disables clipping
    std::size_t batch_size = 1;
    std::size_t epochs = 30;
    std::size_t eval_every = 1; // epochs between validation passes
    std::uint64_t seed = 1;

    void validate() const {
        if (lr <= 0.0) throw std::invalid_argument("train config: step size must be > 0");
        if (clip_norm < 0.0) throw std::invalid_argument("train config: clip norm must be >= 0");
        if (batch_size < 1 || epochs < 1 || eval_every < 1)
            throw std::invalid_argument("train config: batch size, epochs, eval cadence >= 1");
    }
};

/// Adaptive-moment gradient descent with bias correction.
class Adam {
public:
    Adam(ParameterStore& store, const TrainConfig& cfg) : store_(store), cfg_(cfg) {
        for (const auto& p : store.items()) {
            m_.emplace_back(p.var.shape(), 0.0);
            v_.emplace_back(p.var.shape(), 0.0);
        }
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        auto& params = store_.items();
        if (cfg_.clip_norm > 0.0) {
            double sq = 0.0;
            for (auto& p : params)
                for (std::size_t i = 0; i < p.var.grad().size(); ++i)
                    sq += p.var.grad()[i] * p.var.grad()[i];
            const double norm = std::sqrt(sq);
            if (norm > cfg_.clip_norm) {
                const double scale = cfg_.clip_norm / norm;
                for (auto& p : params)
                    for (std::size_t i = 0; i < p.var.grad().size(); ++i) p.var.grad()[i] *= scale;
            }
        }
        for (std::size_t j = 0; j < params.size(); ++j) {
            Tensor& w = params[j].var.node()->value;
            const Tensor& g = params[j].var.grad();
            for (std::size_t i = 0; i < w.size(); ++i) {
                m_[j][i] = cfg_.beta1 * m_[j][i] + (1.0 - cfg_.beta1) * g[i];
                v_[j][i] = cfg_.beta2 * v_[j][i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                const double mh = m_[j][i] / bc1;
                const double vh = v_[j][i] / bc2;
                w[i] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
            }
        }
    }

private:
    ParameterStore& store_;
    TrainConfig cfg_;
    std::vector<Tensor> m_, v_;
    std::size_t t_ = 0;
};

struct StepLog {
    double nll = 0.0, nce = 0.0, total = 0.0;
};

struct EpochLog {
    double train_total = 0.0; // mean over steps
    double val_ade = -1.0, val_fde = -1.0;
};

struct RunManifest {
    std::string config_echo;
    std::uint64_t data_fingerprint = 0;
    std::size_t parameter_count = 0; // scalar parameters
    std::vector<StepLog> steps;
    std::vector<EpochLog> epochs;
    double wall_seconds = 0.0;

    /// Everything but the wall clock; reruns with the same config, data and
    /// seed reproduce this text exactly.
    std::string deterministic_text() const {
        std::ostringstream ss;
        ss.precision(17);
        ss << "config-begin\n" << config_echo << "config-end\n";
        ss << "data-fingerprint " << data_fingerprint << "\n";
        ss << "parameter-count " << parameter_count << "\n";
        for (std::size_t i = 0; i < steps.size(); ++i)
            ss << "step " << i << " nll " << steps[i].nll << " nce " << steps[i].nce << " total "
               << steps[i].total << "\n";
        for (std::size_t e = 0; e < epochs.size(); ++e) {
            ss << "epoch " << e << " train-total " << epochs[e].train_total;
            if (epochs[e].val_ade >= 0.0)
                ss << " val-ade " << epochs[e].val_ade << " val-fde " << epochs[e].val_fde;
            ss << "\n";
        }
        return ss.str();
    }

    void write(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::invalid_argument("cannot write " + path);
        out << deterministic_text();
        out.precision(6);
        out << "wall-seconds " << wall_seconds << "\n";
    }
};

/// Mean-trajectory ADE/FDE over a window set.
inline BestOfN evaluate_mean(Model& model, const std::vector<TrajectoryWindow>& windows) {
    if (windows.empty()) throw std::invalid_argument("evaluate: no windows");
    double ade_sum = 0.0, fde_sum = 0.0;
    std::size_t n = 0, nf = 0;
    for (const auto& w : windows) {
        const GaussianFieldValue f = model.predict(w);
        std::vector<std::array<double, 2>> anchors(w.n_agents());
        for (std::size_t a = 0; a < w.n_agents(); ++a) anchors[a] = last_observed_position(w, a);
        const Tensor pred = mean_trajectory(f, anchors);
        const Tensor gt = window_gt(w);
        const StepMask mask = window_future_mask(w);
        ade_sum += ade(pred, gt, mask);
        ++n;
        try {
            fde_sum += fde(pred, gt, mask);
            ++nf;
        } catch (const std::invalid_argument&) {
        }
    }
    return {ade_sum / static_cast<double>(n), nf ? fde_sum / static_cast<double>(nf) : 0.0};
}

/// Best-of-N sampled ADE/FDE over a window set.
inline BestOfN evaluate_best_of(Model& model, const std::vector<TrajectoryWindow>& windows,
                                std::size_t n_samples, std::uint64_t seed,
                                bool independent_min = false) {
    if (windows.empty()) throw std::invalid_argument("evaluate: no windows");
    double ade_sum = 0.0, fde_sum = 0.0;
    std::size_t n = 0;
    for (std::size_t wi = 0; wi < windows.size(); ++wi) {
        const auto mp = model.predict_multimodal(windows[wi], n_samples, seed + wi);
        const BestOfN b = best_of_n(mp.samples, window_gt(windows[wi]),
                                    window_future_mask(windows[wi]), independent_min);
        ade_sum += b.ade;
        fde_sum += b.fde;
        ++n;
    }
    return {ade_sum / static_cast<double>(n), fde_sum / static_cast<double>(n)};
}

/// Deterministic training loop: seeded shuffling, loss weighted by valid
/// slot-steps within a batch, best-validation parameters restored at the end.
inline RunManifest train(Model& model, const std::vector<TrajectoryWindow>& train_windows,
                         const std::vector<TrajectoryWindow>& val_windows, const TrainConfig& cfg) {
    cfg.validate();
    if (train_windows.empty()) throw std::invalid_argument("train: empty training set");
    const auto t0 = std::chrono::steady_clock::now();

    Adam opt(model.parameters(), cfg);
    Rng shuffle_rng = Rng(cfg.seed).split(0x7368756659ULL);
    Rng drop_rng = Rng(cfg.seed).split(0x64726f70ULL);

    RunManifest mf;
    mf.parameter_count = model.parameters().total_elements();

    const double lambda = model.config().nce.lambda;
    std::vector<std::size_t> order(train_windows.size());
    std::iota(order.begin(), order.end(), 0);

    double best_val = -1.0;
    std::vector<Tensor> best_params;
    std::size_t global_step = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the seeded generator
        for (std::size_t i = order.size(); i-- > 1;) {
            const auto j = static_cast<std::size_t>(shuffle_rng.uniform() * static_cast<double>(i + 1));
            std::swap(order[i], order[std::min(j, i)]);
        }
        double epoch_total = 0.0;
        std::size_t epoch_steps = 0;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            model.parameters().zero_grad();
            Var nll_acc, nce_acc;
            double weight = 0.0;
            try {
                for (std::size_t i = b; i < std::min(b + cfg.batch_size, order.size()); ++i) {
                    LossParts lp = model.loss(train_windows[order[i]], &drop_rng);
                    Var wn = lp.nll * lp.valid_steps;
                    Var wc = lp.nce * lp.valid_steps;
                    nll_acc = nll_acc.valid() ? nll_acc + wn : wn;
                    nce_acc = nce_acc.valid() ? nce_acc + wc : wc;
                    weight += lp.valid_steps;
                }
                Var nll = nll_acc / weight;
                Var nce = nce_acc / weight;
                Var total = total_loss(nll, nce, lambda);
                if (!total.value().all_finite()) throw std::runtime_error("non-finite loss");
                backward(total);
                mf.steps.push_back({nll.value()[0], nce.value()[0], total.value()[0]});
                epoch_total += total.value()[0];
                ++epoch_steps;
            } catch (const std::runtime_error& e) {
                throw std::runtime_error("training diverged at step " +
                                         std::to_string(global_step) + ": " + e.what());
            }
            opt.step();
            ++global_step;
        }
        EpochLog el;
        el.train_total = epoch_steps ? epoch_total / static_cast<double>(epoch_steps) : 0.0;
        if (!val_windows.empty() && (epoch + 1) % cfg.eval_every == 0) {
            const BestOfN v = evaluate_mean(model, val_windows);
            el.val_ade = v.ade;
            el.val_fde = v.fde;
            if (best_val < 0.0 || v.ade < best_val) {
                best_val = v.ade;
                best_params.clear();
                for (const auto& p : model.parameters().items()) best_params.push_back(p.var.value());
            }
        }
        mf.epochs.push_back(el);
    }
    if (!best_params.empty()) {
        auto& items = model.parameters().items();
        for (std::size_t i = 0; i < items.size(); ++i)
            items[i].var.node()->value = best_params[i];
    }
    mf.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return mf;
}

} // namespace sgtn
