// Command-line surface: train / eval / predict / plot / synth.

#include <CLI11.hpp>
#include <iostream>

#include <sgtn/sgtn.hpp>

namespace {

using namespace sgtn;

struct ProtocolPreset {
    std::size_t t_obs, t_pred, samples;
    double frames_per_second;
};

ProtocolPreset protocol_preset(const std::string& name) {
    if (name == "pedestrian") return {8, 12, 20, 2.5};
    if (name == "vehicle") return {15, 25, 6, 5.0};
    if (name == "apollo") return {6, 6, 1, 2.0};
    throw std::invalid_argument("unknown protocol: " + name);
}

struct CommonArgs {
    std::string config_path, data_path, format = "whitespace4", protocol;
    std::string checkpoint_path, out_path;
    long samples = -1;
    long seed = -1;
    std::string attention_mode;
    bool no_spatial = false, no_temporal = false;
    double nce_lambda = -1.0;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool needs_data) {
    cmd->add_option("--config", a.config_path, "configuration file (key = value lines)");
    auto* d = cmd->add_option("--data", a.data_path, "trajectory table path");
    if (needs_data) d->required();
    cmd->add_option("--format", a.format, "table format: whitespace4 | ngsim-csv | apollo");
    cmd->add_option("--protocol", a.protocol, "preset: pedestrian | vehicle | apollo");
    cmd->add_option("--samples", a.samples, "samples per agent for multimodal evaluation");
    cmd->add_option("--seed", a.seed, "random seed");
    cmd->add_option("--checkpoint", a.checkpoint_path, "checkpoint path");
    cmd->add_option("--out", a.out_path, "output path");
    cmd->add_option("--attention-mode", a.attention_mode, "off | dense | sparse");
    cmd->add_flag("--no-spatial", a.no_spatial, "ablation: identity adjacency");
    cmd->add_flag("--no-temporal", a.no_temporal, "ablation: 1x1 temporal kernel");
    cmd->add_option("--nce-lambda", a.nce_lambda, "contrastive loss weight (0 disables)");
}

Config merged_config(const CommonArgs& a) {
    Config c;
    if (!a.config_path.empty()) c = Config::load(a.config_path);
    if (!a.protocol.empty()) {
        const auto p = protocol_preset(a.protocol);
        c.set("t_obs", std::to_string(p.t_obs));
        c.set("t_pred", std::to_string(p.t_pred));
        if (!c.has("samples")) c.set("samples", std::to_string(p.samples));
        c.set("frames_per_second", std::to_string(p.frames_per_second));
    }
    if (a.samples >= 0) c.set("samples", std::to_string(a.samples));
    if (a.seed >= 0) c.set("seed", std::to_string(a.seed));
    if (!a.attention_mode.empty()) c.set("attention_mode", a.attention_mode);
    if (a.no_spatial) c.set("no_spatial", "true");
    if (a.no_temporal) c.set("no_temporal", "true");
    if (a.nce_lambda >= 0.0) c.set("nce_lambda", std::to_string(a.nce_lambda));
    return c;
}

ModelConfig model_config(const Config& c) {
    ModelConfig m;
    m.slots = static_cast<std::size_t>(c.get_long("slots", 8));
    m.t_obs = static_cast<std::size_t>(c.get_long("t_obs", 8));
    m.t_pred = static_cast<std::size_t>(c.get_long("t_pred", 12));
    m.attention_mode = parse_attention_mode(c.get("attention_mode", "off"));
    m.attention_raw_qk = c.get_bool("attention_raw_qk", false);
    m.attn_dk = static_cast<std::size_t>(c.get_long("attn_dk", 8));
    m.sstgcn.layers = static_cast<std::size_t>(c.get_long("sstgcn_layers", 1));
    m.sstgcn.no_spatial = c.get_bool("no_spatial", false);
    m.sstgcn.no_temporal = c.get_bool("no_temporal", false);
    m.sstgcn.activation_tanh = c.get("activation", "tanh") == "tanh";
    m.tx.heads = static_cast<std::size_t>(c.get_long("tx_heads", 4));
    m.tx.layers = static_cast<std::size_t>(c.get_long("tx_layers", 6));
    m.tx.embed_dim = static_cast<std::size_t>(c.get_long("tx_embed_dim", 8));
    m.tx.ffn_dim = static_cast<std::size_t>(c.get_long("tx_ffn_dim", 32));
    m.tx.dropout = c.get_double("tx_dropout", 0.1);
    m.literal_normalization = c.get_bool("literal_normalization", false);
    m.nce.lambda = c.get_double("nce_lambda", 1.0);
    m.nce.temperature = c.get_double("nce_temperature", 0.1);
    m.nce.radius = c.get_double("nce_radius", 0.2);
    m.nce.samples_per_frame = static_cast<std::size_t>(c.get_long("nce_samples_per_frame", 4));
    m.nce.dim = static_cast<std::size_t>(c.get_long("nce_dim", 8));
    return m;
}

TrainConfig train_config(const Config& c) {
    TrainConfig t;
    t.lr = c.get_double("lr", 1e-3);
    t.beta1 = c.get_double("beta1", 0.9);
    t.beta2 = c.get_double("beta2", 0.999);
    t.eps = c.get_double("eps", 1e-8);
    t.clip_norm = c.get_double("clip_norm", 1.0);
    t.batch_size = static_cast<std::size_t>(c.get_long("batch_size", 1));
    t.epochs = static_cast<std::size_t>(c.get_long("epochs", 30));
    t.eval_every = static_cast<std::size_t>(c.get_long("eval_every", 1));
    t.seed = static_cast<std::uint64_t>(c.get_long("seed", 1));
    return t;
}

std::vector<TrajectoryWindow> load_windows(const CommonArgs& a, const Config& c,
                                           const ModelConfig& m, std::uint64_t* fingerprint) {
    const TrajectoryTable t = load_table(a.data_path, parse_table_format(a.format));
    if (fingerprint) *fingerprint = table_fingerprint(t);
    const auto stride = static_cast<std::size_t>(c.get_long("window_stride", 1));
    return window(t, m.t_obs, m.t_pred, stride);
}

int cmd_synth(const CommonArgs& a, const std::string& scenario, double noise, long frames,
              long crowd_n, double clearance) {
    const Config c = merged_config(a);
    SynthOptions opt;
    if (frames > 0) opt.frames = static_cast<std::size_t>(frames);
    if (crowd_n > 0) opt.crowd_n = static_cast<std::size_t>(crowd_n);
    opt.clearance = clearance;
    const auto seed = static_cast<std::uint64_t>(c.get_long("seed", 1));
    const TrajectoryTable t = synth(parse_synth_scenario(scenario), noise, seed, opt);
    if (a.out_path.empty()) throw std::invalid_argument("synth: --out required");
    write_table(t, a.out_path);
    std::cout << "wrote " << t.rows.size() << " rows to " << a.out_path << "\n";
    return 0;
}

int cmd_train(const CommonArgs& a) {
    const Config c = merged_config(a);
    const ModelConfig mc = model_config(c);
    const TrainConfig tc = train_config(c);
    Model model(mc, tc.seed);
    std::uint64_t fp = 0;
    auto windows = load_windows(a, c, mc, &fp);
    if (windows.empty()) throw std::invalid_argument("train: no windows in " + a.data_path);
    const double val_fraction = c.get_double("val_fraction", 0.1);
    const auto n_val = static_cast<std::size_t>(val_fraction * static_cast<double>(windows.size()));
    std::vector<TrajectoryWindow> val(windows.end() - static_cast<long>(n_val), windows.end());
    windows.resize(windows.size() - n_val);
    RunManifest mf = train(model, windows, val, tc);
    mf.config_echo = c.echo();
    mf.data_fingerprint = fp;
    if (!a.checkpoint_path.empty()) save_checkpoint(model.parameters(), a.checkpoint_path);
    if (!a.out_path.empty()) mf.write(a.out_path);
    std::cout << "trained " << mf.steps.size() << " steps, final total "
              << (mf.steps.empty() ? 0.0 : mf.steps.back().total) << "\n";
    if (!mf.epochs.empty() && mf.epochs.back().val_ade >= 0.0)
        std::cout << "val ADE " << mf.epochs.back().val_ade << " FDE " << mf.epochs.back().val_fde
                  << "\n";
    return 0;
}

Model restored_model(const CommonArgs& a, const Config& c, const ModelConfig& mc) {
    Model model(mc, static_cast<std::uint64_t>(c.get_long("seed", 1)));
    if (!a.checkpoint_path.empty()) load_checkpoint(model.parameters(), a.checkpoint_path);
    return model;
}

int cmd_eval(const CommonArgs& a) {
    const Config c = merged_config(a);
    const ModelConfig mc = model_config(c);
    Model model = restored_model(a, c, mc);
    const auto windows = load_windows(a, c, mc, nullptr);
    if (windows.empty()) throw std::invalid_argument("eval: no windows in " + a.data_path);
    const auto samples = static_cast<std::size_t>(c.get_long("samples", 20));
    const auto seed = static_cast<std::uint64_t>(c.get_long("seed", 1));
    const std::string protocol = a.protocol.empty() ? "pedestrian" : a.protocol;
    const double fps = c.get_double("frames_per_second", protocol_preset(protocol).frames_per_second);

    MetricsReport report;
    report.config_echo = "protocol " + protocol + ", samples " + std::to_string(samples);
    if (protocol == "apollo") {
        // direct mean-trajectory prediction, class-weighted errors
        double sum_a[4] = {0, 0, 0, 0}, sum_f[4] = {0, 0, 0, 0};
        std::size_t cnt_a[4] = {0, 0, 0, 0}, cnt_f[4] = {0, 0, 0, 0};
        for (const auto& w : windows) {
            const GaussianFieldValue f = model.predict(w);
            std::vector<std::array<double, 2>> anchors(w.n_agents());
            for (std::size_t ag = 0; ag < w.n_agents(); ++ag)
                anchors[ag] = last_observed_position(w, ag);
            const Tensor pred = mean_trajectory(f, anchors);
            const Tensor gt = window_gt(w);
            for (std::size_t ag = 0; ag < w.n_agents(); ++ag) {
                const auto cls = static_cast<std::size_t>(w.agent_classes[ag]);
                double s = 0.0;
                std::size_t k = 0;
                for (std::size_t t = 0; t < w.t_pred(); ++t)
                    if (w.fut_present[t][ag]) {
                        const double dx = pred.at({ag, t, 0}) - gt.at({ag, t, 0});
                        const double dy = pred.at({ag, t, 1}) - gt.at({ag, t, 1});
                        s += std::hypot(dx, dy);
                        ++k;
                    }
                if (k) {
                    sum_a[cls] += s / static_cast<double>(k);
                    ++cnt_a[cls];
                }
                const std::size_t last = w.t_pred() - 1;
                if (w.fut_present[last][ag]) {
                    const double dx = pred.at({ag, last, 0}) - gt.at({ag, last, 0});
                    const double dy = pred.at({ag, last, 1}) - gt.at({ag, last, 1});
                    sum_f[cls] += std::hypot(dx, dy);
                    ++cnt_f[cls];
                }
            }
        }
        const auto cls_mean = [](const double* s, const std::size_t* n, AgentClass c) {
            const auto i = static_cast<std::size_t>(c);
            if (n[i] == 0) throw std::invalid_argument("apollo eval: missing class");
            return s[i] / static_cast<double>(n[i]);
        };
        const double av = cls_mean(sum_a, cnt_a, AgentClass::vehicle);
        const double ap = cls_mean(sum_a, cnt_a, AgentClass::pedestrian);
        const double ab = cls_mean(sum_a, cnt_a, AgentClass::bicyclist);
        const double fv = cls_mean(sum_f, cnt_f, AgentClass::vehicle);
        const double fpd = cls_mean(sum_f, cnt_f, AgentClass::pedestrian);
        const double fb = cls_mean(sum_f, cnt_f, AgentClass::bicyclist);
        const WeightedSums ws = weighted_sums(av, ap, ab, fv, fpd, fb);
        report.add("ADEv", av, cnt_a[1]);
        report.add("ADEp", ap, cnt_a[2]);
        report.add("ADEb", ab, cnt_a[3]);
        report.add("FDEv", fv, cnt_f[1]);
        report.add("FDEp", fpd, cnt_f[2]);
        report.add("FDEb", fb, cnt_f[3]);
        report.add("WSADE", ws.wsade, windows.size());
        report.add("WSFDE", ws.wsfde, windows.size());
    } else if (protocol == "vehicle") {
        // best-of-N per agent by ADE, then RMSE per horizon
        std::vector<Tensor> preds, gts;
        std::vector<StepMask> masks;
        for (std::size_t wi = 0; wi < windows.size(); ++wi) {
            const auto& w = windows[wi];
            const auto mp = model.predict_multimodal(w, samples, seed + wi);
            const Tensor gt = window_gt(w);
            const StepMask mask = window_future_mask(w);
            Tensor best = mp.samples[0];
            for (std::size_t ag = 0; ag < w.n_agents(); ++ag) {
                double best_err = -1.0;
                std::size_t best_s = 0;
                for (std::size_t si = 0; si < mp.samples.size(); ++si) {
                    double s = 0.0;
                    for (std::size_t t = 0; t < w.t_pred(); ++t)
                        if (mask[t][ag]) {
                            const double dx =
                                mp.samples[si].at({ag, t, 0}) - gt.at({ag, t, 0});
                            const double dy =
                                mp.samples[si].at({ag, t, 1}) - gt.at({ag, t, 1});
                            s += std::hypot(dx, dy);
                        }
                    if (best_err < 0.0 || s < best_err) {
                        best_err = s;
                        best_s = si;
                    }
                }
                for (std::size_t t = 0; t < w.t_pred(); ++t) {
                    best.at({ag, t, 0}) = mp.samples[best_s].at({ag, t, 0});
                    best.at({ag, t, 1}) = mp.samples[best_s].at({ag, t, 1});
                }
            }
            preds.push_back(std::move(best));
            gts.push_back(gt);
            masks.push_back(mask);
        }
        const auto rmse = rmse_per_horizon(preds, gts, masks, fps);
        for (std::size_t h = 0; h < rmse.size(); ++h)
            report.add("RMSE@" + std::to_string(h + 1) + "s", rmse[h], preds.size());
    } else {
        Model& m = model;
        const BestOfN b = evaluate_best_of(m, windows, samples, seed);
        std::vector<Tensor> mean_preds;
        std::vector<StepMask> masks;
        for (const auto& w : windows) {
            const GaussianFieldValue f = m.predict(w);
            std::vector<std::array<double, 2>> anchors(w.n_agents());
            for (std::size_t ag = 0; ag < w.n_agents(); ++ag)
                anchors[ag] = last_observed_position(w, ag);
            mean_preds.push_back(mean_trajectory(f, anchors));
            masks.push_back(window_future_mask(w));
        }
        report.add("ADE", b.ade, windows.size());
        report.add("FDE", b.fde, windows.size());
        bool multi = false;
        for (const auto& w : windows) multi = multi || w.n_agents() >= 2;
        if (multi)
            report.add("COL", col(mean_preds, masks, c.get_double("col_threshold", 0.2),
                                  c.get_bool("col_per_pair", false)),
                       windows.size());
    }
    std::cout << report.text();
    if (!a.out_path.empty()) report.write_kv(a.out_path);
    return 0;
}

int cmd_predict(const CommonArgs& a) {
    const Config c = merged_config(a);
    const ModelConfig mc = model_config(c);
    Model model = restored_model(a, c, mc);
    const auto windows = load_windows(a, c, mc, nullptr);
    if (windows.empty()) throw std::invalid_argument("predict: no windows in " + a.data_path);
    const auto samples = static_cast<std::size_t>(c.get_long("samples", 20));
    const auto seed = static_cast<std::uint64_t>(c.get_long("seed", 1));
    if (a.out_path.empty()) throw std::invalid_argument("predict: --out required");
    std::ofstream out(a.out_path);
    if (!out) throw std::invalid_argument("cannot write " + a.out_path);
    out.precision(17);
    for (std::size_t wi = 0; wi < windows.size(); ++wi) {
        const auto& w = windows[wi];
        const auto mp = model.predict_multimodal(w, samples, seed + wi);
        for (std::size_t si = 0; si < mp.samples.size(); ++si)
            for (std::size_t t = 0; t < w.t_pred(); ++t)
                for (std::size_t ag = 0; ag < w.n_agents(); ++ag) {
                    if (!mp.included[ag]) continue;
                    out << w.fut_frames[t] << ' ' << w.agent_ids[ag] << ' ' << si << ' '
                        << mp.samples[si].at({ag, t, 0}) << ' ' << mp.samples[si].at({ag, t, 1})
                        << '\n';
                }
    }
    std::cout << "wrote predictions for " << windows.size() << " windows to " << a.out_path << "\n";
    return 0;
}

int cmd_plot(const CommonArgs& a) {
    const Config c = merged_config(a);
    const ModelConfig mc = model_config(c);
    Model model = restored_model(a, c, mc);
    const auto windows = load_windows(a, c, mc, nullptr);
    if (windows.empty()) throw std::invalid_argument("plot: no windows in " + a.data_path);
    const auto samples = static_cast<std::size_t>(c.get_long("samples", 20));
    const auto seed = static_cast<std::uint64_t>(c.get_long("seed", 1));
    const auto index = static_cast<std::size_t>(c.get_long("window_index", 0));
    if (index >= windows.size()) throw std::invalid_argument("plot: window index out of range");
    if (a.out_path.empty()) throw std::invalid_argument("plot: --out required");
    const auto mp = model.predict_multimodal(windows[index], samples, seed);
    write_window_svg(windows[index], mp.samples, a.out_path);
    std::cout << "wrote " << a.out_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Attention-aware social graph transformer trajectory predictor"};
    app.require_subcommand(1);

    CommonArgs ta, ea, pa, la, sa;
    auto* train_cmd = app.add_subcommand("train", "train a model");
    add_common(train_cmd, ta, true);
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval_cmd, ea, true);
    auto* predict_cmd = app.add_subcommand("predict", "write sampled trajectories");
    add_common(predict_cmd, pa, true);
    auto* plot_cmd = app.add_subcommand("plot", "render a window to SVG");
    add_common(plot_cmd, la, true);

    std::string scenario = "solo-linear";
    double noise = 0.0, clearance = 1.0;
    long frames = 20, crowd_n = 8;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic table");
    add_common(synth_cmd, sa, false);
    synth_cmd->add_option("--scenario", scenario,
                          "solo-linear | parallel-pair | opposing-pair | crossing | crowd");
    synth_cmd->add_option("--noise", noise, "position noise sigma, meters");
    synth_cmd->add_option("--frames", frames, "frames to generate");
    synth_cmd->add_option("--crowd-n", crowd_n, "agents in the crowd scenario");
    synth_cmd->add_option("--clearance", clearance, "opposing-pair meeting separation, meters");

    try {
        app.parse(argc, argv);
        if (train_cmd->parsed()) return cmd_train(ta);
        if (eval_cmd->parsed()) return cmd_eval(ea);
        if (predict_cmd->parsed()) return cmd_predict(pa);
        if (plot_cmd->parsed()) return cmd_plot(la);
        if (synth_cmd->parsed()) return cmd_synth(sa, scenario, noise, frames, crowd_n, clearance);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
