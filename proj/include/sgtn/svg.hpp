#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <vector>

#include "tensor.hpp"
#include "trajectory.hpp"

namespace sgtn {

/// Self-contained SVG of one window: observed tracks solid, ground truth
/// dashed, sampled predictions as faint overlays whose stacking shows
/// sample density.
inline std::string render_window_svg(const TrajectoryWindow& w, const std::vector<Tensor>& samples,
                                     double size_px = 640.0) {
    const std::size_t N = w.n_agents();
    double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
    const auto grow = [&](double x, double y) {
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
    };
    for (std::size_t t = 0; t < w.t_obs(); ++t)
        for (std::size_t a = 0; a < N; ++a)
            if (w.obs_present[t][a]) grow(w.obs_pos[t][a][0], w.obs_pos[t][a][1]);
    for (std::size_t t = 0; t < w.t_pred(); ++t)
        for (std::size_t a = 0; a < N; ++a)
            if (w.fut_present[t][a]) grow(w.fut_pos[t][a][0], w.fut_pos[t][a][1]);
    for (const auto& s : samples)
        for (std::size_t a = 0; a < s.extent(0); ++a)
            for (std::size_t t = 0; t < s.extent(1); ++t) grow(s.at({a, t, 0}), s.at({a, t, 1}));
    if (min_x > max_x) {
        min_x = min_y = -1.0;
        max_x = max_y = 1.0;
    }
    const double pad = 0.05 * std::max(max_x - min_x, max_y - min_y) + 0.5;
    min_x -= pad;
    max_x += pad;
    min_y -= pad;
    max_y += pad;
    const double scale = size_px / std::max(max_x - min_x, max_y - min_y);
    const auto px = [&](double x) { return (x - min_x) * scale; };
    const auto py = [&](double y) { return size_px - (y - min_y) * scale; };

    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    const auto color = [&](std::size_t a) { return palette[a % 8]; };

    std::ostringstream ss;
    ss.precision(6);
    ss << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size_px << "\" height=\""
       << size_px << "\" viewBox=\"0 0 " << size_px << " " << size_px << "\">\n";
    ss << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    const auto polyline = [&](const std::vector<std::array<double, 2>>& pts, const char* stroke,
                              double width, double opacity, bool dashed) {
        if (pts.size() < 2) return;
        ss << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << width
           << "\" stroke-opacity=\"" << opacity << "\"";
        if (dashed) ss << " stroke-dasharray=\"6 4\"";
        ss << " points=\"";
        for (const auto& p : pts) ss << px(p[0]) << "," << py(p[1]) << " ";
        ss << "\"/>\n";
    };

    // sampled predictions first so observed/gt draw on top
    for (const auto& s : samples)
        for (std::size_t a = 0; a < s.extent(0); ++a) {
            std::vector<std::array<double, 2>> pts;
            for (std::size_t t = 0; t < s.extent(1); ++t)
                pts.push_back({s.at({a, t, 0}), s.at({a, t, 1})});
            polyline(pts, color(a), 1.0, 0.12, false);
        }
    for (std::size_t a = 0; a < N; ++a) {
        std::vector<std::array<double, 2>> obs, fut;
        for (std::size_t t = 0; t < w.t_obs(); ++t)
            if (w.obs_present[t][a]) obs.push_back(w.obs_pos[t][a]);
        for (std::size_t t = 0; t < w.t_pred(); ++t)
            if (w.fut_present[t][a]) fut.push_back(w.fut_pos[t][a]);
        if (!obs.empty() && !fut.empty()) fut.insert(fut.begin(), obs.back());
        polyline(obs, color(a), 2.5, 1.0, false);
        polyline(fut, color(a), 2.0, 0.9, true);
        if (!obs.empty())
            ss << "<circle cx=\"" << px(obs.back()[0]) << "\" cy=\"" << py(obs.back()[1])
               << "\" r=\"3.5\" fill=\"" << color(a) << "\"/>\n";
    }
    ss << "</svg>\n";
    return ss.str();
}

inline void write_window_svg(const TrajectoryWindow& w, const std::vector<Tensor>& samples,
                             const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot write " + path);
    out << render_window_svg(w, samples);
}

} // namespace sgtn
