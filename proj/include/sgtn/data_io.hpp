#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "rng.hpp"
#include "trajectory.hpp"

namespace sgtn {

struct TableRow {
    long frame = 0;
    long agent = 0;
    double x = 0.0, y = 0.0;
    AgentClass cls = AgentClass::unknown;
};

struct TrajectoryTable {
    std::string name;
    std::vector<TableRow> rows; // sorted by (frame, agent)

    void sort_and_check() {
        std::sort(rows.begin(), rows.end(), [](const TableRow& a, const TableRow& b) {
            return a.frame != b.frame ? a.frame < b.frame : a.agent < b.agent;
        });
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (rows[i].frame == rows[i - 1].frame && rows[i].agent == rows[i - 1].agent)
                throw std::invalid_argument("table " + name + ": duplicate (frame, agent) = (" +
                                            std::to_string(rows[i].frame) + ", " +
                                            std::to_string(rows[i].agent) + ")");
    }

    std::vector<long> frames() const {
        std::vector<long> f;
        for (const auto& r : rows)
            if (f.empty() || f.back() != r.frame) f.push_back(r.frame);
        return f; // rows are frame-sorted
    }
};

enum class TableFormat { whitespace4, ngsim_csv, apollo };

inline TableFormat parse_table_format(const std::string& s) {
    if (s == "whitespace4") return TableFormat::whitespace4;
    if (s == "ngsim-csv") return TableFormat::ngsim_csv;
    if (s == "apollo") return TableFormat::apollo;
    throw std::invalid_argument("unknown table format: " + s);
}

/// Apollo class codes; a config table rather than a hard-coded rule.
inline const std::map<long, AgentClass>& apollo_class_map() {
    static const std::map<long, AgentClass> m = {{1, AgentClass::vehicle},
                                                 {2, AgentClass::vehicle},
                                                 {3, AgentClass::pedestrian},
                                                 {4, AgentClass::bicyclist}};
    return m;
}

constexpr double kFeetToMeters = 0.3048;

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

[[noreturn]] inline void row_error(const std::string& path, std::size_t line_no,
                                   const std::string& what) {
    throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": " + what);
}

inline void check_monotone_frames(const TrajectoryTable& t) {
    std::map<long, long> last;
    for (const auto& r : t.rows) {
        auto it = last.find(r.agent);
        if (it != last.end() && r.frame <= it->second)
            throw std::invalid_argument("table " + t.name + ": non-monotone frames for agent " +
                                        std::to_string(r.agent));
        last[r.agent] = r.frame;
    }
}

} // namespace detail

/// whitespace4: "frame id x y" per line. apollo: "frame id class x y [...]"
/// with the class-code table above. ngsim-csv: header names Vehicle_ID,
/// Frame_ID, Local_X, Local_Y; feet converted to meters and every other
/// frame kept (10 Hz -> 5 Hz).
inline TrajectoryTable load_table(const std::string& path, TableFormat format) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    TrajectoryTable t;
    t.name = path;
    std::string line;
    std::size_t line_no = 0;

    if (format == TableFormat::ngsim_csv) {
        if (!std::getline(in, line)) detail::row_error(path, 1, "missing CSV header");
        ++line_no;
        const auto header = detail::split_csv(line);
        long ci = -1, cf = -1, cx = -1, cy = -1;
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == "Vehicle_ID") ci = static_cast<long>(i);
            else if (header[i] == "Frame_ID") cf = static_cast<long>(i);
            else if (header[i] == "Local_X") cx = static_cast<long>(i);
            else if (header[i] == "Local_Y") cy = static_cast<long>(i);
        }
        if (ci < 0 || cf < 0 || cx < 0 || cy < 0)
            detail::row_error(path, 1, "header must name Vehicle_ID, Frame_ID, Local_X, Local_Y");
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            const auto cols = detail::split_csv(line);
            const long need = std::max(std::max(ci, cf), std::max(cx, cy));
            if (static_cast<long>(cols.size()) <= need)
                detail::row_error(path, line_no, "too few columns");
            TableRow r;
            try {
                r.agent = std::stol(cols[static_cast<std::size_t>(ci)]);
                r.frame = std::stol(cols[static_cast<std::size_t>(cf)]);
                r.x = std::stod(cols[static_cast<std::size_t>(cx)]) * kFeetToMeters;
                r.y = std::stod(cols[static_cast<std::size_t>(cy)]) * kFeetToMeters;
            } catch (const std::exception&) {
                detail::row_error(path, line_no, "malformed numeric field");
            }
            r.cls = AgentClass::vehicle;
            t.rows.push_back(r);
        }
        t.sort_and_check();
        detail::check_monotone_frames(t);
        // keep every other frame of the recording
        const auto fs = t.frames();
        std::set<long> keep;
        for (std::size_t i = 0; i < fs.size(); i += 2) keep.insert(fs[i]);
        std::vector<TableRow> kept;
        for (auto& r : t.rows)
            if (keep.count(r.frame)) kept.push_back(r);
        t.rows = std::move(kept);
        return t;
    }

    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        TableRow r;
        if (format == TableFormat::whitespace4) {
            if (!(ss >> r.frame >> r.agent >> r.x >> r.y))
                detail::row_error(path, line_no, "expected: frame id x y");
        } else { // apollo
            long code;
            if (!(ss >> r.frame >> r.agent >> code >> r.x >> r.y))
                detail::row_error(path, line_no, "expected: frame id class x y");
            const auto& cm = apollo_class_map();
            auto it = cm.find(code);
            r.cls = it == cm.end() ? AgentClass::unknown : it->second;
        }
        t.rows.push_back(r);
    }
    t.sort_and_check();
    detail::check_monotone_frames(t);
    return t;
}

/// Exact whitespace4 round trip (shortest round-trip float formatting).
inline void write_table(const TrajectoryTable& t, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot write " + path);
    out.precision(17);
    for (const auto& r : t.rows) out << r.frame << ' ' << r.agent << ' ' << r.x << ' ' << r.y << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

/// Sliding windows over consecutive recorded frames. Agents must be present
/// in at least two observed frames; future availability goes in the mask.
inline std::vector<TrajectoryWindow> window(const TrajectoryTable& t, std::size_t t_obs,
                                            std::size_t t_pred, std::size_t stride = 1) {
    if (t_obs < 2 || t_pred < 1 || stride < 1)
        throw std::invalid_argument("window: need T_obs >= 2, T_pred >= 1, stride >= 1");
    const auto frames = t.frames();
    const std::size_t span = t_obs + t_pred;
    std::vector<TrajectoryWindow> out;
    if (frames.size() < span) return out;

    // (frame index, agent) lookup
    std::map<long, std::size_t> frame_index;
    for (std::size_t i = 0; i < frames.size(); ++i) frame_index[frames[i]] = i;
    std::map<std::pair<std::size_t, long>, const TableRow*> cell;
    for (const auto& r : t.rows) cell[{frame_index.at(r.frame), r.agent}] = &r;

    for (std::size_t start = 0; start + span <= frames.size(); start += stride) {
        std::map<long, std::size_t> obs_count;
        std::map<long, AgentClass> cls;
        for (std::size_t i = 0; i < span; ++i) {
            for (auto it = cell.lower_bound({start + i, std::numeric_limits<long>::min()});
                 it != cell.end() && it->first.first == start + i; ++it) {
                if (i < t_obs) ++obs_count[it->first.second];
                cls[it->first.second] = it->second->cls;
            }
        }
        TrajectoryWindow w;
        for (const auto& [agent, n] : obs_count)
            if (n >= 2) {
                w.agent_ids.push_back(agent);
                w.agent_classes.push_back(cls[agent]);
            }
        if (w.agent_ids.empty()) continue;
        const std::size_t N = w.agent_ids.size();
        w.obs_frames.assign(frames.begin() + static_cast<long>(start),
                            frames.begin() + static_cast<long>(start + t_obs));
        w.fut_frames.assign(frames.begin() + static_cast<long>(start + t_obs),
                            frames.begin() + static_cast<long>(start + span));
        w.obs_pos.assign(t_obs, std::vector<std::array<double, 2>>(N, {0.0, 0.0}));
        w.obs_present.assign(t_obs, std::vector<bool>(N, false));
        w.fut_pos.assign(t_pred, std::vector<std::array<double, 2>>(N, {0.0, 0.0}));
        w.fut_present.assign(t_pred, std::vector<bool>(N, false));
        for (std::size_t a = 0; a < N; ++a) {
            for (std::size_t i = 0; i < span; ++i) {
                auto it = cell.find({start + i, w.agent_ids[a]});
                if (it == cell.end()) continue;
                if (i < t_obs) {
                    w.obs_pos[i][a] = {it->second->x, it->second->y};
                    w.obs_present[i][a] = true;
                } else {
                    w.fut_pos[i - t_obs][a] = {it->second->x, it->second->y};
                    w.fut_present[i - t_obs][a] = true;
                }
            }
        }
        w.validate();
        out.push_back(std::move(w));
    }
    return out;
}

struct Split {
    std::vector<TrajectoryTable> train, val, test;
};

/// Leave-one-out by table name: the named table is the test set.
inline Split split_leave_one_out(const std::vector<TrajectoryTable>& tables,
                                 const std::string& test_name) {
    Split s;
    bool found = false;
    for (const auto& t : tables) {
        if (t.name == test_name) {
            s.test.push_back(t);
            found = true;
        } else {
            s.train.push_back(t);
        }
    }
    if (!found) throw std::invalid_argument("split: unknown dataset name " + test_name);
    s.val = s.train;
    return s;
}

/// Fractional split by contiguous frame segments of each table, never by
/// shuffled rows, so overlapping windows cannot leak across partitions.
/// Order within each table: train, then val, then test (the tail).
inline Split split_fraction(const std::vector<TrajectoryTable>& tables, double test_fraction,
                            double val_fraction) {
    if (test_fraction < 0 || val_fraction < 0 || test_fraction + val_fraction > 1.0)
        throw std::invalid_argument("split: bad fractions");
    Split s;
    for (const auto& t : tables) {
        const auto frames = t.frames();
        const std::size_t F = frames.size();
        const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(F)));
        const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(F)));
        const std::size_t n_train = F - n_test - n_val;
        TrajectoryTable tr, va, te;
        tr.name = t.name + "#train";
        va.name = t.name + "#val";
        te.name = t.name + "#test";
        std::map<long, std::size_t> fi;
        for (std::size_t i = 0; i < F; ++i) fi[frames[i]] = i;
        for (const auto& r : t.rows) {
            const std::size_t i = fi.at(r.frame);
            if (i < n_train) tr.rows.push_back(r);
            else if (i < n_train + n_val) va.rows.push_back(r);
            else te.rows.push_back(r);
        }
        s.train.push_back(std::move(tr));
        if (n_val > 0) s.val.push_back(std::move(va));
        if (n_test > 0) s.test.push_back(std::move(te));
    }
    if (s.val.empty()) s.val = s.train;
    return s;
}

enum class SynthScenario { solo_linear, parallel_pair, opposing_pair, crossing, crowd };

inline SynthScenario parse_synth_scenario(const std::string& s) {
    if (s == "solo-linear") return SynthScenario::solo_linear;
    if (s == "parallel-pair") return SynthScenario::parallel_pair;
    if (s == "opposing-pair") return SynthScenario::opposing_pair;
    if (s == "crossing") return SynthScenario::crossing;
    if (s == "crowd") return SynthScenario::crowd;
    throw std::invalid_argument("unknown synthetic scenario: " + s);
}

struct SynthOptions {
    std::size_t frames = 20;   // total frames generated
    std::size_t crowd_n = 8;   // agents for the crowd scenario, <= 20
    double clearance = 1.0;    // opposing-pair lateral avoidance peak, meters
    double speed = 0.6;        // meters per frame
    double repulse = 0.25;       // crowd pairwise push strength, meters per frame
    double repulse_range = 1.5;  // crowd push range, meters
    long frame0 = 0;
    long agent0 = 1;
};

/// Constant-velocity kinematics plus seeded Gaussian noise. The opposing
/// pair walks toward each other along x and clears by a smooth lateral arc
/// of peak `clearance`; clearance 0 makes the pair cross exactly.
inline TrajectoryTable synth(SynthScenario scenario, double noise_sigma, std::uint64_t seed,
                             const SynthOptions& opt = {}) {
    if (opt.crowd_n > 20) throw std::invalid_argument("synth: crowd size must be <= 20");
    if (opt.frames < 2) throw std::invalid_argument("synth: need at least 2 frames");
    Rng rng(seed ^ 0x73796e74ULL);
    TrajectoryTable t;
    t.name = "synth";
    const std::size_t F = opt.frames;
    const double mid = static_cast<double>(F - 1) / 2.0;

    struct AgentSpec {
        std::array<double, 2> start, vel;
        double arc = 0.0; // lateral arc sign * peak (opposing pair only)
    };
    std::vector<AgentSpec> agents;
    switch (scenario) {
        case SynthScenario::solo_linear:
            agents.push_back({{0.0, 0.0}, {opt.speed, 0.0}, 0.0});
            break;
        case SynthScenario::parallel_pair:
            agents.push_back({{0.0, 0.0}, {opt.speed, 0.0}, 0.0});
            agents.push_back({{0.0, 1.5}, {opt.speed, 0.0}, 0.0});
            break;
        case SynthScenario::opposing_pair: {
            const double reach = opt.speed * mid;
            // bump peak is 2*arc per agent, so the meeting-frame separation
            // (both at the same x) is exactly `clearance`
            agents.push_back({{-reach, 0.0}, {opt.speed, 0.0}, +opt.clearance / 4.0});
            agents.push_back({{+reach, 0.0}, {-opt.speed, 0.0}, -opt.clearance / 4.0});
            break;
        }
        case SynthScenario::crossing: {
            const double reach = opt.speed * mid;
            agents.push_back({{-reach, 0.4}, {opt.speed, 0.0}, 0.0});
            agents.push_back({{0.4, -reach}, {0.0, opt.speed}, 0.0});
            break;
        }
        case SynthScenario::crowd:
            for (std::size_t i = 0; i < opt.crowd_n; ++i) {
                const double ang = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
                const double sp = opt.speed * rng.uniform(0.6, 1.4);
                agents.push_back({{rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0)},
                                  {sp * std::cos(ang), sp * std::sin(ang)},
                                  0.0});
            }
            break;
    }

    // crowds integrate pairwise repulsion, so neighbor state shapes the
    // trajectories; the analytic scenarios stay closed-form
    std::vector<std::vector<std::array<double, 2>>> clean(F,
        std::vector<std::array<double, 2>>(agents.size()));
    if (scenario == SynthScenario::crowd) {
        std::vector<std::array<double, 2>> p(agents.size());
        for (std::size_t a = 0; a < agents.size(); ++a) p[a] = agents[a].start;
        for (std::size_t f = 0; f < F; ++f) {
            clean[f] = p;
            for (std::size_t a = 0; a < agents.size(); ++a) {
                double px = agents[a].vel[0], py = agents[a].vel[1];
                for (std::size_t b = 0; b < agents.size(); ++b) {
                    if (b == a) continue;
                    const double dx = p[a][0] - p[b][0], dy = p[a][1] - p[b][1];
                    const double d = std::hypot(dx, dy);
                    if (d > 1e-9 && d < opt.repulse_range) {
                        const double mag = opt.repulse * (1.0 - d / opt.repulse_range);
                        px += mag * dx / d;
                        py += mag * dy / d;
                    }
                }
                p[a][0] += px;
                p[a][1] += py;
            }
        }
    } else {
        for (std::size_t f = 0; f < F; ++f) {
            const double tt = static_cast<double>(f);
            for (std::size_t a = 0; a < agents.size(); ++a) {
                const auto& sp = agents[a];
                double x = sp.start[0] + sp.vel[0] * tt;
                double y = sp.start[1] + sp.vel[1] * tt;
                if (sp.arc != 0.0) {
                    // smooth bump peaking at the meeting frame, zero at the ends
                    const double u = (tt - mid) / mid;
                    y += sp.arc * (1.0 + std::cos(3.14159265358979323846 * u));
                }
                clean[f][a] = {x, y};
            }
        }
    }
    for (std::size_t f = 0; f < F; ++f)
        for (std::size_t a = 0; a < agents.size(); ++a) {
            TableRow r;
            r.frame = opt.frame0 + static_cast<long>(f);
            r.agent = opt.agent0 + static_cast<long>(a);
            r.x = clean[f][a][0] + (noise_sigma > 0.0 ? noise_sigma * rng.normal() : 0.0);
            r.y = clean[f][a][1] + (noise_sigma > 0.0 ? noise_sigma * rng.normal() : 0.0);
            r.cls = AgentClass::pedestrian;
            t.rows.push_back(r);
        }
    t.sort_and_check();
    return t;
}

/// Content hash of a table (FNV-1a over the canonical text form).
inline std::uint64_t table_fingerprint(const TrajectoryTable& t) {
    std::ostringstream ss;
    ss.precision(17);
    for (const auto& r : t.rows)
        ss << r.frame << ' ' << r.agent << ' ' << r.x << ' ' << r.y << ' '
           << agent_class_name(r.cls) << '\n';
    const std::string s = ss.str();
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace sgtn
