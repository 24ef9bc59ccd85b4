#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgtn {

enum class AgentClass { unknown, vehicle, pedestrian, bicyclist };

inline const char* agent_class_name(AgentClass c) {
    switch (c) {
        case AgentClass::vehicle: return "vehicle";
        case AgentClass::pedestrian: return "pedestrian";
        case AgentClass::bicyclist: return "bicyclist";
        default: return "unknown";
    }
}

/// Fixed-length frame sequence of agent positions with per-frame presence
/// masks; the unit of training and evaluation. Agents are kept in ascending
/// id order and must be present in at least 2 observed frames.
struct TrajectoryWindow {
    std::vector<long> obs_frames;   // uniform stride
    std::vector<long> fut_frames;   // may be empty (prediction-only use)
    std::vector<long> agent_ids;    // ascending
    std::vector<AgentClass> agent_classes;

    // [t][a], positions meaningful only where present
    std::vector<std::vector<std::array<double, 2>>> obs_pos;
    std::vector<std::vector<bool>> obs_present;
    std::vector<std::vector<std::array<double, 2>>> fut_pos;
    std::vector<std::vector<bool>> fut_present;

    std::size_t t_obs() const { return obs_frames.size(); }
    std::size_t t_pred() const { return fut_frames.size(); }
    std::size_t n_agents() const { return agent_ids.size(); }

    void validate() const {
        if (t_obs() < 1) throw std::invalid_argument("window: T_obs must be >= 1");
        if (obs_pos.size() != t_obs() || obs_present.size() != t_obs())
            throw std::invalid_argument("window: observed block size mismatch");
        if (fut_pos.size() != t_pred() || fut_present.size() != t_pred())
            throw std::invalid_argument("window: future block size mismatch");
        for (std::size_t i = 1; i < agent_ids.size(); ++i)
            if (agent_ids[i] <= agent_ids[i - 1])
                throw std::invalid_argument("window: agent ids must be strictly ascending");
        for (std::size_t a = 0; a < n_agents(); ++a) {
            std::size_t present = 0;
            for (std::size_t t = 0; t < t_obs(); ++t)
                if (obs_present[t][a]) ++present;
            if (present < 2)
                throw std::invalid_argument("window: agent " + std::to_string(agent_ids[a]) +
                                            " present in fewer than 2 observed frames");
        }
    }
};

} // namespace sgtn
