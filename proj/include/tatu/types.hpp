#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace tatu {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Transition {
    Vec s;
    Vec a;
    double r = 0.0;
    Vec s_next;
    bool done = false;
};

struct EnvDescriptor {
    std::string env_id;      // "tabular" | "pointmass"
    int state_dim = 0;       // 1 for tabular (state index stored as a 1-d vector)
    int action_dim = 0;
    double action_bound = 0.0;  // 0 for discrete actions
    int n_states = 0;           // tabular only
    int n_actions = 0;          // tabular only

    bool operator==(const EnvDescriptor&) const = default;
};

// The offline dataset D_env.
struct Dataset {
    std::vector<Transition> transitions;
    EnvDescriptor env;
    std::string behavior_tag;
    std::vector<std::size_t> start_state_pool;  // indices usable as rollout starts

    std::size_t size() const { return transitions.size(); }
    bool empty() const { return transitions.empty(); }
};

struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Normalized score per the D4RL convention.
inline double normalized_score(double j_pi, double j_random, double j_expert) {
    if (j_expert == j_random)
        throw ParameterError("normalized_score: degenerate reference, J_expert == J_random");
    return (j_pi - j_random) / (j_expert - j_random) * 100.0;
}

}  // namespace tatu
