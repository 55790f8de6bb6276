#pragma once

#include <cstdint>
#include <string>

#include "tatu/augment.hpp"
#include "tatu/cvae.hpp"
#include "tatu/ensemble.hpp"
#include "tatu/learner.hpp"

namespace tatu {

struct EnvConfig {
    std::string type = "pointmass";  // "pointmass" | "tabular"
    std::string tier = "medium";     // behavior quality for point-mass
    std::size_t n_transitions = 10000;
    double noise_scale = 0.0;
    // tabular only
    int n_states = 6;
    int n_actions = 3;
    double gamma = 0.99;
    double r_max = 1.0;
    int episode_len = 10;
};

struct LearnerConfig {
    std::string type = "td3bc";  // "td3bc" | "fitted_q"
    int steps = 2000;
    int fitted_q_iters = 200;
    Td3BcConfig td3bc;
};

struct SweepConfig {
    std::string param = "h";  // "h" | "alpha" | "eta"
    std::vector<double> grid{1, 3, 5, 7, 10};
};

// Studied grids; used when a sweep names a param but no grid.
std::vector<double> default_sweep_grid(const std::string& param);

// Every tunable across modules, flat sectioned. Unknown keys in the JSON form
// are rejected; `defaults` prints the fully resolved default instance.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    EnvConfig env;
    EnsembleConfig dynamics;
    TruncationConfig truncation;
    CvaeConfig cvae;
    AugmentationConfig augment;
    int augment_epochs = 1;
    LearnerConfig learner;
    SweepConfig sweep;

    void validate() const;

    std::string to_json() const;                       // fully resolved
    static RunConfig from_json(const std::string& text);
    static RunConfig load(const std::string& path);    // FileError / SchemaError
    void save(const std::string& path) const;
};

}  // namespace tatu
