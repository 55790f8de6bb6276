#pragma once

#include <cstdint>
#include <functional>
#include <random>

#include "tatu/types.hpp"

namespace tatu {

// 2-D double integrator: state (px, py, vx, vy), action = bounded acceleration.
// Reward is the negative distance of the next position to the goal.
struct PointMassEnv {
    double action_bound = 1.0;
    double dt = 0.1;
    double noise_scale = 0.0;  // Gaussian noise on the velocity update
    double start_range = 2.0;  // start positions uniform in [-start_range, start_range]^2
    Eigen::Vector2d goal{2.0, 2.0};
    int horizon = 100;

    static constexpr int state_dim = 4;
    static constexpr int action_dim = 2;

    EnvDescriptor descriptor() const;

    Vec reset(std::mt19937_64& rng) const;
    Vec clip_action(const Vec& a) const;
    // Deterministic part of the dynamics given a pre-clipped action and noise sample.
    Vec step_state(const Vec& s, const Vec& a, const Vec& noise) const;
    Vec step_state(const Vec& s, const Vec& a, std::mt19937_64& rng) const;
    double reward(const Vec& s_next) const;
};

// Behavior policy: maps state to action, drawing from a caller-owned stream.
using ContinuousPolicy = std::function<Vec(const Vec& s, std::mt19937_64& rng)>;

// Quality tiers standing in for D4RL's random / medium / expert datasets.
ContinuousPolicy pointmass_random_policy(const PointMassEnv& env);
ContinuousPolicy pointmass_medium_policy(const PointMassEnv& env);
ContinuousPolicy pointmass_expert_policy(const PointMassEnv& env);
ContinuousPolicy pointmass_policy_by_tier(const PointMassEnv& env, const std::string& tier);

Dataset collect_dataset(const PointMassEnv& env, const ContinuousPolicy& policy,
                        std::size_t n_transitions, std::uint64_t seed,
                        const std::string& behavior_tag = "");

}  // namespace tatu
