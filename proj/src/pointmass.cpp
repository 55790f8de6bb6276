#include "tatu/pointmass.hpp"

#include <cmath>

#include "tatu/rng.hpp"

namespace tatu {

EnvDescriptor PointMassEnv::descriptor() const {
    EnvDescriptor d;
    d.env_id = "pointmass";
    d.state_dim = state_dim;
    d.action_dim = action_dim;
    d.action_bound = action_bound;
    return d;
}

Vec PointMassEnv::reset(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(-start_range, start_range);
    Vec s = Vec::Zero(state_dim);
    s[0] = u(rng);
    s[1] = u(rng);
    return s;
}

Vec PointMassEnv::clip_action(const Vec& a) const {
    return a.cwiseMax(-action_bound).cwiseMin(action_bound);
}

Vec PointMassEnv::step_state(const Vec& s, const Vec& a, const Vec& noise) const {
    if (s.size() != state_dim || a.size() != action_dim)
        throw ParameterError("PointMassEnv::step_state: dimension mismatch");
    Vec act = clip_action(a);
    Vec s_next(state_dim);
    s_next[2] = s[2] + dt * act[0] + noise_scale * noise[0];
    s_next[3] = s[3] + dt * act[1] + noise_scale * noise[1];
    s_next[0] = s[0] + dt * s_next[2];
    s_next[1] = s[1] + dt * s_next[3];
    return s_next;
}

Vec PointMassEnv::step_state(const Vec& s, const Vec& a, std::mt19937_64& rng) const {
    Vec noise = Vec::Zero(2);
    if (noise_scale > 0.0) {
        std::normal_distribution<double> n(0.0, 1.0);
        noise[0] = n(rng);
        noise[1] = n(rng);
    }
    return step_state(s, a, noise);
}

double PointMassEnv::reward(const Vec& s_next) const {
    return -std::hypot(s_next[0] - goal[0], s_next[1] - goal[1]);
}

ContinuousPolicy pointmass_random_policy(const PointMassEnv& env) {
    const double bound = env.action_bound;
    return [bound](const Vec&, std::mt19937_64& rng) {
        std::uniform_real_distribution<double> u(-bound, bound);
        Vec a(2);
        a[0] = u(rng);
        a[1] = u(rng);
        return a;
    };
}

namespace {

// PD controller toward the goal with tunable gains and exploration noise.
ContinuousPolicy pd_policy(const PointMassEnv& env, double kp, double kd, double sigma) {
    const Eigen::Vector2d goal = env.goal;
    const double bound = env.action_bound;
    return [goal, bound, kp, kd, sigma](const Vec& s, std::mt19937_64& rng) -> Vec {
        Vec a(2);
        a[0] = kp * (goal[0] - s[0]) - kd * s[2];
        a[1] = kp * (goal[1] - s[1]) - kd * s[3];
        if (sigma > 0.0) {
            std::normal_distribution<double> n(0.0, sigma);
            a[0] += n(rng);
            a[1] += n(rng);
        }
        return a.cwiseMax(-bound).cwiseMin(bound);
    };
}

}  // namespace

ContinuousPolicy pointmass_medium_policy(const PointMassEnv& env) {
    return pd_policy(env, 0.4, 0.6, 0.4);
}

ContinuousPolicy pointmass_expert_policy(const PointMassEnv& env) {
    return pd_policy(env, 1.2, 1.8, 0.05);
}

ContinuousPolicy pointmass_policy_by_tier(const PointMassEnv& env, const std::string& tier) {
    if (tier == "random") return pointmass_random_policy(env);
    if (tier == "medium") return pointmass_medium_policy(env);
    if (tier == "expert") return pointmass_expert_policy(env);
    throw ParameterError("unknown behavior tier: " + tier);
}

Dataset collect_dataset(const PointMassEnv& env, const ContinuousPolicy& policy,
                        std::size_t n_transitions, std::uint64_t seed,
                        const std::string& behavior_tag) {
    if (n_transitions < 1) throw ParameterError("collect_dataset: n_transitions must be >= 1");
    auto rng = make_rng(seed);
    Dataset ds;
    ds.env = env.descriptor();
    ds.behavior_tag = behavior_tag;
    ds.transitions.reserve(n_transitions);

    Vec s = env.reset(rng);
    int t = 0;
    while (ds.transitions.size() < n_transitions) {
        Vec a = env.clip_action(policy(s, rng));
        Vec s_next = env.step_state(s, a, rng);
        ++t;
        const bool done = (t >= env.horizon);
        ds.transitions.push_back({s, a, env.reward(s_next), s_next, done});
        if (done) {
            s = env.reset(rng);
            t = 0;
        } else {
            s = s_next;
        }
    }
    ds.start_state_pool.resize(ds.transitions.size());
    for (std::size_t i = 0; i < ds.transitions.size(); ++i) ds.start_state_pool[i] = i;
    return ds;
}

}  // namespace tatu
