#pragma once

#include <cstdint>

#include "tatu/nn.hpp"
#include "tatu/pointmass.hpp"
#include "tatu/tabular.hpp"
#include "tatu/types.hpp"

namespace tatu {

// Exact tabular slot for the base algorithm.
struct TabularQ {
    Mat q;  // [n_states x n_actions]

    TabularPolicy greedy() const { return greedy_policy_from_q(q); }
};

// Repeated Bellman regression over the provided transitions (real and
// synthetic mixed upstream); (s,a) pairs never observed stay at 0.
TabularQ fitted_q_iteration(const std::vector<Transition>& data, int n_states, int n_actions,
                            double gamma, int n_iters);

struct Td3BcConfig {
    std::vector<int> hidden{64, 64};
    double actor_lr = 3e-4;
    double critic_lr = 3e-4;
    double gamma = 0.99;
    double tau = 0.005;          // soft target update
    int policy_delay = 2;
    double alpha = 2.5;          // Q-term weight: lambda = alpha / mean|Q|; 0 = pure BC
    double policy_noise = 0.2;   // target smoothing noise (pre-clip std)
    double noise_clip = 0.5;
    int batch_size = 64;
};

struct ActorCritic {
    nn::Mlp actor;  // tanh-squashed deterministic policy
    nn::Mlp critic1, critic2;
    nn::Mlp target_actor, target_critic1, target_critic2;
    int state_dim = 0;
    int action_dim = 0;
    double action_bound = 1.0;
    long step_count = 0;

    Vec act(const Vec& s) const;  // bounded action
};

ActorCritic make_actor_critic(int state_dim, int action_dim, double action_bound,
                              const Td3BcConfig& config, std::uint64_t seed);

struct Td3BcLosses {
    double critic_loss = 0.0;
    double actor_loss = 0.0;   // NaN when the actor was not updated this step
    bool actor_updated = false;
};

// Critic MSE against clipped double-Q targets with smoothed target actions;
// gradients for both critics accumulate when requested.
double td3bc_critic_loss(const ActorCritic& model, const std::vector<Transition>& batch,
                         const Td3BcConfig& config, const std::vector<Vec>& target_noise,
                         nn::Mlp::Grads* c1_grads = nullptr, nn::Mlp::Grads* c2_grads = nullptr);

// -lambda * Q1(s, pi(s)) + mean ||pi(s) - a||^2 with lambda = alpha / mean|Q1|
// (lambda treated as a constant in the gradient, per the TD3_BC recipe).
double td3bc_actor_loss(const ActorCritic& model, const std::vector<Transition>& batch,
                        const Td3BcConfig& config, nn::Mlp::Grads* actor_grads = nullptr);

struct Td3Bc {
    ActorCritic model;
    Td3BcConfig config;
    nn::Adam actor_opt, critic1_opt, critic2_opt;
    std::mt19937_64 noise_rng;

    Td3Bc(int state_dim, int action_dim, double action_bound, const Td3BcConfig& cfg,
          std::uint64_t seed);

    Td3BcLosses update(const std::vector<Transition>& batch);
};

struct EvalResult {
    double mean_return = 0.0;             // undiscounted episode return
    double mean_discounted_return = 0.0;  // Eq. 1 objective
    double std_return = 0.0;
    double std_err = 0.0;
};

EvalResult evaluate_policy(const PointMassEnv& env, const ContinuousPolicy& policy,
                           int n_episodes, std::uint64_t seed, double gamma = 0.99);

// Monte-Carlo discounted return of a tabular policy; episodes run until the
// discount tail falls below tolerance.
EvalResult evaluate_policy(const TabularMDP& mdp, const TabularPolicy& pi, int n_episodes,
                           std::uint64_t seed);

}  // namespace tatu
