#pragma once

#include <cstdint>
#include <optional>

#include "tatu/config.hpp"
#include "tatu/cvae.hpp"
#include "tatu/io.hpp"
#include "tatu/theory.hpp"

namespace tatu {

// Environment construction shared by the CLI and the end-to-end tests.
PointMassEnv pointmass_from_config(const EnvConfig& env);
RewardFn pointmass_reward_fn(const PointMassEnv& env);

Dataset make_dataset(const RunConfig& config);

// Alg. 1 generation stage: threshold from the dataset, then epochs of rollouts.
AugmentationRun augment_from_config(const RunConfig& config, const DynamicsEnsemble& ensemble,
                                    const Dataset& dataset, const ActionSampler& sampler,
                                    Threshold* threshold_out = nullptr);

// TD3_BC on mixed real/synthetic batches; buffer == nullptr trains unaugmented.
Td3Bc train_policy_mixed(const RunConfig& config, const Dataset& dataset,
                         const ModelBuffer* buffer, io::MetricWriter* metrics = nullptr);

EvalResult evaluate_actor(const RunConfig& config, const ActorCritic& model, int n_episodes,
                          std::uint64_t seed);

// Randomized instance suite behind `verify-bounds` and the bound acceptance
// checks: <= 8 states, <= 4 actions, gamma in {0.9, 0.99}, nonnegative rewards,
// perturbed count-free learned models, lambda = 1, kappa in {0, 1}.
struct BoundSuiteResult {
    int n_instances = 0;
    int theorem1_pass = 0;
    int lemma1_pass = 0;
    int lemma2_pass = 0;
    int corollary1_pass = 0;
    double min_slack = 0.0;
    bool all_ok = false;
};

BoundSuiteResult run_bound_suite(int n_instances, std::uint64_t seed, int n_threads = 4);

// Per-instance construction, exposed so tests can probe single cases.
struct BoundInstance {
    TabularMDP mdp;
    std::vector<std::vector<Vec>> learned_P;
    Vec learned_rho0;
    TabularPolicy pi;
    double lambda_pen = 1.0;
    double kappa = 0.0;
    double epsilon = 0.0;
};

BoundInstance make_bound_instance(std::uint64_t seed);

}  // namespace tatu
