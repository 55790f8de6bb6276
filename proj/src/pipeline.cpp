#include "tatu/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "tatu/rng.hpp"

namespace tatu {

PointMassEnv pointmass_from_config(const EnvConfig& env) {
    PointMassEnv pm;
    pm.noise_scale = env.noise_scale;
    return pm;
}

RewardFn pointmass_reward_fn(const PointMassEnv& env) {
    return [env](const Vec&, const Vec&, const Vec& s_next) { return env.reward(s_next); };
}

Dataset make_dataset(const RunConfig& config) {
    config.validate();
    if (config.env.type == "pointmass") {
        PointMassEnv env = pointmass_from_config(config.env);
        ContinuousPolicy behavior = pointmass_policy_by_tier(env, config.env.tier);
        return collect_dataset(env, behavior, config.env.n_transitions,
                               derive_seed(config.seed, 0xD5), config.env.tier);
    }
    TabularMDP mdp = make_tabular_mdp(config.env.n_states, config.env.n_actions, config.env.gamma,
                                      config.env.r_max, derive_seed(config.seed, 0x3D));
    TabularPolicy behavior = uniform_policy(mdp.n_states, mdp.n_actions);
    return collect_dataset(mdp, behavior, config.env.n_transitions, derive_seed(config.seed, 0xD5),
                           config.env.episode_len, "uniform");
}

AugmentationRun augment_from_config(const RunConfig& config, const DynamicsEnsemble& ensemble,
                                    const Dataset& dataset, const ActionSampler& sampler,
                                    Threshold* threshold_out) {
    AugmentationConfig aug = config.augment;
    aug.truncation = config.truncation;
    Threshold th = compute_threshold(ensemble, dataset, aug.truncation);
    if (threshold_out) *threshold_out = th;

    PointMassEnv env = pointmass_from_config(config.env);
    RewardFn reward = pointmass_reward_fn(env);
    return run_augmentation_epochs(ensemble, dataset, sampler, reward, th, aug,
                                   config.augment_epochs, derive_seed(config.seed, 0xA6));
}

Td3Bc train_policy_mixed(const RunConfig& config, const Dataset& dataset,
                         const ModelBuffer* buffer, io::MetricWriter* metrics) {
    if (dataset.empty()) throw DataError("train_policy_mixed: empty dataset");
    const int sd = (int)dataset.transitions.front().s.size();
    const int ad = (int)dataset.transitions.front().a.size();
    const double bound = dataset.env.action_bound > 0.0 ? dataset.env.action_bound : 1.0;

    Td3Bc learner(sd, ad, bound, config.learner.td3bc, derive_seed(config.seed, 0x1EA));
    static const ModelBuffer kEmpty;
    const ModelBuffer& buf = buffer ? *buffer : kEmpty;
    const double eta = buffer ? config.augment.eta : 1.0;

    for (int step = 0; step < config.learner.steps; ++step) {
        auto batch = mixed_batch(dataset, buf, eta, config.learner.td3bc.batch_size,
                                 derive_seed(config.seed, 0xB000 + (std::uint64_t)step));
        Td3BcLosses losses = learner.update(batch);
        if (metrics && step % 100 == 0) {
            metrics->write(step, "critic_loss", losses.critic_loss);
            if (losses.actor_updated) metrics->write(step, "actor_loss", losses.actor_loss);
        }
    }
    return learner;
}

EvalResult evaluate_actor(const RunConfig& config, const ActorCritic& model, int n_episodes,
                          std::uint64_t seed) {
    PointMassEnv env = pointmass_from_config(config.env);
    ContinuousPolicy pi = [&model](const Vec& s, std::mt19937_64&) { return model.act(s); };
    return evaluate_policy(env, pi, n_episodes, seed, config.learner.td3bc.gamma);
}

BoundInstance make_bound_instance(std::uint64_t seed) {
    auto rng = make_rng(seed);
    std::uniform_int_distribution<int> states(2, 8), actions(2, 4), coin(0, 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    BoundInstance inst;
    const int S = states(rng);
    const int A = actions(rng);
    const double gamma = coin(rng) ? 0.99 : 0.9;
    // Nonnegative rewards keep Lemma 2's upper side exact.
    inst.mdp = make_tabular_mdp(S, A, gamma, 1.0, derive_seed(seed, 1), true);
    inst.pi = random_policy(S, A, derive_seed(seed, 2));
    inst.lambda_pen = 1.0;
    inst.kappa = coin(rng) ? 1.0 : 0.0;

    // Learned model: true rows mixed with a random stochastic perturbation.
    auto pert_rng = make_rng(derive_seed(seed, 3));
    std::uniform_real_distribution<double> beta_dist(0.0, 0.3);
    std::exponential_distribution<double> expo(1.0);
    auto random_row = [&](int n) {
        Vec row(n);
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            row[i] = expo(pert_rng) + 1e-9;
            total += row[i];
        }
        row /= total;
        row /= row.sum();
        return row;
    };
    inst.learned_P.resize(S);
    double u_max = 0.0;
    for (int s = 0; s < S; ++s) {
        inst.learned_P[s].resize(A);
        for (int a = 0; a < A; ++a) {
            const double beta = beta_dist(pert_rng);
            Vec row = (1.0 - beta) * inst.mdp.P[s][a] + beta * random_row(S);
            row /= row.sum();
            inst.learned_P[s][a] = row;
            u_max = std::max(u_max, tv_distance(row, inst.mdp.P[s][a]));
        }
    }
    {
        const double beta = beta_dist(pert_rng);
        Vec row = (1.0 - beta) * inst.mdp.rho0 + beta * random_row(S);
        row /= row.sum();
        inst.learned_rho0 = row;
    }
    const double alpha = 1.0 + 4.0 * unif(rng);
    inst.epsilon = u_max > 0.0 ? u_max / alpha : 0.0;
    return inst;
}

BoundSuiteResult run_bound_suite(int n_instances, std::uint64_t seed, int n_threads) {
    if (n_instances < 1) throw ParameterError("run_bound_suite: n_instances must be >= 1");
    if (n_threads < 1) throw ParameterError("run_bound_suite: n_threads must be >= 1");

    std::vector<BoundReport> reports(n_instances);
    std::vector<CorollaryReport> corollaries(n_instances);
    auto work = [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            BoundInstance inst = make_bound_instance(derive_seed(seed, 0x1000 + (std::uint64_t)i));
            reports[i] = check_lemmas(inst.mdp, inst.learned_P, inst.learned_rho0, inst.pi,
                                      inst.lambda_pen, inst.kappa, inst.epsilon);
            TabularPolicy opt = optimal_policy(inst.mdp);
            corollaries[i] = check_corollary1(inst.mdp, inst.learned_P, inst.learned_rho0, opt,
                                              inst.pi, inst.lambda_pen, inst.kappa, inst.epsilon);
        }
    };
    const int threads = std::min(n_threads, n_instances);
    if (threads <= 1) {
        work(0, n_instances);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errs(threads);
        const int chunk = (n_instances + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const int begin = t * chunk;
            const int end = std::min(n_instances, begin + chunk);
            pool.emplace_back([&, t, begin, end] {
                try {
                    work(begin, end);
                } catch (...) {
                    errs[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
    }

    BoundSuiteResult res;
    res.n_instances = n_instances;
    res.min_slack = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_instances; ++i) {
        const BoundReport& r = reports[i];
        if (r.theorem1_lower_ok && r.theorem1_upper_ok) ++res.theorem1_pass;
        if (r.lemma1_ok) ++res.lemma1_pass;
        if (r.lemma2_ok) ++res.lemma2_pass;
        if (corollaries[i].corollary1_ok) ++res.corollary1_pass;
        res.min_slack = std::min({res.min_slack, r.theorem1_lower_slack, r.theorem1_upper_slack,
                                  r.lemma1_slack, r.lemma2_lower_slack, r.lemma2_upper_slack,
                                  corollaries[i].slack});
    }
    res.all_ok = res.theorem1_pass == n_instances && res.lemma1_pass == n_instances &&
                 res.lemma2_pass == n_instances && res.corollary1_pass == n_instances;
    return res;
}

}  // namespace tatu
