#include "tatu/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tatu/rng.hpp"

namespace tatu {

TabularQ fitted_q_iteration(const std::vector<Transition>& data, int n_states, int n_actions,
                            double gamma, int n_iters) {
    if (n_states < 1 || n_actions < 1)
        throw ParameterError("fitted_q_iteration: need positive table dims");
    if (gamma < 0.0 || gamma >= 1.0)
        throw ParameterError("fitted_q_iteration: gamma must lie in [0,1)");
    if (n_iters < 1) throw ParameterError("fitted_q_iteration: n_iters must be >= 1");

    // Group transitions by (s,a) once; Bellman regression is then a mean per group.
    std::vector<std::vector<std::size_t>> groups((std::size_t)n_states * n_actions);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const int s = (int)std::lround(data[i].s[0]);
        const int a = (int)std::lround(data[i].a[0]);
        if (s < 0 || s >= n_states || a < 0 || a >= n_actions)
            throw DataError("fitted_q_iteration: transition index out of range");
        groups[(std::size_t)s * n_actions + a].push_back(i);
    }

    TabularQ out;
    out.q = Mat::Zero(n_states, n_actions);
    Mat next = out.q;
    for (int it = 0; it < n_iters; ++it) {
        for (int s = 0; s < n_states; ++s) {
            for (int a = 0; a < n_actions; ++a) {
                const auto& g = groups[(std::size_t)s * n_actions + a];
                if (g.empty()) {
                    next(s, a) = 0.0;
                    continue;
                }
                double acc = 0.0;
                for (std::size_t i : g) {
                    const Transition& tr = data[i];
                    double target = tr.r;
                    if (!tr.done && gamma > 0.0) {
                        const int s2 = (int)std::lround(tr.s_next[0]);
                        target += gamma * out.q.row(s2).maxCoeff();
                    }
                    acc += target;
                }
                next(s, a) = acc / (double)g.size();
            }
        }
        out.q.swap(next);
    }
    if (!out.q.allFinite()) throw NumericError("fitted_q_iteration: non-finite Q table");
    return out;
}

Vec ActorCritic::act(const Vec& s) const {
    return action_bound * actor.forward(s).array().tanh().matrix();
}

ActorCritic make_actor_critic(int state_dim, int action_dim, double action_bound,
                              const Td3BcConfig& config, std::uint64_t seed) {
    if (state_dim < 1 || action_dim < 1 || action_bound <= 0.0)
        throw ParameterError("make_actor_critic: bad dimensions or bound");
    auto rng = make_rng(derive_seed(seed, 0xAC));

    std::vector<int> actor_dims{state_dim};
    std::vector<int> critic_dims{state_dim + action_dim};
    for (int h : config.hidden) {
        actor_dims.push_back(h);
        critic_dims.push_back(h);
    }
    actor_dims.push_back(action_dim);
    critic_dims.push_back(1);

    ActorCritic m;
    m.state_dim = state_dim;
    m.action_dim = action_dim;
    m.action_bound = action_bound;
    m.actor = nn::Mlp::make(actor_dims, nn::Activation::relu, nn::Activation::identity, rng);
    m.critic1 = nn::Mlp::make(critic_dims, nn::Activation::relu, nn::Activation::identity, rng);
    m.critic2 = nn::Mlp::make(critic_dims, nn::Activation::relu, nn::Activation::identity, rng);
    m.target_actor = m.actor;
    m.target_critic1 = m.critic1;
    m.target_critic2 = m.critic2;
    return m;
}

double td3bc_critic_loss(const ActorCritic& model, const std::vector<Transition>& batch,
                         const Td3BcConfig& config, const std::vector<Vec>& target_noise,
                         nn::Mlp::Grads* c1_grads, nn::Mlp::Grads* c2_grads) {
    if (batch.empty()) throw ParameterError("td3bc_critic_loss: empty batch");
    if (target_noise.size() != batch.size())
        throw ParameterError("td3bc_critic_loss: noise/batch size mismatch");
    const double inv_n = 1.0 / (double)batch.size();
    const double bound = model.action_bound;

    double loss = 0.0;
    nn::Mlp::Cache c1_cache, c2_cache;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Transition& tr = batch[i];
        double y = tr.r;
        if (!tr.done && config.gamma > 0.0) {
            Vec a_t = bound * model.target_actor.forward(tr.s_next).array().tanh().matrix();
            for (int d = 0; d < a_t.size(); ++d) {
                const double eps = std::clamp(config.policy_noise * target_noise[i][d],
                                              -config.noise_clip, config.noise_clip);
                a_t[d] = std::clamp(a_t[d] + eps, -bound, bound);
            }
            Vec x_t(model.state_dim + model.action_dim);
            x_t << tr.s_next, a_t;
            const double q_t = std::min(model.target_critic1.forward(x_t)[0],
                                        model.target_critic2.forward(x_t)[0]);
            y += config.gamma * q_t;
        }
        Vec x(model.state_dim + model.action_dim);
        x << tr.s, tr.a;
        const double q1 = model.critic1.forward(x, c1_cache)[0];
        const double q2 = model.critic2.forward(x, c2_cache)[0];
        loss += (q1 - y) * (q1 - y) + (q2 - y) * (q2 - y);
        if (c1_grads && c2_grads) {
            Vec dy(1);
            dy[0] = 2.0 * (q1 - y) * inv_n;
            model.critic1.backward(c1_cache, dy, *c1_grads);
            dy[0] = 2.0 * (q2 - y) * inv_n;
            model.critic2.backward(c2_cache, dy, *c2_grads);
        }
    }
    loss *= inv_n;
    if (!std::isfinite(loss)) throw NumericError("td3bc_critic_loss: non-finite loss");
    return loss;
}

double td3bc_actor_loss(const ActorCritic& model, const std::vector<Transition>& batch,
                        const Td3BcConfig& config, nn::Mlp::Grads* actor_grads) {
    if (batch.empty()) throw ParameterError("td3bc_actor_loss: empty batch");
    const double inv_n = 1.0 / (double)batch.size();
    const double bound = model.action_bound;

    // lambda from the dataset actions' Q values, so it is constant in the
    // actor's parameters and the gradient is exact.
    double lambda = 0.0;
    if (config.alpha != 0.0) {
        double mean_abs_q = 0.0;
        for (const Transition& tr : batch) {
            Vec x(model.state_dim + model.action_dim);
            x << tr.s, tr.a;
            mean_abs_q += std::abs(model.critic1.forward(x)[0]);
        }
        mean_abs_q *= inv_n;
        lambda = config.alpha / (mean_abs_q + 1e-8);
    }

    double loss = 0.0;
    nn::Mlp::Cache actor_cache, critic_cache;
    nn::Mlp::Grads critic_scratch = nn::Mlp::Grads::zeros_like(model.critic1);
    for (const Transition& tr : batch) {
        Vec raw = model.actor.forward(tr.s, actor_cache);
        Vec tanh_a = raw.array().tanh().matrix();
        Vec a_pi = bound * tanh_a;

        Vec x(model.state_dim + model.action_dim);
        x << tr.s, a_pi;
        const double q = model.critic1.forward(x, critic_cache)[0];
        loss += -lambda * q + (a_pi - tr.a).squaredNorm();

        if (actor_grads) {
            Vec da = 2.0 * (a_pi - tr.a);
            if (lambda != 0.0) {
                Vec dq(1);
                dq[0] = -lambda;
                Vec dx = model.critic1.backward(critic_cache, dq, critic_scratch);
                da += dx.tail(model.action_dim);
            }
            Vec draw =
                da.cwiseProduct(bound * (1.0 - tanh_a.array().square()).matrix()) * inv_n;
            model.actor.backward(actor_cache, draw, *actor_grads);
        }
    }
    loss *= inv_n;
    if (!std::isfinite(loss)) throw NumericError("td3bc_actor_loss: non-finite loss");
    return loss;
}

namespace {

void soft_update(nn::Mlp& target, const nn::Mlp& source, double tau) {
    for (std::size_t l = 0; l < target.layers.size(); ++l) {
        target.layers[l].W = tau * source.layers[l].W + (1.0 - tau) * target.layers[l].W;
        target.layers[l].b = tau * source.layers[l].b + (1.0 - tau) * target.layers[l].b;
    }
}

}  // namespace

Td3Bc::Td3Bc(int state_dim, int action_dim, double action_bound, const Td3BcConfig& cfg,
             std::uint64_t seed)
    : model(make_actor_critic(state_dim, action_dim, action_bound, cfg, seed)),
      config(cfg),
      actor_opt(cfg.actor_lr),
      critic1_opt(cfg.critic_lr),
      critic2_opt(cfg.critic_lr),
      noise_rng(make_rng(derive_seed(seed, 0x7D3))) {
    actor_opt.init(model.actor);
    critic1_opt.init(model.critic1);
    critic2_opt.init(model.critic2);
}

Td3BcLosses Td3Bc::update(const std::vector<Transition>& batch) {
    if (batch.empty()) throw ParameterError("Td3Bc::update: empty batch");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Vec> noise(batch.size());
    for (auto& n : noise) {
        n.resize(model.action_dim);
        for (int d = 0; d < model.action_dim; ++d) n[d] = normal(noise_rng);
    }

    Td3BcLosses losses;
    auto c1_g = nn::Mlp::Grads::zeros_like(model.critic1);
    auto c2_g = nn::Mlp::Grads::zeros_like(model.critic2);
    losses.critic_loss = td3bc_critic_loss(model, batch, config, noise, &c1_g, &c2_g);
    critic1_opt.step(model.critic1, c1_g);
    critic2_opt.step(model.critic2, c2_g);

    ++model.step_count;
    losses.actor_loss = std::numeric_limits<double>::quiet_NaN();
    if (model.step_count % config.policy_delay == 0) {
        auto a_g = nn::Mlp::Grads::zeros_like(model.actor);
        losses.actor_loss = td3bc_actor_loss(model, batch, config, &a_g);
        actor_opt.step(model.actor, a_g);
        losses.actor_updated = true;
        soft_update(model.target_actor, model.actor, config.tau);
        soft_update(model.target_critic1, model.critic1, config.tau);
        soft_update(model.target_critic2, model.critic2, config.tau);
    }
    return losses;
}

EvalResult evaluate_policy(const PointMassEnv& env, const ContinuousPolicy& policy,
                           int n_episodes, std::uint64_t seed, double gamma) {
    if (n_episodes < 1) throw ParameterError("evaluate_policy: n_episodes must be >= 1");
    double sum = 0.0, sum_sq = 0.0, sum_disc = 0.0;
    for (int ep = 0; ep < n_episodes; ++ep) {
        auto rng = make_rng(derive_seed(seed, 0xE4A1 + (std::uint64_t)ep));
        Vec s = env.reset(rng);
        double g = 0.0, g_disc = 0.0, pow_t = 1.0;
        for (int t = 0; t < env.horizon; ++t) {
            Vec a = env.clip_action(policy(s, rng));
            Vec s_next = env.step_state(s, a, rng);
            const double r = env.reward(s_next);
            g += r;
            g_disc += pow_t * r;
            pow_t *= gamma;
            s = s_next;
        }
        sum += g;
        sum_sq += g * g;
        sum_disc += g_disc;
    }
    EvalResult res;
    res.mean_return = sum / n_episodes;
    res.mean_discounted_return = sum_disc / n_episodes;
    const double var = std::max(0.0, sum_sq / n_episodes - res.mean_return * res.mean_return);
    res.std_return = std::sqrt(var);
    res.std_err = res.std_return / std::sqrt((double)n_episodes);
    return res;
}

EvalResult evaluate_policy(const TabularMDP& mdp, const TabularPolicy& pi, int n_episodes,
                           std::uint64_t seed) {
    if (n_episodes < 1) throw ParameterError("evaluate_policy: n_episodes must be >= 1");
    mdp.validate();
    const int t_max = (int)std::ceil(std::log(1e-13 * (1.0 - mdp.gamma) / (mdp.r_max + 1e-300)) /
                                     std::log(mdp.gamma));
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto sample = [&](const Vec& p) {
        double x = unif(rng);
        for (int i = 0; i < p.size(); ++i) {
            x -= p[i];
            if (x <= 0.0) return i;
        }
        return (int)p.size() - 1;
    };

    double sum = 0.0, sum_sq = 0.0, sum_undisc = 0.0;
    for (int ep = 0; ep < n_episodes; ++ep) {
        int s = sample(mdp.rho0);
        double g = 0.0, g_undisc = 0.0, pow_t = 1.0;
        for (int t = 0; t < t_max; ++t) {
            const int a = sample(pi.row(s).transpose());
            g += pow_t * mdp.r(s, a);
            g_undisc += mdp.r(s, a);
            pow_t *= mdp.gamma;
            s = sample(mdp.P[s][a]);
        }
        sum += g;
        sum_sq += g * g;
        sum_undisc += g_undisc;
    }
    EvalResult res;
    res.mean_discounted_return = sum / n_episodes;
    res.mean_return = sum_undisc / n_episodes;
    const double var =
        std::max(0.0, sum_sq / n_episodes -
                          res.mean_discounted_return * res.mean_discounted_return);
    res.std_return = std::sqrt(var);
    res.std_err = res.std_return / std::sqrt((double)n_episodes);
    return res;
}

}  // namespace tatu
