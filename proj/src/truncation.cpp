#include "tatu/truncation.hpp"

#include <cmath>

namespace tatu {

Threshold compute_threshold(const DynamicsEnsemble& ensemble, const Dataset& dataset,
                            const TruncationConfig& config) {
    config.validate();
    Threshold th;
    th.source_max_u = dataset_max_uncertainty(ensemble, dataset, config.quantifier);
    th.alpha_used = config.alpha;
    th.quantifier = config.quantifier.quantifier;
    th.epsilon = th.source_max_u / config.alpha;
    return th;
}

TruncationState accumulate_step(const TruncationState& state, double u_t,
                                const TruncationConfig& config) {
    if (u_t < 0.0) throw ParameterError("accumulate_step: negative uncertainty");
    TruncationState next = state;
    const double weight = config.accumulation == AccumulationMode::discounted
                              ? std::pow(config.gamma, (double)state.step_t)
                              : 1.0;
    next.u_accum = state.u_accum + weight * u_t;
    next.step_t = state.step_t + 1;
    return next;
}

int truncation_indicator(double u_accum, double epsilon) {
    if (u_accum < 0.0 || epsilon < 0.0) throw ParameterError("truncation_indicator: negative input");
    return u_accum <= epsilon ? 0 : 1;
}

double pessimistic_reward(double r, double u, const TruncationConfig& config, bool truncated) {
    if (u < 0.0) throw ParameterError("pessimistic_reward: negative uncertainty");
    double rp = r - config.lambda_pen * u;
    if (truncated) rp -= config.kappa;
    return rp;
}

PessimisticPair build_pessimistic_tabular(const TabularMDP& true_mdp,
                                          const std::vector<std::vector<Vec>>& learned_P,
                                          const Vec& learned_rho0, double lambda_pen,
                                          double kappa, double epsilon, int horizon_cap) {
    true_mdp.validate();
    if (epsilon < 0.0) throw ParameterError("build_pessimistic_tabular: epsilon must be >= 0");
    if (lambda_pen < 0.0 || kappa < 0.0)
        throw ParameterError("build_pessimistic_tabular: penalties must be >= 0");
    if ((int)learned_P.size() != true_mdp.n_states)
        throw ParameterError("build_pessimistic_tabular: learned_P row mismatch");

    Mat u(true_mdp.n_states, true_mdp.n_actions);
    for (int s = 0; s < true_mdp.n_states; ++s) {
        if ((int)learned_P[s].size() != true_mdp.n_actions)
            throw ParameterError("build_pessimistic_tabular: learned_P row mismatch");
        for (int a = 0; a < true_mdp.n_actions; ++a)
            u(s, a) = tv_distance(learned_P[s][a], true_mdp.P[s][a]);
    }

    auto fill = [&](PessimisticTabularMDP& m, const std::vector<std::vector<Vec>>& dyn,
                    const Vec& rho) {
        m.n_states = true_mdp.n_states;
        m.n_actions = true_mdp.n_actions;
        m.dynamics = dyn;
        m.rho_init = rho;
        m.u = u;
        m.r = true_mdp.r;
        m.lambda_pen = lambda_pen;
        m.kappa = kappa;
        m.epsilon = epsilon;
        m.gamma = true_mdp.gamma;
        m.horizon_cap = horizon_cap;
    };

    PessimisticPair pair;
    fill(pair.true_dyn, true_mdp.P, true_mdp.rho0);
    fill(pair.learned_dyn, learned_P, learned_rho0);
    return pair;
}

}  // namespace tatu
