#pragma once

#include "tatu/ensemble.hpp"
#include "tatu/rng.hpp"

namespace tatu::testing {

// Hand-built ensemble with constant per-member next-state offsets: member k
// predicts mean = s + deltas[k] with tiny fixed variance, independent of the
// input. Uncertainty under the max-discrepancy quantifier is then exactly
// max_ij ||deltas_i - deltas_j||.
inline DynamicsEnsemble planted_ensemble(int state_dim, int action_dim,
                                         const std::vector<Vec>& deltas, double raw_lv = -30.0) {
    DynamicsEnsemble ens;
    ens.state_dim = state_dim;
    ens.action_dim = action_dim;
    for (const Vec& delta : deltas) {
        nn::Layer layer;
        layer.W = Mat::Zero(2 * state_dim, state_dim + action_dim);
        layer.b = Vec::Zero(2 * state_dim);
        layer.b.head(state_dim) = delta;
        layer.b.tail(state_dim).setConstant(raw_lv);
        layer.act = nn::Activation::identity;
        nn::Mlp net;
        net.layers.push_back(std::move(layer));
        ens.members.push_back(std::move(net));
        ens.elite_indices.push_back((int)ens.elite_indices.size());
        ens.validation_losses.push_back(0.0);
    }
    ens.input_norm.mean = Vec::Zero(state_dim + action_dim);
    ens.input_norm.inv_std = Vec::Ones(state_dim + action_dim);
    return ens;
}

// Planted linear-Gaussian dynamics s' = s + dt*(A s + B a) + sigma*noise.
inline Dataset linear_dataset(int state_dim, int action_dim, std::size_t n, double sigma,
                              std::uint64_t seed, Mat* a_out = nullptr, Mat* b_out = nullptr) {
    auto rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat A(state_dim, state_dim), B(state_dim, action_dim);
    for (int i = 0; i < state_dim; ++i) {
        for (int j = 0; j < state_dim; ++j) A(i, j) = 0.5 * normal(rng);
        for (int j = 0; j < action_dim; ++j) B(i, j) = 0.5 * normal(rng);
    }
    if (a_out) *a_out = A;
    if (b_out) *b_out = B;

    Dataset ds;
    ds.env.env_id = "linear";
    ds.env.state_dim = state_dim;
    ds.env.action_dim = action_dim;
    ds.env.action_bound = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        Transition tr;
        tr.s.resize(state_dim);
        tr.a.resize(action_dim);
        tr.s_next.resize(state_dim);
        for (int d = 0; d < state_dim; ++d) tr.s[d] = normal(rng);
        for (int d = 0; d < action_dim; ++d) tr.a[d] = normal(rng);
        Vec drift = 0.1 * (A * tr.s + B * tr.a);
        for (int d = 0; d < state_dim; ++d)
            tr.s_next[d] = tr.s[d] + drift[d] + sigma * normal(rng);
        tr.r = 0.0;
        tr.done = false;
        ds.transitions.push_back(std::move(tr));
        ds.start_state_pool.push_back(i);
    }
    return ds;
}

}  // namespace tatu::testing
