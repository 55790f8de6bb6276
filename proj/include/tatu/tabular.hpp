#pragma once

#include <cstdint>
#include <vector>

#include "tatu/types.hpp"

namespace tatu {

// Exact finite MDP. P is indexed [s][a] -> probability vector over next states.
struct TabularMDP {
    int n_states = 0;
    int n_actions = 0;
    std::vector<std::vector<Vec>> P;  // P[s][a](s') row-stochastic
    Mat r;                            // r(s,a), |r| <= r_max
    Vec rho0;
    double gamma = 0.99;
    double r_max = 1.0;

    void validate() const;
};

// Stochastic policy: row s is a distribution over actions.
using TabularPolicy = Mat;

TabularMDP make_tabular_mdp(int n_states, int n_actions, double gamma, double r_max,
                            std::uint64_t seed, bool nonnegative_rewards = false);

TabularPolicy uniform_policy(int n_states, int n_actions);
TabularPolicy random_policy(int n_states, int n_actions, std::uint64_t seed);
TabularPolicy greedy_policy_from_q(const Mat& q);

// J = rho0^T (I - gamma P_pi)^{-1} r_pi via dense linear solve.
double exact_return(const std::vector<std::vector<Vec>>& P, const Mat& r, const Vec& rho0,
                    double gamma, const TabularPolicy& pi);
double exact_return(const TabularMDP& mdp, const TabularPolicy& pi);

Vec policy_values(const std::vector<std::vector<Vec>>& P, const Mat& r, double gamma,
                  const TabularPolicy& pi);

Mat value_iteration_q(const TabularMDP& mdp, double tol = 1e-12, int max_iters = 2000000);
TabularPolicy optimal_policy(const TabularMDP& mdp);

double tv_distance(const Vec& p, const Vec& q);

EnvDescriptor tabular_descriptor(const TabularMDP& mdp);

// Roll the behavior policy with fixed-length episode resets; states and actions
// are stored as 1-d index vectors.
Dataset collect_dataset(const TabularMDP& mdp, const TabularPolicy& behavior,
                        std::size_t n_transitions, std::uint64_t seed,
                        int episode_len = 10, const std::string& behavior_tag = "");

// Count-based model estimate; unvisited rows fall back to the uniform distribution.
struct EmpiricalModel {
    std::vector<std::vector<Vec>> P;
    Vec rho0;
};
EmpiricalModel estimate_empirical_model(const TabularMDP& mdp, const Dataset& ds);

}  // namespace tatu
