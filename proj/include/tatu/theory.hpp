#pragma once

#include <cstdint>

#include "tatu/tabular.hpp"
#include "tatu/truncation.hpp"

namespace tatu {

// Exact return of a memoryless policy in a pessimistic tabular MDP. The
// accumulated uncertainty is tracked on a grid of n_bins cells over [0,
// epsilon]; cell representatives are upper bounds, so discretization can only
// truncate earlier. Mass that can no longer truncate is absorbed analytically
// through a linear solve, which keeps the propagation finite.
double pessimistic_exact_return(const PessimisticTabularMDP& mdp, const TabularPolicy& pi,
                                int n_bins = 1000, double tail_tol = 1e-13);

// Monte-Carlo estimate of the same return; std_err receives the standard error.
double pessimistic_mc_return(const PessimisticTabularMDP& mdp, const TabularPolicy& pi,
                             std::size_t n_episodes, std::uint64_t seed,
                             double* std_err = nullptr);

struct BoundReport {
    double j_true = 0.0;           // J(pi, M)
    double j_pess_true_dyn = 0.0;  // J(pi, M_p)
    double j_pess_learned = 0.0;   // J(pi, M_hat_p)
    double r_bar = 0.0;            // r_max + lambda * u_max + kappa
    double u_max = 0.0;
    double tv_rho0 = 0.0;
    double epsilon_used = 0.0;
    double lower_bound_value = 0.0;
    double upper_bound_value = 0.0;
    double theorem1_lower_slack = 0.0;
    double theorem1_upper_slack = 0.0;
    double lemma1_slack = 0.0;
    double lemma2_lower_slack = 0.0;
    double lemma2_upper_slack = 0.0;
    bool theorem1_lower_ok = false;
    bool theorem1_upper_ok = false;
    bool lemma1_ok = false;
    bool lemma2_ok = false;
};

constexpr double kBoundTolerance = 1e-9;

BoundReport check_theorem1(const TabularMDP& true_mdp,
                           const std::vector<std::vector<Vec>>& learned_P,
                           const Vec& learned_rho0, const TabularPolicy& pi,
                           double lambda_pen, double kappa, double epsilon);

// Same report with the M_p-side quantities (Lemmas 1 and 2) also verified.
BoundReport check_lemmas(const TabularMDP& true_mdp,
                         const std::vector<std::vector<Vec>>& learned_P,
                         const Vec& learned_rho0, const TabularPolicy& pi,
                         double lambda_pen, double kappa, double epsilon);

struct CorollaryReport {
    double j_opt_true = 0.0;   // J(pi_opt, M)
    double j_cand_true = 0.0;  // J(pi, M)
    double j_opt_pess = 0.0;   // J(pi_opt, M_hat_p)
    double j_cand_pess = 0.0;  // J(pi, M_hat_p)
    double delta_pi = 0.0;
    double rhs = 0.0;
    double slack = 0.0;
    double r_bar = 0.0;
    double tv_rho0 = 0.0;
    double epsilon_used = 0.0;
    bool corollary1_ok = false;
};

CorollaryReport check_corollary1(const TabularMDP& true_mdp,
                                 const std::vector<std::vector<Vec>>& learned_P,
                                 const Vec& learned_rho0, const TabularPolicy& optimal_pi,
                                 const TabularPolicy& candidate_pi, double lambda_pen,
                                 double kappa, double epsilon);

struct Corollary2Report {
    std::vector<std::size_t> dataset_sizes;
    std::vector<double> tv_rho0;  // D_TV(rho0, rho0_hat) per size
    std::vector<double> mean_u;   // mean exact per-pair TV uncertainty per size
    bool trend_ok = false;        // values at the largest size <= values at the smallest
};

Corollary2Report check_corollary2(const TabularMDP& true_mdp,
                                  const std::vector<std::size_t>& dataset_sizes,
                                  std::uint64_t seed);

}  // namespace tatu
