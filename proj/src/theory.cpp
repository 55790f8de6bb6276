#include "tatu/theory.hpp"

#include <cmath>
#include <limits>

#include "tatu/rng.hpp"

namespace tatu {

double pessimistic_exact_return(const PessimisticTabularMDP& m, const TabularPolicy& pi,
                                int n_bins, double tail_tol) {
    if (n_bins < 1) throw ParameterError("pessimistic_exact_return: n_bins must be >= 1");
    const int S = m.n_states;
    const int A = m.n_actions;
    const double eps = m.epsilon;
    const double gamma = m.gamma;
    const double u_max = m.u.maxCoeff();
    const bool discounted = m.accumulation == AccumulationMode::discounted;
    const double w = eps > 0.0 ? eps / n_bins : 0.0;
    const int B = eps > 0.0 ? n_bins : 0;

    Mat r_pen = m.r - m.lambda_pen * m.u;
    // Continuation values for mass that can never truncate again.
    Vec v_pen = policy_values(m.dynamics, r_pen, gamma, pi);
    const double reward_bound = m.r.cwiseAbs().maxCoeff() + m.lambda_pen * u_max + m.kappa;

    const int cells = S * (B + 1);
    std::vector<double> mass(cells, 0.0), rep(cells, 0.0);
    std::vector<double> next_mass(cells, 0.0), next_rep(cells, 0.0);
    auto at = [B](int s, int b) { return s * (B + 1) + b; };
    for (int s = 0; s < S; ++s) mass[at(s, 0)] = m.rho_init[s];

    double j = 0.0;
    double pow_t = 1.0;
    const double inf = std::numeric_limits<double>::infinity();

    for (int t = 0;; ++t, pow_t *= gamma) {
        if (m.horizon_cap > 0 && t >= m.horizon_cap) break;
        double total = 0.0;
        for (double v : mass) total += v;
        if (total <= 0.0) break;
        if (pow_t * reward_bound / (1.0 - gamma) * total < tail_tol) break;

        const double step_weight = discounted ? pow_t : 1.0;
        const double remaining_max =
            discounted ? pow_t * u_max / (1.0 - gamma) : (u_max > 0.0 ? inf : 0.0);

        std::fill(next_mass.begin(), next_mass.end(), 0.0);
        std::fill(next_rep.begin(), next_rep.end(), 0.0);

        for (int s = 0; s < S; ++s) {
            for (int b = 0; b <= B; ++b) {
                const double cell_mass = mass[at(s, b)];
                if (cell_mass <= 0.0) continue;
                const double cell_u = rep[at(s, b)];
                // Truncation can never fire again: absorb analytically.
                if (m.horizon_cap == 0 && cell_u + remaining_max <= eps) {
                    j += cell_mass * pow_t * v_pen[s];
                    continue;
                }
                for (int a = 0; a < A; ++a) {
                    const double p = pi(s, a);
                    if (p == 0.0) continue;
                    const double branch = cell_mass * p;
                    const double u_new = cell_u + step_weight * m.u(s, a);
                    if (u_new > eps) {
                        j += branch * pow_t * (r_pen(s, a) - m.kappa);
                        continue;
                    }
                    j += branch * pow_t * r_pen(s, a);
                    int b2 = 0;
                    if (w > 0.0) {
                        b2 = (int)std::ceil(u_new / w);
                        if (b2 > B) b2 = B;
                        if (b2 < 0) b2 = 0;
                    }
                    const Vec& row = m.dynamics[s][a];
                    for (int s2 = 0; s2 < S; ++s2) {
                        const double q = row[s2];
                        if (q == 0.0) continue;
                        const int k = at(s2, b2);
                        next_mass[k] += branch * q;
                        if (u_new > next_rep[k]) next_rep[k] = u_new;
                    }
                }
            }
        }
        mass.swap(next_mass);
        rep.swap(next_rep);
    }
    return j;
}

double pessimistic_mc_return(const PessimisticTabularMDP& m, const TabularPolicy& pi,
                             std::size_t n_episodes, std::uint64_t seed, double* std_err) {
    if (n_episodes < 1) throw ParameterError("pessimistic_mc_return: need >= 1 episode");
    const double gamma = m.gamma;
    const double u_max = m.u.maxCoeff();
    const bool discounted = m.accumulation == AccumulationMode::discounted;
    const double reward_bound = m.r.cwiseAbs().maxCoeff() + m.lambda_pen * u_max + m.kappa + 1e-300;
    int t_max = m.horizon_cap;
    if (t_max == 0)
        t_max = (int)std::ceil(std::log(1e-13 * (1.0 - gamma) / reward_bound) / std::log(gamma));

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

    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t ep = 0; ep < n_episodes; ++ep) {
        int s = sample(m.rho_init);
        double g = 0.0, pow_t = 1.0, u_accum = 0.0;
        for (int t = 0; t < t_max; ++t) {
            const int a = sample(pi.row(s).transpose());
            const double u = m.u(s, a);
            u_accum += (discounted ? pow_t : 1.0) * u;
            const double r_pen = m.r(s, a) - m.lambda_pen * u;
            if (u_accum > m.epsilon) {
                g += pow_t * (r_pen - m.kappa);
                break;
            }
            g += pow_t * r_pen;
            s = sample(m.dynamics[s][a]);
            pow_t *= gamma;
        }
        sum += g;
        sum_sq += g * g;
    }
    const double mean = sum / (double)n_episodes;
    if (std_err) {
        const double var = std::max(0.0, sum_sq / (double)n_episodes - mean * mean);
        *std_err = std::sqrt(var / (double)n_episodes);
    }
    return mean;
}

namespace {

BoundReport bound_report_core(const TabularMDP& true_mdp,
                              const std::vector<std::vector<Vec>>& learned_P,
                              const Vec& learned_rho0, const TabularPolicy& pi,
                              double lambda_pen, double kappa, double epsilon,
                              bool with_lemmas) {
    PessimisticPair pair =
        build_pessimistic_tabular(true_mdp, learned_P, learned_rho0, lambda_pen, kappa, epsilon);

    BoundReport rep;
    rep.u_max = pair.true_dyn.u.maxCoeff();
    rep.r_bar = true_mdp.r_max + lambda_pen * rep.u_max + kappa;
    rep.tv_rho0 = tv_distance(true_mdp.rho0, learned_rho0);
    rep.epsilon_used = epsilon;
    rep.j_true = exact_return(true_mdp, pi);
    rep.j_pess_learned = pessimistic_exact_return(pair.learned_dyn, pi);

    const double inv = 1.0 / (1.0 - true_mdp.gamma);
    const double init_term = 2.0 * rep.r_bar * inv * rep.tv_rho0;
    rep.lower_bound_value = rep.j_true - init_term - rep.r_bar * epsilon - rep.r_bar * inv;
    rep.upper_bound_value = rep.j_true + init_term + rep.r_bar * epsilon;
    rep.theorem1_lower_slack = rep.j_pess_learned - rep.lower_bound_value;
    rep.theorem1_upper_slack = rep.upper_bound_value - rep.j_pess_learned;
    rep.theorem1_lower_ok = rep.theorem1_lower_slack >= -kBoundTolerance;
    rep.theorem1_upper_ok = rep.theorem1_upper_slack >= -kBoundTolerance;

    if (with_lemmas) {
        rep.j_pess_true_dyn = pessimistic_exact_return(pair.true_dyn, pi);
        rep.lemma1_slack =
            init_term + rep.r_bar * epsilon - std::abs(rep.j_pess_true_dyn - rep.j_pess_learned);
        rep.lemma1_ok = rep.lemma1_slack >= -kBoundTolerance;
        rep.lemma2_lower_slack = rep.j_pess_true_dyn - (rep.j_true - rep.r_bar * inv);
        rep.lemma2_upper_slack = rep.j_true - rep.j_pess_true_dyn;
        rep.lemma2_ok = rep.lemma2_lower_slack >= -kBoundTolerance &&
                        rep.lemma2_upper_slack >= -kBoundTolerance;
    }
    return rep;
}

}  // namespace

BoundReport check_theorem1(const TabularMDP& true_mdp,
                           const std::vector<std::vector<Vec>>& learned_P,
                           const Vec& learned_rho0, const TabularPolicy& pi,
                           double lambda_pen, double kappa, double epsilon) {
    return bound_report_core(true_mdp, learned_P, learned_rho0, pi, lambda_pen, kappa, epsilon,
                             false);
}

BoundReport check_lemmas(const TabularMDP& true_mdp,
                         const std::vector<std::vector<Vec>>& learned_P,
                         const Vec& learned_rho0, const TabularPolicy& pi,
                         double lambda_pen, double kappa, double epsilon) {
    return bound_report_core(true_mdp, learned_P, learned_rho0, pi, lambda_pen, kappa, epsilon,
                             true);
}

CorollaryReport check_corollary1(const TabularMDP& true_mdp,
                                 const std::vector<std::vector<Vec>>& learned_P,
                                 const Vec& learned_rho0, const TabularPolicy& optimal_pi,
                                 const TabularPolicy& candidate_pi, double lambda_pen,
                                 double kappa, double epsilon) {
    PessimisticPair pair =
        build_pessimistic_tabular(true_mdp, learned_P, learned_rho0, lambda_pen, kappa, epsilon);

    CorollaryReport rep;
    rep.r_bar = true_mdp.r_max + lambda_pen * pair.true_dyn.u.maxCoeff() + kappa;
    rep.tv_rho0 = tv_distance(true_mdp.rho0, learned_rho0);
    rep.epsilon_used = epsilon;
    rep.j_opt_true = exact_return(true_mdp, optimal_pi);
    rep.j_cand_true = exact_return(true_mdp, candidate_pi);
    rep.j_opt_pess = pessimistic_exact_return(pair.learned_dyn, optimal_pi);
    rep.j_cand_pess = pessimistic_exact_return(pair.learned_dyn, candidate_pi);
    rep.delta_pi = rep.j_opt_pess - rep.j_cand_pess;

    const double inv = 1.0 / (1.0 - true_mdp.gamma);
    rep.rhs = rep.delta_pi + 4.0 * rep.r_bar * inv * rep.tv_rho0 + 2.0 * rep.r_bar * epsilon +
              rep.r_bar * inv;
    rep.slack = rep.rhs - (rep.j_opt_true - rep.j_cand_true);
    rep.corollary1_ok = rep.slack >= -kBoundTolerance;
    return rep;
}

Corollary2Report check_corollary2(const TabularMDP& true_mdp,
                                  const std::vector<std::size_t>& dataset_sizes,
                                  std::uint64_t seed) {
    if (dataset_sizes.empty()) throw ParameterError("check_corollary2: no dataset sizes");
    Corollary2Report rep;
    rep.dataset_sizes = dataset_sizes;
    const TabularPolicy uniform = uniform_policy(true_mdp.n_states, true_mdp.n_actions);
    for (std::size_t i = 0; i < dataset_sizes.size(); ++i) {
        Dataset ds = collect_dataset(true_mdp, uniform, dataset_sizes[i],
                                     derive_seed(seed, 0xC2 + i));
        EmpiricalModel model = estimate_empirical_model(true_mdp, ds);
        rep.tv_rho0.push_back(tv_distance(true_mdp.rho0, model.rho0));
        double mean_u = 0.0;
        for (int s = 0; s < true_mdp.n_states; ++s)
            for (int a = 0; a < true_mdp.n_actions; ++a)
                mean_u += tv_distance(model.P[s][a], true_mdp.P[s][a]);
        rep.mean_u.push_back(mean_u / (double)(true_mdp.n_states * true_mdp.n_actions));
    }
    rep.trend_ok = rep.tv_rho0.back() <= rep.tv_rho0.front() &&
                   rep.mean_u.back() <= rep.mean_u.front();
    return rep;
}

}  // namespace tatu
