#include "tatu/tabular.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "tatu/rng.hpp"

namespace tatu {

void TabularMDP::validate() const {
    if (n_states < 1 || n_actions < 1) throw ParameterError("TabularMDP: empty state/action space");
    if (gamma < 0.0 || gamma >= 1.0) throw ParameterError("TabularMDP: gamma must lie in [0,1)");
    if (r_max <= 0.0) throw ParameterError("TabularMDP: r_max must be positive");
    if ((int)P.size() != n_states) throw ParameterError("TabularMDP: P has wrong first dimension");
    for (int s = 0; s < n_states; ++s) {
        if ((int)P[s].size() != n_actions) throw ParameterError("TabularMDP: P has wrong second dimension");
        for (int a = 0; a < n_actions; ++a) {
            const Vec& row = P[s][a];
            if (row.size() != n_states) throw ParameterError("TabularMDP: transition row has wrong length");
            if (row.minCoeff() < 0.0) throw ParameterError("TabularMDP: negative transition probability");
            if (std::abs(row.sum() - 1.0) > 1e-12) throw ParameterError("TabularMDP: transition row does not sum to 1");
        }
    }
    if (rho0.size() != n_states || std::abs(rho0.sum() - 1.0) > 1e-12 || rho0.minCoeff() < 0.0)
        throw ParameterError("TabularMDP: rho0 is not a distribution");
    if (r.rows() != n_states || r.cols() != n_actions) throw ParameterError("TabularMDP: reward table shape mismatch");
    if (r.cwiseAbs().maxCoeff() > r_max + 1e-15) throw ParameterError("TabularMDP: reward exceeds r_max");
}

namespace {

Vec sample_simplex(int n, std::mt19937_64& rng) {
    // Dirichlet(1,...,1) via normalized exponentials.
    std::exponential_distribution<double> exp_dist(1.0);
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = exp_dist(rng);
    v /= v.sum();
    // renormalize so the sum is exactly within the 1e-12 invariant
    v /= v.sum();
    return v;
}

}  // namespace

TabularMDP make_tabular_mdp(int n_states, int n_actions, double gamma, double r_max,
                            std::uint64_t seed, bool nonnegative_rewards) {
    if (n_states < 2 || n_actions < 2) throw ParameterError("make_tabular_mdp: need >= 2 states and actions");
    if (gamma < 0.0 || gamma >= 1.0) throw ParameterError("make_tabular_mdp: gamma must lie in [0,1)");
    if (r_max <= 0.0) throw ParameterError("make_tabular_mdp: r_max must be positive");

    auto rng = make_rng(seed);
    TabularMDP m;
    m.n_states = n_states;
    m.n_actions = n_actions;
    m.gamma = gamma;
    m.r_max = r_max;
    m.P.assign(n_states, std::vector<Vec>(n_actions));
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) m.P[s][a] = sample_simplex(n_states, rng);
    m.r.resize(n_states, n_actions);
    std::uniform_real_distribution<double> rdist(nonnegative_rewards ? 0.0 : -r_max, r_max);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) m.r(s, a) = rdist(rng);
    m.rho0 = sample_simplex(n_states, rng);
    m.validate();
    return m;
}

TabularPolicy uniform_policy(int n_states, int n_actions) {
    return Mat::Constant(n_states, n_actions, 1.0 / n_actions);
}

TabularPolicy random_policy(int n_states, int n_actions, std::uint64_t seed) {
    auto rng = make_rng(seed);
    Mat pi(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) pi.row(s) = sample_simplex(n_actions, rng).transpose();
    return pi;
}

TabularPolicy greedy_policy_from_q(const Mat& q) {
    Mat pi = Mat::Zero(q.rows(), q.cols());
    for (int s = 0; s < q.rows(); ++s) {
        int best = 0;
        for (int a = 1; a < q.cols(); ++a)
            if (q(s, a) > q(s, best)) best = a;  // ties keep the lowest index
        pi(s, best) = 1.0;
    }
    return pi;
}

Vec policy_values(const std::vector<std::vector<Vec>>& P, const Mat& r, double gamma,
                  const TabularPolicy& pi) {
    const int n = (int)P.size();
    Mat p_pi = Mat::Zero(n, n);
    Vec r_pi = Vec::Zero(n);
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < (int)P[s].size(); ++a) {
            const double w = pi(s, a);
            if (w == 0.0) continue;
            p_pi.row(s) += w * P[s][a].transpose();
            r_pi[s] += w * r(s, a);
        }
    }
    Mat system = Mat::Identity(n, n) - gamma * p_pi;
    Vec v = system.partialPivLu().solve(r_pi);
    const double residual = (system * v - r_pi).cwiseAbs().maxCoeff();
    if (!v.allFinite() || residual > 1e-10)
        throw NumericError("policy_values: linear solve failed, residual " + std::to_string(residual));
    return v;
}

double exact_return(const std::vector<std::vector<Vec>>& P, const Mat& r, const Vec& rho0,
                    double gamma, const TabularPolicy& pi) {
    return rho0.dot(policy_values(P, r, gamma, pi));
}

double exact_return(const TabularMDP& mdp, const TabularPolicy& pi) {
    return exact_return(mdp.P, mdp.r, mdp.rho0, mdp.gamma, pi);
}

Mat value_iteration_q(const TabularMDP& mdp, double tol, int max_iters) {
    Mat q = Mat::Zero(mdp.n_states, mdp.n_actions);
    for (int it = 0; it < max_iters; ++it) {
        Vec v(mdp.n_states);
        for (int s = 0; s < mdp.n_states; ++s) v[s] = q.row(s).maxCoeff();
        Mat q_next(mdp.n_states, mdp.n_actions);
        for (int s = 0; s < mdp.n_states; ++s)
            for (int a = 0; a < mdp.n_actions; ++a)
                q_next(s, a) = mdp.r(s, a) + mdp.gamma * mdp.P[s][a].dot(v);
        const double delta = (q_next - q).cwiseAbs().maxCoeff();
        q = q_next;
        if (delta < tol) break;
    }
    return q;
}

TabularPolicy optimal_policy(const TabularMDP& mdp) {
    // Policy iteration with exact evaluation; value iteration seeds the start.
    TabularPolicy pi = greedy_policy_from_q(value_iteration_q(mdp, 1e-10));
    for (int it = 0; it < 1000; ++it) {
        Vec v = policy_values(mdp.P, mdp.r, mdp.gamma, pi);
        Mat q(mdp.n_states, mdp.n_actions);
        for (int s = 0; s < mdp.n_states; ++s)
            for (int a = 0; a < mdp.n_actions; ++a)
                q(s, a) = mdp.r(s, a) + mdp.gamma * mdp.P[s][a].dot(v);
        TabularPolicy next = greedy_policy_from_q(q);
        if (next == pi) break;
        pi = next;
    }
    return pi;
}

EnvDescriptor tabular_descriptor(const TabularMDP& mdp) {
    EnvDescriptor d;
    d.env_id = "tabular";
    d.state_dim = 1;
    d.action_dim = 1;
    d.n_states = mdp.n_states;
    d.n_actions = mdp.n_actions;
    return d;
}

namespace {

int sample_categorical(const Vec& p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double x = u(rng);
    for (int i = 0; i < p.size(); ++i) {
        x -= p[i];
        if (x <= 0.0) return i;
    }
    return (int)p.size() - 1;
}

}  // namespace

Dataset collect_dataset(const TabularMDP& mdp, const TabularPolicy& behavior,
                        std::size_t n_transitions, std::uint64_t seed,
                        int episode_len, const std::string& behavior_tag) {
    if (n_transitions < 1) throw ParameterError("collect_dataset: n_transitions must be >= 1");
    if (episode_len < 1) throw ParameterError("collect_dataset: episode_len must be >= 1");
    auto rng = make_rng(seed);
    Dataset ds;
    ds.env = tabular_descriptor(mdp);
    ds.behavior_tag = behavior_tag;
    ds.transitions.reserve(n_transitions);

    int s = sample_categorical(mdp.rho0, rng);
    int t = 0;
    while (ds.transitions.size() < n_transitions) {
        int a = sample_categorical(behavior.row(s).transpose(), rng);
        int s_next = sample_categorical(mdp.P[s][a], rng);
        ++t;
        const bool done = (t >= episode_len);
        Vec vs(1), va(1), vn(1);
        vs[0] = s;
        va[0] = a;
        vn[0] = s_next;
        ds.transitions.push_back({vs, va, mdp.r(s, a), vn, done});
        if (done) {
            s = sample_categorical(mdp.rho0, rng);
            t = 0;
        } else {
            s = s_next;
        }
    }
    ds.start_state_pool.resize(ds.transitions.size());
    for (std::size_t i = 0; i < ds.transitions.size(); ++i) ds.start_state_pool[i] = i;
    return ds;
}

EmpiricalModel estimate_empirical_model(const TabularMDP& mdp, const Dataset& ds) {
    if (ds.empty()) throw DataError("estimate_empirical_model: empty dataset");
    const int n = mdp.n_states;
    std::vector<std::vector<Vec>> counts(n, std::vector<Vec>(mdp.n_actions, Vec::Zero(n)));
    Vec start_counts = Vec::Zero(n);
    bool episode_start = true;
    for (const auto& tr : ds.transitions) {
        const int s = (int)tr.s[0];
        const int a = (int)tr.a[0];
        const int s2 = (int)tr.s_next[0];
        if (episode_start) start_counts[s] += 1.0;
        counts[s][a][s2] += 1.0;
        episode_start = tr.done;
    }
    EmpiricalModel m;
    m.P.assign(n, std::vector<Vec>(mdp.n_actions));
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) {
            const double total = counts[s][a].sum();
            m.P[s][a] = total > 0.0 ? Vec(counts[s][a] / total) : Vec(Vec::Constant(n, 1.0 / n));
        }
    m.rho0 = start_counts.sum() > 0.0 ? Vec(start_counts / start_counts.sum())
                                      : Vec(Vec::Constant(n, 1.0 / n));
    return m;
}

double tv_distance(const Vec& p, const Vec& q) {
    if (p.size() != q.size()) throw ParameterError("tv_distance: length mismatch");
    auto check = [](const Vec& v) {
        if (v.minCoeff() < -1e-12 || std::abs(v.sum() - 1.0) > 1e-9)
            throw ParameterError("tv_distance: input is not a probability vector");
    };
    check(p);
    check(q);
    return 0.5 * (p - q).cwiseAbs().sum();
}

}  // namespace tatu
