#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tatu/pointmass.hpp"
#include "tatu/rng.hpp"
#include "tatu/tabular.hpp"

using namespace tatu;

TEST_CASE("random tabular MDPs satisfy the simplex invariants") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        TabularMDP m = make_tabular_mdp(6, 3, 0.99, 1.0, seed);
        for (int s = 0; s < m.n_states; ++s)
            for (int a = 0; a < m.n_actions; ++a) {
                CHECK(std::abs(m.P[s][a].sum() - 1.0) <= 1e-12);
                CHECK(m.P[s][a].minCoeff() >= 0.0);
            }
        CHECK(std::abs(m.rho0.sum() - 1.0) <= 1e-12);
        CHECK(m.r.cwiseAbs().maxCoeff() <= 1.0);
    }
    TabularMDP nn = make_tabular_mdp(4, 2, 0.9, 2.0, 7, true);
    CHECK(nn.r.minCoeff() >= 0.0);
}

TEST_CASE("exact_return on constant rewards is the geometric series") {
    TabularMDP m = make_tabular_mdp(5, 3, 0.9, 1.0, 11);
    m.r.setConstant(0.4);
    const TabularPolicy pi = random_policy(5, 3, 12);
    CHECK(exact_return(m, pi) == doctest::Approx(0.4 / (1.0 - 0.9)).epsilon(1e-12));
}

TEST_CASE("exact_return at gamma = 0 is the one-step expected reward") {
    TabularMDP m = make_tabular_mdp(4, 2, 0.9, 1.0, 13);
    m.gamma = 0.0;
    const TabularPolicy pi = random_policy(4, 2, 14);
    double expect = 0.0;
    for (int s = 0; s < 4; ++s)
        for (int a = 0; a < 2; ++a) expect += m.rho0[s] * pi(s, a) * m.r(s, a);
    CHECK(exact_return(m, pi) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("exact_return matches value iteration on a random 8-state MDP") {
    TabularMDP m = make_tabular_mdp(8, 3, 0.95, 1.0, 21);
    TabularPolicy pi = optimal_policy(m);
    Mat q = value_iteration_q(m, 1e-14, 5000000);
    Vec v(m.n_states);
    for (int s = 0; s < m.n_states; ++s) v[s] = q.row(s).maxCoeff();
    CHECK(exact_return(m, pi) == doctest::Approx(m.rho0.dot(v)).epsilon(1e-10));
}

TEST_CASE("exact_return is linear in the rewards") {
    TabularMDP m = make_tabular_mdp(6, 3, 0.97, 1.0, 31);
    const TabularPolicy pi = random_policy(6, 3, 32);
    const double j = exact_return(m, pi);
    TabularMDP scaled = m;
    scaled.r *= 3.5;
    scaled.r_max *= 3.5;
    CHECK(exact_return(scaled, pi) == doctest::Approx(3.5 * j).epsilon(1e-12));
}

TEST_CASE("tv_distance tabulated cases") {
    Vec p(2), q(2);
    p << 0.5, 0.5;
    q << 0.5, 0.5;
    CHECK(tv_distance(p, q) == 0.0);
    q << 1.0, 0.0;
    CHECK(tv_distance(p, q) == doctest::Approx(0.5).epsilon(1e-15));
    Vec a(4), b(4);
    a << 0.5, 0.5, 0.0, 0.0;
    b << 0.0, 0.0, 0.5, 0.5;
    CHECK(tv_distance(a, b) == doctest::Approx(1.0).epsilon(1e-15));
    Vec bad(2);
    bad << 0.7, 0.7;
    CHECK_THROWS_AS(tv_distance(p, bad), ParameterError);
}

TEST_CASE("greedy_policy_from_q breaks ties toward the lowest action index") {
    Mat q(2, 3);
    q << 1.0, 1.0, 0.5, 0.2, 0.9, 0.9;
    TabularPolicy pi = greedy_policy_from_q(q);
    CHECK(pi(0, 0) == 1.0);
    CHECK(pi(1, 1) == 1.0);
}

TEST_CASE("tabular dataset collection is deterministic and episode-structured") {
    TabularMDP m = make_tabular_mdp(5, 3, 0.99, 1.0, 41);
    const TabularPolicy behavior = uniform_policy(5, 3);
    Dataset a = collect_dataset(m, behavior, 500, 99, 10, "uniform");
    Dataset b = collect_dataset(m, behavior, 500, 99, 10, "uniform");
    REQUIRE(a.size() == 500);
    CHECK(a.env.env_id == "tabular");
    CHECK(a.behavior_tag == "uniform");
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.transitions[i].s[0] == b.transitions[i].s[0]);
        CHECK(a.transitions[i].done == ((i + 1) % 10 == 0));
    }
    // Chained states within an episode.
    for (std::size_t i = 0; i + 1 < a.size(); ++i)
        if (!a.transitions[i].done)
            CHECK(a.transitions[i].s_next[0] == a.transitions[i + 1].s[0]);
}

TEST_CASE("empirical model matches hand counts on a planted dataset") {
    TabularMDP m = make_tabular_mdp(3, 2, 0.9, 1.0, 51);
    Dataset ds;
    ds.env = tabular_descriptor(m);
    auto add = [&](int s, int a, int s2, bool done) {
        Vec vs(1), va(1), vn(1);
        vs[0] = s;
        va[0] = a;
        vn[0] = s2;
        ds.transitions.push_back({vs, va, 0.0, vn, done});
    };
    // Episode 1 starts at 0; episode 2 starts at 2.
    add(0, 1, 1, false);
    add(1, 1, 2, true);
    add(2, 0, 2, false);
    add(2, 0, 1, true);

    EmpiricalModel em = estimate_empirical_model(m, ds);
    CHECK(em.rho0[0] == doctest::Approx(0.5));
    CHECK(em.rho0[2] == doctest::Approx(0.5));
    CHECK(em.P[2][0][2] == doctest::Approx(0.5));
    CHECK(em.P[2][0][1] == doctest::Approx(0.5));
    CHECK(em.P[0][1][1] == doctest::Approx(1.0));
    // Unvisited rows fall back to uniform.
    CHECK(em.P[0][0][0] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("point-mass dynamics follow the double integrator") {
    PointMassEnv env;
    Vec s(4), a(2), noise = Vec::Zero(2);
    s << 1.0, -0.5, 0.2, 0.1;
    a << 0.5, -1.0;
    Vec s2 = env.step_state(s, a, noise);
    const double vx = 0.2 + 0.1 * 0.5;
    const double vy = 0.1 + 0.1 * -1.0;
    CHECK(s2[2] == doctest::Approx(vx).epsilon(1e-15));
    CHECK(s2[3] == doctest::Approx(vy).epsilon(1e-15));
    CHECK(s2[0] == doctest::Approx(1.0 + 0.1 * vx).epsilon(1e-15));
    CHECK(s2[1] == doctest::Approx(-0.5 + 0.1 * vy).epsilon(1e-15));
    CHECK(env.reward(s2) ==
          doctest::Approx(-std::hypot(s2[0] - 2.0, s2[1] - 2.0)).epsilon(1e-15));
}

TEST_CASE("point-mass actions are clipped to the bound") {
    PointMassEnv env;
    Vec a(2);
    a << 3.0, -7.0;
    Vec c = env.clip_action(a);
    CHECK(c[0] == 1.0);
    CHECK(c[1] == -1.0);
}

TEST_CASE("point-mass behavior tiers produce bounded actions and valid datasets") {
    PointMassEnv env;
    for (const std::string tier : {"random", "medium", "expert"}) {
        Dataset ds = collect_dataset(env, pointmass_policy_by_tier(env, tier), 300, 7, tier);
        REQUIRE(ds.size() == 300);
        CHECK(ds.env.env_id == "pointmass");
        for (const auto& tr : ds.transitions) {
            CHECK(tr.a.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
            CHECK(tr.s.size() == 4);
        }
    }
    CHECK_THROWS_AS(pointmass_policy_by_tier(env, "nope"), ParameterError);
}

TEST_CASE("expert tier reaches much closer to the goal than random") {
    PointMassEnv env;
    auto run_tier = [&](const std::string& tier) {
        auto policy = pointmass_policy_by_tier(env, tier);
        auto rng = make_rng(123);
        double total = 0.0;
        for (int ep = 0; ep < 5; ++ep) {
            Vec s = env.reset(rng);
            for (int t = 0; t < env.horizon; ++t)
                s = env.step_state(s, env.clip_action(policy(s, rng)), rng);
            total += std::hypot(s[0] - env.goal[0], s[1] - env.goal[1]);
        }
        return total / 5.0;
    };
    const double expert = run_tier("expert");
    const double random = run_tier("random");
    CHECK(expert < 0.2);
    CHECK(expert < random);
}

TEST_CASE("normalized_score follows the D4RL convention") {
    CHECK(normalized_score(5.0, 0.0, 10.0) == doctest::Approx(50.0));
    CHECK(normalized_score(-1.0, -1.0, 3.0) == doctest::Approx(0.0));
    CHECK_THROWS_AS(normalized_score(1.0, 2.0, 2.0), ParameterError);
}
