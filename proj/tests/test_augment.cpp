#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "tatu/augment.hpp"
#include "tatu/rng.hpp"

using namespace tatu;

namespace {

// Constant morel uncertainty c = ||d||; rollouts stay near the start state.
DynamicsEnsemble constant_u_ensemble(double dx, double dy) {
    Vec d0 = Vec::Zero(2), d1(2);
    d1 << dx, dy;
    return testing::planted_ensemble(2, 1, {d0, d1});
}

// Member 1 drifts by 0.1*s, so u(s,a) = 0.1*||s|| varies across states.
DynamicsEnsemble state_scaled_ensemble() {
    DynamicsEnsemble ens = testing::planted_ensemble(2, 1, {Vec::Zero(2), Vec::Zero(2)});
    ens.members[1].layers[0].W.block(0, 0, 2, 2) = 0.1 * Mat::Identity(2, 2);
    return ens;
}

AugmentationConfig base_config() {
    AugmentationConfig cfg;
    cfg.truncation.quantifier.quantifier = UncertaintyQuantifier::morel;
    cfg.truncation.accumulation = AccumulationMode::undiscounted;
    cfg.truncation.horizon_h = 5;
    cfg.n_start_states = 20;
    return cfg;
}

const ActionSampler kZeroAction = [](const Vec&, std::mt19937_64&) -> Vec {
    return Vec::Zero(1);
};
const RewardFn kUnitReward = [](const Vec&, const Vec&, const Vec&) { return 1.0; };

}  // namespace

TEST_CASE("infinite threshold yields full-length trajectories") {
    DynamicsEnsemble ens = constant_u_ensemble(0.3, 0.4);  // c = 0.5
    AugmentationConfig cfg = base_config();
    cfg.truncation.lambda_pen = 2.0;
    Threshold th;
    th.epsilon = std::numeric_limits<double>::infinity();
    th.source_max_u = 0.5;

    SyntheticTrajectory traj =
        generate_trajectory(ens, Vec::Ones(2), kZeroAction, kUnitReward, th, cfg, 1, 0);
    REQUIRE(traj.transitions.size() == 5);
    CHECK_FALSE(traj.truncated);
    for (std::size_t j = 0; j < 5; ++j) {
        CHECK(traj.u[j] == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(traj.u_accum[j] == doctest::Approx(0.5 * (double)(j + 1)).epsilon(1e-14));
        // r_p = 1 - lambda*u = 1 - 2*0.5
        CHECK(traj.transitions[j].r == doctest::Approx(0.0).epsilon(1e-14));
        CHECK_FALSE(traj.transitions[j].done);
    }
    // Chained rollout states.
    for (std::size_t j = 0; j + 1 < 5; ++j)
        CHECK(traj.transitions[j].s_next == traj.transitions[j + 1].s);
}

TEST_CASE("zero threshold with positive uncertainty admits nothing") {
    DynamicsEnsemble ens = constant_u_ensemble(0.3, 0.4);
    AugmentationConfig cfg = base_config();
    Threshold th;  // epsilon = 0
    SyntheticTrajectory traj =
        generate_trajectory(ens, Vec::Ones(2), kZeroAction, kUnitReward, th, cfg, 1, 0);
    CHECK(traj.transitions.empty());
    CHECK(traj.truncated);
}

TEST_CASE("constant uncertainty truncates after floor(epsilon/c) steps") {
    DynamicsEnsemble ens = constant_u_ensemble(0.6, -0.8);  // c = 1
    AugmentationConfig cfg = base_config();
    Threshold th;
    th.epsilon = 2.5;
    SyntheticTrajectory traj =
        generate_trajectory(ens, Vec::Ones(2), kZeroAction, kUnitReward, th, cfg, 3, 0);
    // U = 1, 2 admitted; U = 3 > 2.5 drops the third transition.
    CHECK(traj.transitions.size() == 2);
    CHECK(traj.truncated);
    CHECK(traj.u_accum.back() <= 2.5);
}

TEST_CASE("kappa lands on the last admitted transition only when asked") {
    DynamicsEnsemble ens = constant_u_ensemble(0.6, -0.8);
    AugmentationConfig cfg = base_config();
    cfg.truncation.kappa = 7.0;
    Threshold th;
    th.epsilon = 2.5;
    SyntheticTrajectory plain =
        generate_trajectory(ens, Vec::Ones(2), kZeroAction, kUnitReward, th, cfg, 3, 0);
    cfg.apply_kappa_to_last_admitted = true;
    SyntheticTrajectory shifted =
        generate_trajectory(ens, Vec::Ones(2), kZeroAction, kUnitReward, th, cfg, 3, 0);
    REQUIRE(plain.transitions.size() == 2);
    REQUIRE(shifted.transitions.size() == 2);
    CHECK(shifted.transitions[0].r == plain.transitions[0].r);
    CHECK(shifted.transitions[1].r == doctest::Approx(plain.transitions[1].r - 7.0));
}

TEST_CASE("every admitted transition satisfies the threshold contract") {
    DynamicsEnsemble ens = state_scaled_ensemble();
    Dataset ds = testing::linear_dataset(2, 1, 300, 0.2, 71);
    AugmentationConfig cfg = base_config();
    cfg.n_start_states = 50;
    Threshold th = compute_threshold(ens, ds, cfg.truncation);
    CHECK(th.epsilon > 0.0);

    auto [trajs, buffer] =
        generate_truncated_trajectories(ens, ds, kZeroAction, kUnitReward, th, cfg, 7);
    CHECK(buffer.size() > 0);
    for (const Provenance& pv : buffer.provenance) {
        CHECK(pv.u_accum <= th.epsilon);
        CHECK(pv.u >= 0.0);
    }
    // Step indices are consecutive within a trajectory.
    for (std::size_t i = 1; i < buffer.size(); ++i) {
        if (buffer.provenance[i].trajectory_id == buffer.provenance[i - 1].trajectory_id)
            CHECK(buffer.provenance[i].step_index == buffer.provenance[i - 1].step_index + 1);
        else
            CHECK(buffer.provenance[i].step_index == 0);
    }
}

TEST_CASE("buffer size is monotone non-increasing in alpha") {
    DynamicsEnsemble ens = state_scaled_ensemble();
    Dataset ds = testing::linear_dataset(2, 1, 300, 0.2, 72);
    AugmentationConfig cfg = base_config();
    cfg.n_start_states = 50;
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    for (double alpha : {1.0, 2.0, 3.0, 5.0}) {
        cfg.truncation.alpha = alpha;
        Threshold th = compute_threshold(ens, ds, cfg.truncation);
        auto [trajs, buffer] =
            generate_truncated_trajectories(ens, ds, kZeroAction, kUnitReward, th, cfg, 7);
        CHECK(buffer.size() <= prev);
        prev = buffer.size();
    }
}

TEST_CASE("buffer capacity evicts oldest entries first") {
    ModelBuffer buf;
    buf.capacity = 3;
    for (int i = 0; i < 5; ++i) {
        Transition tr;
        tr.s = Vec::Constant(1, (double)i);
        tr.a = Vec::Zero(1);
        tr.s_next = tr.s;
        Provenance pv;
        pv.trajectory_id = (std::size_t)i;
        buf.append(tr, pv);
    }
    REQUIRE(buf.size() == 3);
    CHECK(buf.transitions[0].s[0] == 2.0);
    CHECK(buf.transitions[2].s[0] == 4.0);
    CHECK(buf.provenance[0].trajectory_id == 2);
}

TEST_CASE("mixed batches honor the eta split") {
    // Real transitions carry r = +1, synthetic r = -1.
    Dataset ds = testing::linear_dataset(2, 1, 40, 0.1, 73);
    for (auto& tr : ds.transitions) tr.r = 1.0;
    ModelBuffer buf;
    for (int i = 0; i < 25; ++i) {
        Transition tr = ds.transitions[0];
        tr.r = -1.0;
        buf.append(tr, Provenance{});
    }

    auto count_real = [](const std::vector<Transition>& batch) {
        int n = 0;
        for (const auto& tr : batch)
            if (tr.r > 0.0) ++n;
        return n;
    };

    std::vector<Transition> b = mixed_batch(ds, buf, 0.7, 10, 5);
    REQUIRE(b.size() == 10);
    CHECK(count_real(b) == 7);
    CHECK(count_real(mixed_batch(ds, buf, 1.0, 16, 5)) == 16);
    CHECK(count_real(mixed_batch(ds, buf, 0.0, 16, 5)) == 0);

    // floor(0.5 * 5) = 2 real.
    CHECK(count_real(mixed_batch(ds, buf, 0.5, 5, 5)) == 2);

    CHECK_THROWS_AS(mixed_batch(ds, buf, 1.5, 10, 5), ParameterError);
    CHECK_THROWS_AS(mixed_batch(ds, buf, 0.5, 0, 5), ParameterError);
}

TEST_CASE("empty buffer falls back to an all-real batch with the flag set") {
    Dataset ds = testing::linear_dataset(2, 1, 40, 0.1, 74);
    for (auto& tr : ds.transitions) tr.r = 1.0;
    ModelBuffer empty;
    bool fell_back = false;
    std::vector<Transition> b = mixed_batch(ds, empty, 0.5, 8, 6, &fell_back);
    CHECK(fell_back);
    REQUIRE(b.size() == 8);
    for (const auto& tr : b) CHECK(tr.r == 1.0);

    // eta = 1 needs no synthetic data, so no fallback.
    mixed_batch(ds, empty, 1.0, 8, 6, &fell_back);
    CHECK_FALSE(fell_back);
}

TEST_CASE("thread count does not change the generated buffer") {
    DynamicsEnsemble ens = state_scaled_ensemble();
    Dataset ds = testing::linear_dataset(2, 1, 200, 0.2, 75);
    AugmentationConfig cfg = base_config();
    cfg.n_start_states = 40;
    Threshold th = compute_threshold(ens, ds, cfg.truncation);

    cfg.n_threads = 1;
    auto [t1, b1] = generate_truncated_trajectories(ens, ds, kZeroAction, kUnitReward, th, cfg, 8);
    cfg.n_threads = 4;
    auto [t4, b4] = generate_truncated_trajectories(ens, ds, kZeroAction, kUnitReward, th, cfg, 8);

    REQUIRE(b1.size() == b4.size());
    for (std::size_t i = 0; i < b1.size(); ++i) {
        CHECK(b1.transitions[i].s == b4.transitions[i].s);
        CHECK(b1.transitions[i].s_next == b4.transitions[i].s_next);
        CHECK(b1.transitions[i].r == b4.transitions[i].r);
        CHECK(b1.provenance[i].u_accum == b4.provenance[i].u_accum);
    }
}

TEST_CASE("generation is deterministic in the seed") {
    DynamicsEnsemble ens = state_scaled_ensemble();
    Dataset ds = testing::linear_dataset(2, 1, 200, 0.2, 76);
    AugmentationConfig cfg = base_config();
    Threshold th = compute_threshold(ens, ds, cfg.truncation);
    auto [ta, ba] = generate_truncated_trajectories(ens, ds, kZeroAction, kUnitReward, th, cfg, 9);
    auto [tb, bb] = generate_truncated_trajectories(ens, ds, kZeroAction, kUnitReward, th, cfg, 9);
    auto [tc, bc] = generate_truncated_trajectories(ens, ds, kZeroAction, kUnitReward, th, cfg, 10);
    REQUIRE(ba.size() == bb.size());
    for (std::size_t i = 0; i < ba.size(); ++i)
        CHECK(ba.transitions[i].s_next == bb.transitions[i].s_next);
    bool differs = bc.size() != ba.size();
    for (std::size_t i = 0; !differs && i < ba.size(); ++i)
        differs = ba.transitions[i].s != bc.transitions[i].s;
    CHECK(differs);
}

TEST_CASE("epoch runner accumulates and reports faithful statistics") {
    DynamicsEnsemble ens = state_scaled_ensemble();
    Dataset ds = testing::linear_dataset(2, 1, 200, 0.2, 77);
    AugmentationConfig cfg = base_config();
    cfg.n_start_states = 30;
    Threshold th = compute_threshold(ens, ds, cfg.truncation);

    AugmentationRun run =
        run_augmentation_epochs(ens, ds, kZeroAction, kUnitReward, th, cfg, 3, 11);
    CHECK(run.stats.n_trajectories == 90);
    CHECK(run.stats.n_transitions == run.buffer.size());
    CHECK(run.stats.mean_trajectory_length ==
          doctest::Approx((double)run.buffer.size() / 90.0).epsilon(1e-12));
    CHECK(run.stats.rejection_rate >= 0.0);
    CHECK(run.stats.rejection_rate <= 1.0);
    REQUIRE(run.stats.u_histogram.size() == 20);
    std::size_t total = 0;
    for (std::size_t c : run.stats.u_histogram) total += c;
    CHECK(total == run.buffer.size());

    CHECK_THROWS_AS(run_augmentation_epochs(ens, ds, kZeroAction, kUnitReward, th, cfg, 0, 11),
                    ParameterError);
}

TEST_CASE("action source names parse") {
    CHECK(action_source_from_string("cvae") == ActionSource::cvae);
    CHECK(action_source_from_string("learned_policy") == ActionSource::learned_policy);
    CHECK_THROWS_AS(action_source_from_string("other"), ParameterError);
}
