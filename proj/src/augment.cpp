#include "tatu/augment.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <thread>

#include "tatu/rng.hpp"

namespace tatu {

ActionSource action_source_from_string(const std::string& name) {
    if (name == "learned_policy") return ActionSource::learned_policy;
    if (name == "cvae") return ActionSource::cvae;
    throw ParameterError("unknown action source: " + name);
}

void ModelBuffer::append(Transition tr, Provenance pv) {
    if (capacity == 0) throw ParameterError("ModelBuffer: capacity must be >= 1");
    if (transitions.size() == capacity) {
        transitions.erase(transitions.begin());
        provenance.erase(provenance.begin());
    }
    transitions.push_back(std::move(tr));
    provenance.push_back(pv);
}

void ModelBuffer::merge(const ModelBuffer& other) {
    for (std::size_t i = 0; i < other.size(); ++i)
        append(other.transitions[i], other.provenance[i]);
}

SyntheticTrajectory generate_trajectory(const DynamicsEnsemble& ensemble, const Vec& s0,
                                        const ActionSampler& sampler, const RewardFn& reward,
                                        const Threshold& threshold,
                                        const AugmentationConfig& config, std::uint64_t seed,
                                        std::size_t trajectory_id) {
    if (!ensemble.trained()) throw DataError("generate_trajectory: untrained ensemble");
    const TruncationConfig& tc = config.truncation;
    auto rng = make_rng(seed);

    SyntheticTrajectory traj;
    traj.trajectory_id = trajectory_id;
    Vec s = s0;
    TruncationState state;
    for (int j = 0; j < tc.horizon_h; ++j) {
        Vec a = sampler(s, rng);
        auto [s_next, pred] = ensemble.predict_next(s, a, rng);
        const double u_j = uncertainty(pred, tc.quantifier);
        TruncationState next = accumulate_step(state, u_j, tc);
        if (truncation_indicator(next.u_accum, threshold.epsilon) == 1) {
            traj.truncated = true;
            if (config.apply_kappa_to_last_admitted && !traj.transitions.empty())
                traj.transitions.back().r -= tc.kappa;
            break;
        }
        Transition tr;
        tr.s = s;
        tr.a = a;
        tr.s_next = s_next;
        tr.r = pessimistic_reward(reward(s, a, s_next), u_j, tc, false);
        tr.done = false;
        traj.transitions.push_back(std::move(tr));
        traj.u.push_back(u_j);
        traj.u_accum.push_back(next.u_accum);
        state = next;
        s = s_next;
    }
    return traj;
}

std::pair<std::vector<SyntheticTrajectory>, ModelBuffer> generate_truncated_trajectories(
    const DynamicsEnsemble& ensemble, const Dataset& dataset, const ActionSampler& sampler,
    const RewardFn& reward, const Threshold& threshold, const AugmentationConfig& config,
    std::uint64_t seed, std::size_t trajectory_id_base) {
    config.validate();
    if (!ensemble.trained()) throw DataError("generate_truncated_trajectories: untrained ensemble");
    if (dataset.empty()) throw DataError("generate_truncated_trajectories: empty dataset");

    const int n = config.n_start_states;
    std::vector<Vec> starts(n);
    {
        auto start_rng = make_rng(derive_seed(seed, 0x57A7));
        std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
        for (int i = 0; i < n; ++i) starts[i] = dataset.transitions[pick(start_rng)].s;
    }

    std::vector<SyntheticTrajectory> trajs(n);
    auto work = [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            const std::size_t id = trajectory_id_base + (std::size_t)i;
            trajs[i] = generate_trajectory(ensemble, starts[i], sampler, reward, threshold,
                                           config, derive_seed(seed, 0x7000 + id), id);
        }
    };
    const int n_threads = std::min(config.n_threads, n);
    if (n_threads <= 1) {
        work(0, n);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errs(n_threads);
        const int chunk = (n + n_threads - 1) / n_threads;
        for (int t = 0; t < n_threads; ++t) {
            const int begin = t * chunk;
            const int end = std::min(n, begin + chunk);
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

    ModelBuffer delta;
    delta.capacity = config.buffer_capacity;
    for (const auto& traj : trajs) {
        for (std::size_t j = 0; j < traj.transitions.size(); ++j) {
            Provenance pv;
            pv.trajectory_id = traj.trajectory_id;
            pv.step_index = (int)j;
            pv.u = traj.u[j];
            pv.u_accum = traj.u_accum[j];
            delta.append(traj.transitions[j], pv);
        }
    }
    return {std::move(trajs), std::move(delta)};
}

std::vector<Transition> mixed_batch(const Dataset& dataset, const ModelBuffer& buffer, double eta,
                                    int batch_size, std::uint64_t seed, bool* fell_back_to_real) {
    if (dataset.empty()) throw DataError("mixed_batch: empty dataset");
    if (batch_size < 1) throw ParameterError("mixed_batch: batch_size must be >= 1");
    if (eta < 0.0 || eta > 1.0) throw ParameterError("mixed_batch: eta must lie in [0,1]");

    int n_real = (int)std::floor(eta * batch_size);
    int n_syn = batch_size - n_real;
    bool fallback = false;
    if (n_syn > 0 && buffer.empty()) {
        fallback = true;
        n_real = batch_size;
        n_syn = 0;
        std::clog << "mixed_batch: model buffer empty, falling back to all-real batch\n";
    }
    if (fell_back_to_real) *fell_back_to_real = fallback;

    auto rng = make_rng(seed);
    std::vector<Transition> batch;
    batch.reserve(batch_size);
    {
        std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
        for (int i = 0; i < n_real; ++i) batch.push_back(dataset.transitions[pick(rng)]);
    }
    if (n_syn > 0) {
        std::uniform_int_distribution<std::size_t> pick(0, buffer.size() - 1);
        for (int i = 0; i < n_syn; ++i) batch.push_back(buffer.transitions[pick(rng)]);
    }
    return batch;
}

AugmentationStats buffer_statistics(const ModelBuffer& buffer, const Threshold& threshold,
                                    const AugmentationConfig& config) {
    AugmentationStats st;
    st.n_transitions = buffer.size();
    constexpr int n_bins = 20;
    st.u_histogram.assign(n_bins, 0);
    st.u_histogram_width = threshold.source_max_u > 0.0 ? threshold.source_max_u / n_bins : 1.0;

    std::size_t n_trajs = 0, truncated = 0;
    for (std::size_t i = 0; i < buffer.size(); ++i) {
        const Provenance& pv = buffer.provenance[i];
        const double u = pv.u;
        int bin = (int)std::floor(u / st.u_histogram_width);
        if (bin >= n_bins) bin = n_bins - 1;
        if (bin < 0) bin = 0;
        ++st.u_histogram[(std::size_t)bin];
        const bool last_of_traj = i + 1 == buffer.size() ||
                                  buffer.provenance[i + 1].trajectory_id != pv.trajectory_id;
        if (last_of_traj) {
            ++n_trajs;
            if (pv.step_index + 1 < config.truncation.horizon_h) ++truncated;
        }
    }
    st.n_trajectories = n_trajs;
    st.mean_trajectory_length = n_trajs > 0 ? (double)st.n_transitions / (double)n_trajs : 0.0;
    st.rejection_rate = n_trajs > 0 ? (double)truncated / (double)n_trajs : 0.0;
    return st;
}

AugmentationRun run_augmentation_epochs(const DynamicsEnsemble& ensemble, const Dataset& dataset,
                                        const ActionSampler& sampler, const RewardFn& reward,
                                        const Threshold& threshold,
                                        const AugmentationConfig& config, int n_epochs,
                                        std::uint64_t seed) {
    if (n_epochs < 1) throw ParameterError("run_augmentation_epochs: n_epochs must be >= 1");
    AugmentationRun run;
    run.buffer.capacity = config.buffer_capacity;
    std::size_t n_empty_starts = 0;  // trajectories truncated before step 0
    std::size_t id_base = 0;
    for (int epoch = 0; epoch < n_epochs; ++epoch) {
        auto [trajs, delta] = generate_truncated_trajectories(
            ensemble, dataset, sampler, reward, threshold, config,
            derive_seed(seed, 0xE90 + (std::uint64_t)epoch), id_base);
        id_base += trajs.size();
        run.buffer.merge(delta);
        for (const auto& t : trajs)
            if (t.transitions.empty()) ++n_empty_starts;
    }
    run.stats = buffer_statistics(run.buffer, threshold, config);
    // Zero-length trajectories leave no provenance; fold them back in.
    const std::size_t total_trajs = run.stats.n_trajectories + n_empty_starts;
    if (total_trajs > 0) {
        run.stats.rejection_rate =
            (run.stats.rejection_rate * (double)run.stats.n_trajectories + (double)n_empty_starts) /
            (double)total_trajs;
        run.stats.mean_trajectory_length = (double)run.stats.n_transitions / (double)total_trajs;
        run.stats.n_trajectories = total_trajs;
    }
    return run;
}

}  // namespace tatu
