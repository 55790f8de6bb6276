#pragma once

#include <cstdint>
#include <deque>
#include <functional>

#include "tatu/ensemble.hpp"
#include "tatu/truncation.hpp"
#include "tatu/types.hpp"

namespace tatu {

// Where the rollout actions come from: an external learned policy or the CVAE.
enum class ActionSource { learned_policy, cvae };

ActionSource action_source_from_string(const std::string& name);

// Adapter over both sources; draws from a caller-owned stream.
using ActionSampler = std::function<Vec(const Vec& s, std::mt19937_64& rng)>;

// Known environment reward rule applied to synthetic transitions before
// penalization.
using RewardFn = std::function<double(const Vec& s, const Vec& a, const Vec& s_next)>;

struct Provenance {
    std::size_t trajectory_id = 0;
    int step_index = 0;   // consecutive from 0 within a trajectory
    double u = 0.0;       // this step's uncertainty
    double u_accum = 0.0; // accumulated U after this step, <= epsilon by admission
};

// D_model: admitted synthetic transitions with per-transition provenance.
struct ModelBuffer {
    std::vector<Transition> transitions;
    std::vector<Provenance> provenance;
    std::size_t capacity = 1000000;

    std::size_t size() const { return transitions.size(); }
    bool empty() const { return transitions.empty(); }
    void append(Transition tr, Provenance pv);  // FIFO eviction at capacity
    void merge(const ModelBuffer& other);
};

struct AugmentationConfig {
    TruncationConfig truncation;
    int batch_size = 256;       // B
    double eta = 0.5;           // real-data ratio
    ActionSource action_source = ActionSource::cvae;
    int n_start_states = 100;   // per epoch
    bool apply_kappa_to_last_admitted = false;
    std::size_t buffer_capacity = 1000000;
    int n_threads = 1;

    void validate() const {
        truncation.validate();
        if (batch_size < 1) throw ParameterError("AugmentationConfig: batch_size must be >= 1");
        if (eta < 0.0 || eta > 1.0) throw ParameterError("AugmentationConfig: eta must lie in [0,1]");
        if (n_start_states < 1) throw ParameterError("AugmentationConfig: n_start_states must be >= 1");
        if (n_threads < 1) throw ParameterError("AugmentationConfig: n_threads must be >= 1");
    }
};

struct SyntheticTrajectory {
    std::size_t trajectory_id = 0;
    std::vector<Transition> transitions;
    std::vector<double> u;        // per-step uncertainty
    std::vector<double> u_accum;  // accumulated U after each admitted step
    bool truncated = false;       // stopped by the threshold rather than by h
};

// One rollout from s0 of at most h steps; the violating transition is dropped
// (optionally its kappa lands on the last admitted one instead).
SyntheticTrajectory generate_trajectory(const DynamicsEnsemble& ensemble, const Vec& s0,
                                        const ActionSampler& sampler, const RewardFn& reward,
                                        const Threshold& threshold,
                                        const AugmentationConfig& config, std::uint64_t seed,
                                        std::size_t trajectory_id);

// Alg. 1 lines 7-19 over n_start_states starts drawn from the dataset. Each
// trajectory owns a seed derived from (seed, trajectory_id), so thread count
// does not change the produced multiset.
std::pair<std::vector<SyntheticTrajectory>, ModelBuffer> generate_truncated_trajectories(
    const DynamicsEnsemble& ensemble, const Dataset& dataset, const ActionSampler& sampler,
    const RewardFn& reward, const Threshold& threshold, const AugmentationConfig& config,
    std::uint64_t seed, std::size_t trajectory_id_base = 0);

// floor(eta*B) real + remainder synthetic, uniform with replacement from each
// pool. Empty buffer falls back to all-real (notice flag set, notice logged).
std::vector<Transition> mixed_batch(const Dataset& dataset, const ModelBuffer& buffer, double eta,
                                    int batch_size, std::uint64_t seed,
                                    bool* fell_back_to_real = nullptr);

struct AugmentationStats {
    std::size_t n_trajectories = 0;
    std::size_t n_transitions = 0;
    double mean_trajectory_length = 0.0;
    double rejection_rate = 0.0;  // fraction of trajectories stopped by truncation
    std::vector<std::size_t> u_histogram;  // 20 bins over [0, source_max_u]
    double u_histogram_width = 0.0;
};

// Exact recomputation from buffer contents; independent of how it was filled.
AugmentationStats buffer_statistics(const ModelBuffer& buffer, const Threshold& threshold,
                                    const AugmentationConfig& config);

struct AugmentationRun {
    ModelBuffer buffer;
    AugmentationStats stats;
};

AugmentationRun run_augmentation_epochs(const DynamicsEnsemble& ensemble, const Dataset& dataset,
                                        const ActionSampler& sampler, const RewardFn& reward,
                                        const Threshold& threshold,
                                        const AugmentationConfig& config, int n_epochs,
                                        std::uint64_t seed);

}  // namespace tatu
