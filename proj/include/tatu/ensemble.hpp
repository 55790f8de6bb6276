#pragma once

#include <cstdint>
#include <limits>
#include <utility>

#include "tatu/nn.hpp"
#include "tatu/types.hpp"

namespace tatu {

struct EnsembleConfig {
    int n_total = 7;
    int n_elites = 5;
    int validation_size = 1000;  // scaled down for small datasets
    int epochs = 40;
    int batch_size = 256;
    double lr = 1e-3;
    std::vector<int> hidden{64, 64};
    double lv_min = -10.0;
    double lv_max = 2.0;
};

enum class UncertaintyQuantifier { mopo, morel };

struct UncertaintyConfig {
    UncertaintyQuantifier quantifier = UncertaintyQuantifier::mopo;
    bool frobenius_sum_abs = false;   // paper-printed sqrt(sum |entry|) variant
    bool stddev_entries = false;      // use std-devs instead of variances as matrix entries
    double u_max = std::numeric_limits<double>::infinity();
};

UncertaintyQuantifier quantifier_from_string(const std::string& name);

// Per-member Gaussians over the next state (means already shifted by +s).
struct GaussianPrediction {
    std::vector<Vec> means;
    std::vector<Vec> vars;
};

struct Normalizer {
    Vec mean;
    Vec inv_std;
    Vec apply(const Vec& x) const { return (x - mean).cwiseProduct(inv_std); }
};

struct DynamicsEnsemble {
    std::vector<nn::Mlp> members;  // output layout: [state_delta | raw log-variance]
    std::vector<int> elite_indices;
    Normalizer input_norm;
    int state_dim = 0;
    int action_dim = 0;
    double lv_min = -10.0;
    double lv_max = 2.0;
    std::vector<double> validation_losses;
    std::vector<std::vector<double>> train_history;  // per member, per epoch mean NLL

    bool trained() const { return !elite_indices.empty(); }

    // Mean/variance for one member (not shifted-by-s internals exposed).
    std::pair<Vec, Vec> member_prediction(int member, const Vec& s, const Vec& a) const;
    // All elite members.
    GaussianPrediction predict(const Vec& s, const Vec& a) const;
    // Uniformly picks one elite and samples its Gaussian.
    std::pair<Vec, GaussianPrediction> predict_next(const Vec& s, const Vec& a,
                                                    std::mt19937_64& rng) const;
};

DynamicsEnsemble train_ensemble(const Dataset& dataset, const EnsembleConfig& config,
                                std::uint64_t seed);

// Lowest-validation-NLL members; ties resolved toward the lower index.
std::vector<int> select_elites(const std::vector<double>& validation_losses, int n_elites);

double uncertainty_mopo(const GaussianPrediction& pred, const UncertaintyConfig& config = {});
double uncertainty_morel(const GaussianPrediction& pred);
double uncertainty(const GaussianPrediction& pred, const UncertaintyConfig& config);

double dataset_max_uncertainty(const DynamicsEnsemble& ensemble, const Dataset& dataset,
                               const UncertaintyConfig& config);

}  // namespace tatu
