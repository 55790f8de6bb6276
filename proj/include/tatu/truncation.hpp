#pragma once

#include "tatu/ensemble.hpp"
#include "tatu/tabular.hpp"
#include "tatu/types.hpp"

namespace tatu {

enum class AccumulationMode { undiscounted, discounted };

struct TruncationConfig {
    double alpha = 2.0;        // threshold strength, epsilon = max_u / alpha
    double lambda_pen = 1.0;   // per-transition uncertainty penalty
    double kappa = 0.0;        // extra penalty at the truncation state
    double gamma = 0.99;
    int horizon_h = 5;
    AccumulationMode accumulation = AccumulationMode::undiscounted;
    UncertaintyConfig quantifier;

    void validate() const {
        if (alpha < 1.0) throw ParameterError("TruncationConfig: alpha must be >= 1");
        if (lambda_pen < 0.0 || kappa < 0.0) throw ParameterError("TruncationConfig: penalties must be >= 0");
        if (gamma < 0.0 || gamma >= 1.0) throw ParameterError("TruncationConfig: gamma must lie in [0,1)");
        if (horizon_h < 1) throw ParameterError("TruncationConfig: horizon must be >= 1");
    }
};

// Running accumulated uncertainty U_t and the latched truncation flag.
struct TruncationState {
    double u_accum = 0.0;
    int step_t = 0;
    bool truncated = false;
};

struct Threshold {
    double epsilon = 0.0;
    double source_max_u = 0.0;
    double alpha_used = 1.0;
    UncertaintyQuantifier quantifier = UncertaintyQuantifier::mopo;
};

Threshold compute_threshold(const DynamicsEnsemble& ensemble, const Dataset& dataset,
                            const TruncationConfig& config);

// Adds this step's uncertainty (gamma^t-weighted in discounted mode) and advances t.
TruncationState accumulate_step(const TruncationState& state, double u_t,
                                const TruncationConfig& config);

// 0 while U <= epsilon (boundary inclusive), 1 afterwards.
int truncation_indicator(double u_accum, double epsilon);

double pessimistic_reward(double r, double u, const TruncationConfig& config, bool truncated);

// Exact tabular pessimistic MDP: chosen dynamics plus TV-based uncertainty,
// penalized rewards, and truncation once the accumulated uncertainty passes
// epsilon. Evaluated exactly by theory-oracle routines.
struct PessimisticTabularMDP {
    int n_states = 0;
    int n_actions = 0;
    std::vector<std::vector<Vec>> dynamics;  // true P for M_p, learned P for the hat variant
    Vec rho_init;
    Mat u;  // u(s,a) = D_TV(learned, true), shared by both variants
    Mat r;
    double lambda_pen = 0.0;
    double kappa = 0.0;
    double epsilon = 0.0;
    double gamma = 0.99;
    int horizon_cap = 0;  // 0 = unbounded
    AccumulationMode accumulation = AccumulationMode::discounted;
};

struct PessimisticPair {
    PessimisticTabularMDP true_dyn;     // M_p
    PessimisticTabularMDP learned_dyn;  // M_hat_p
};

PessimisticPair build_pessimistic_tabular(const TabularMDP& true_mdp,
                                          const std::vector<std::vector<Vec>>& learned_P,
                                          const Vec& learned_rho0, double lambda_pen,
                                          double kappa, double epsilon, int horizon_cap = 0);

}  // namespace tatu
