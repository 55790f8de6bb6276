#pragma once

#include <cstdint>

#include "tatu/nn.hpp"
#include "tatu/types.hpp"

namespace tatu {

struct CvaeConfig {
    int latent_dim = 0;  // 0 = 2 * action_dim
    std::vector<int> hidden{64, 64};
    int epochs = 30;
    int batch_size = 128;
    double lr = 1e-3;
    double lv_min = -8.0;
    double lv_max = 4.0;
    double z_clip = 2.5;
};

struct CvaeModel {
    nn::Mlp encoder;  // (s,a) -> [latent mean | raw latent log-variance]
    nn::Mlp decoder;  // (s,z) -> pre-squash action
    int state_dim = 0;
    int action_dim = 0;
    int latent_dim = 0;
    double action_bound = 1.0;
    double lv_min = -8.0;
    double lv_max = 4.0;
    double z_clip = 2.5;
    std::vector<double> loss_history;  // mean total loss per epoch

    Vec decode(const Vec& s, const Vec& z) const;
    Vec sample_action(const Vec& s, std::mt19937_64& rng) const;
};

struct CvaeLoss {
    double total = 0.0;
    double reconstruction = 0.0;
    double kl = 0.0;
};

// Mean loss over the batch with caller-supplied reparametrization noise (one
// latent_dim vector per sample). Gradients accumulate into the two nets'
// structures when provided.
CvaeLoss cvae_loss(const CvaeModel& model, const std::vector<std::pair<Vec, Vec>>& batch,
                   const std::vector<Vec>& noise, nn::Mlp::Grads* enc_grads = nullptr,
                   nn::Mlp::Grads* dec_grads = nullptr);

CvaeModel train_cvae(const Dataset& dataset, const CvaeConfig& config, std::uint64_t seed);

}  // namespace tatu
