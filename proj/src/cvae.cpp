#include "tatu/cvae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tatu/rng.hpp"

namespace tatu {

Vec CvaeModel::decode(const Vec& s, const Vec& z) const {
    Vec x(state_dim + latent_dim);
    x << s, z;
    Vec raw = decoder.forward(x);
    return action_bound * raw.array().tanh().matrix();
}

Vec CvaeModel::sample_action(const Vec& s, std::mt19937_64& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec z(latent_dim);
    for (int i = 0; i < latent_dim; ++i) z[i] = std::clamp(normal(rng), -z_clip, z_clip);
    return decode(s, z);
}

CvaeLoss cvae_loss(const CvaeModel& model, const std::vector<std::pair<Vec, Vec>>& batch,
                   const std::vector<Vec>& noise, nn::Mlp::Grads* enc_grads,
                   nn::Mlp::Grads* dec_grads) {
    if (batch.empty()) throw ParameterError("cvae_loss: empty batch");
    if (noise.size() != batch.size()) throw ParameterError("cvae_loss: noise/batch size mismatch");
    const int L = model.latent_dim;
    const int sd = model.state_dim;
    const int ad = model.action_dim;

    CvaeLoss out;
    nn::Mlp::Cache enc_cache, dec_cache;
    const double inv_n = 1.0 / (double)batch.size();

    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Vec& s = batch[i].first;
        const Vec& a = batch[i].second;
        if (s.size() != sd || a.size() != ad) throw ParameterError("cvae_loss: dimension mismatch");

        Vec enc_in(sd + ad);
        enc_in << s, a;
        Vec e = model.encoder.forward(enc_in, enc_cache);
        Vec mu = e.head(L);
        Vec raw_lv = e.tail(L);
        Vec lv = nn::soft_clamp(raw_lv, model.lv_min, model.lv_max);
        Vec sigma = (0.5 * lv).array().exp().matrix();
        Vec z = mu + sigma.cwiseProduct(noise[i]);

        Vec dec_in(sd + L);
        dec_in << s, z;
        Vec raw_a = model.decoder.forward(dec_in, dec_cache);
        Vec tanh_a = raw_a.array().tanh().matrix();
        Vec a_hat = model.action_bound * tanh_a;

        const double recon = (a - a_hat).squaredNorm();
        const double kl = nn::diag_gaussian_kl(mu, lv);
        out.reconstruction += recon;
        out.kl += kl;

        if (enc_grads && dec_grads) {
            Vec da_hat = -2.0 * (a - a_hat);
            Vec draw_a = da_hat.cwiseProduct(
                model.action_bound * (1.0 - tanh_a.array().square()).matrix());
            Vec ddec_in = model.decoder.backward(dec_cache, inv_n * draw_a, *dec_grads);
            Vec dz = ddec_in.tail(L) / inv_n;  // undo the batch weight, reapplied below

            Vec dmu_kl, dlv_kl;
            nn::diag_gaussian_kl_backward(mu, lv, dmu_kl, dlv_kl);
            Vec dmu = dz + dmu_kl;
            Vec dlv = dz.cwiseProduct(noise[i]).cwiseProduct(0.5 * sigma) + dlv_kl;

            Vec de(2 * L);
            de.head(L) = dmu;
            de.tail(L) = nn::soft_clamp_backward(raw_lv, model.lv_min, model.lv_max, dlv);
            model.encoder.backward(enc_cache, inv_n * de, *enc_grads);
        }
    }
    out.reconstruction *= inv_n;
    out.kl *= inv_n;
    out.total = out.reconstruction + out.kl;
    if (!std::isfinite(out.total)) throw NumericError("cvae_loss: non-finite loss");
    return out;
}

CvaeModel train_cvae(const Dataset& dataset, const CvaeConfig& config, std::uint64_t seed) {
    if (dataset.empty()) throw DataError("train_cvae: empty dataset");
    auto rng = make_rng(derive_seed(seed, 0xCAE));

    CvaeModel model;
    model.state_dim = (int)dataset.transitions.front().s.size();
    model.action_dim = (int)dataset.transitions.front().a.size();
    model.latent_dim = config.latent_dim > 0 ? config.latent_dim : 2 * model.action_dim;
    model.action_bound = dataset.env.action_bound > 0.0 ? dataset.env.action_bound : 1.0;
    model.lv_min = config.lv_min;
    model.lv_max = config.lv_max;
    model.z_clip = config.z_clip;

    std::vector<int> enc_dims{model.state_dim + model.action_dim};
    std::vector<int> dec_dims{model.state_dim + model.latent_dim};
    for (int h : config.hidden) {
        enc_dims.push_back(h);
        dec_dims.push_back(h);
    }
    enc_dims.push_back(2 * model.latent_dim);
    dec_dims.push_back(model.action_dim);
    model.encoder = nn::Mlp::make(enc_dims, nn::Activation::relu, nn::Activation::identity, rng);
    model.decoder = nn::Mlp::make(dec_dims, nn::Activation::relu, nn::Activation::identity, rng);

    nn::Adam enc_opt(config.lr), dec_opt(config.lr);
    enc_opt.init(model.encoder);
    dec_opt.init(model.decoder);

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::normal_distribution<double> normal(0.0, 1.0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + (std::size_t)config.batch_size);
            std::vector<std::pair<Vec, Vec>> batch;
            std::vector<Vec> noise;
            batch.reserve(end - start);
            noise.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) {
                const auto& tr = dataset.transitions[order[i]];
                batch.emplace_back(tr.s, tr.a);
                Vec n(model.latent_dim);
                for (int d = 0; d < model.latent_dim; ++d) n[d] = normal(rng);
                noise.push_back(std::move(n));
            }
            auto enc_g = nn::Mlp::Grads::zeros_like(model.encoder);
            auto dec_g = nn::Mlp::Grads::zeros_like(model.decoder);
            CvaeLoss loss = cvae_loss(model, batch, noise, &enc_g, &dec_g);
            enc_opt.step(model.encoder, enc_g);
            dec_opt.step(model.decoder, dec_g);
            epoch_loss += loss.total;
            ++n_batches;
        }
        model.loss_history.push_back(epoch_loss / (double)n_batches);
    }
    return model;
}

}  // namespace tatu
