#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "tatu/cvae.hpp"
#include "tatu/rng.hpp"

using namespace tatu;

namespace {

CvaeModel tiny_model(std::uint64_t seed) {
    auto rng = make_rng(seed);
    CvaeModel m;
    m.state_dim = 3;
    m.action_dim = 2;
    m.latent_dim = 2;
    m.action_bound = 1.5;
    m.encoder = nn::Mlp::make({5, 8, 4}, nn::Activation::relu, nn::Activation::identity, rng);
    m.decoder = nn::Mlp::make({5, 8, 2}, nn::Activation::relu, nn::Activation::identity, rng);
    return m;
}

std::pair<std::vector<std::pair<Vec, Vec>>, std::vector<Vec>> tiny_batch(const CvaeModel& m,
                                                                         std::uint64_t seed,
                                                                         int n) {
    auto rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::pair<Vec, Vec>> batch;
    std::vector<Vec> noise;
    for (int i = 0; i < n; ++i) {
        Vec s(m.state_dim), a(m.action_dim), z(m.latent_dim);
        for (int d = 0; d < m.state_dim; ++d) s[d] = normal(rng);
        for (int d = 0; d < m.action_dim; ++d) a[d] = std::tanh(normal(rng));
        for (int d = 0; d < m.latent_dim; ++d) z[d] = normal(rng);
        batch.emplace_back(s, a);
        noise.push_back(z);
    }
    return {batch, noise};
}

// Finite-difference check of the analytic loss gradient through one of the two
// networks, over the leading coordinates of the flat parameter vector.
void check_cvae_gradient(CvaeModel model, bool encoder_side) {
    auto [batch, noise] = tiny_batch(model, 99, 4);
    auto enc_g = nn::Mlp::Grads::zeros_like(model.encoder);
    auto dec_g = nn::Mlp::Grads::zeros_like(model.decoder);
    cvae_loss(model, batch, noise, &enc_g, &dec_g);

    nn::Mlp& net = encoder_side ? model.encoder : model.decoder;
    const nn::Mlp::Grads& g = encoder_side ? enc_g : dec_g;
    Vec analytic(net.n_params());
    int k = 0;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const Mat& dW = g.dW[l];
        for (int j = 0; j < dW.cols(); ++j)
            for (int i = 0; i < dW.rows(); ++i) analytic[k++] = dW(i, j);
        for (int i = 0; i < g.db[l].size(); ++i) analytic[k++] = g.db[l][i];
    }

    const double h = 1e-5;
    Vec theta = net.flatten();
    const int n_check = std::min<int>(100, (int)theta.size());
    for (int i = 0; i < n_check; ++i) {
        Vec tp = theta, tm = theta;
        tp[i] += h;
        tm[i] -= h;
        net.unflatten(tp);
        const double lp = cvae_loss(model, batch, noise).total;
        net.unflatten(tm);
        const double lm = cvae_loss(model, batch, noise).total;
        net.unflatten(theta);
        const double fd = (lp - lm) / (2.0 * h);
        const double scale = std::max({std::abs(fd), std::abs(analytic[i]), 1e-6});
        CHECK(std::abs(fd - analytic[i]) / scale <= 1e-4);
    }
}

}  // namespace

TEST_CASE("cvae encoder gradient matches finite differences") {
    check_cvae_gradient(tiny_model(7), true);
}

TEST_CASE("cvae decoder gradient matches finite differences") {
    check_cvae_gradient(tiny_model(7), false);
}

TEST_CASE("loss decomposes into reconstruction plus KL") {
    CvaeModel m = tiny_model(11);
    auto [batch, noise] = tiny_batch(m, 12, 8);
    CvaeLoss loss = cvae_loss(m, batch, noise);
    CHECK(loss.total == doctest::Approx(loss.reconstruction + loss.kl).epsilon(1e-15));
    CHECK(loss.reconstruction >= 0.0);
    CHECK(loss.kl >= 0.0);
    CHECK_THROWS_AS(cvae_loss(m, {}, {}), ParameterError);
}

TEST_CASE("training reduces the loss on a behavior-structured dataset") {
    // Behavior: action is a clipped linear function of the state plus noise.
    Dataset ds = testing::linear_dataset(3, 2, 600, 0.0, 33);
    for (auto& tr : ds.transitions) {
        tr.a[0] = std::tanh(0.8 * tr.s[0] - 0.2 * tr.s[1]);
        tr.a[1] = std::tanh(0.5 * tr.s[2]);
    }
    CvaeConfig cfg;
    cfg.epochs = 15;
    cfg.hidden = {32, 32};
    CvaeModel m = train_cvae(ds, cfg, 44);
    REQUIRE(m.loss_history.size() == 15);
    CHECK(m.loss_history.back() < 0.5 * m.loss_history.front());
    CHECK(m.latent_dim == 4);
    CHECK(m.action_bound == 1.0);
}

TEST_CASE("sampled actions respect the action bound") {
    Dataset ds = testing::linear_dataset(2, 2, 200, 0.1, 55);
    ds.env.action_bound = 0.7;
    CvaeConfig cfg;
    cfg.epochs = 3;
    cfg.hidden = {16};
    CvaeModel m = train_cvae(ds, cfg, 56);
    CHECK(m.action_bound == 0.7);
    auto rng = make_rng(57);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        Vec s(2);
        s << normal(rng), normal(rng);
        Vec a = m.sample_action(s, rng);
        REQUIRE(a.size() == 2);
        CHECK(a.cwiseAbs().maxCoeff() <= 0.7);
    }
}

TEST_CASE("training and sampling are deterministic in the seed") {
    Dataset ds = testing::linear_dataset(2, 1, 150, 0.1, 66);
    CvaeConfig cfg;
    cfg.epochs = 2;
    cfg.hidden = {16};
    CvaeModel a = train_cvae(ds, cfg, 500);
    CvaeModel b = train_cvae(ds, cfg, 500);
    CHECK((a.encoder.flatten() - b.encoder.flatten()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.decoder.flatten() - b.decoder.flatten()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.loss_history == b.loss_history);

    auto r1 = make_rng(9), r2 = make_rng(9);
    Vec s = Vec::Zero(2);
    CHECK((a.sample_action(s, r1) - b.sample_action(s, r2)).cwiseAbs().maxCoeff() == 0.0);

    CvaeModel c = train_cvae(ds, cfg, 501);
    CHECK((a.decoder.flatten() - c.decoder.flatten()).cwiseAbs().maxCoeff() > 0.0);
}
