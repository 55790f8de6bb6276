#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "tatu/ensemble.hpp"
#include "tatu/rng.hpp"

using namespace tatu;

TEST_CASE("mopo uncertainty hand cases") {
    GaussianPrediction pred;
    pred.means = {Vec::Zero(2)};
    Vec var(2);
    var << 3.0, 4.0;
    pred.vars = {var};

    UncertaintyConfig cfg;
    // Frobenius norm of diag(3,4) = sqrt(9+16) = 5.
    CHECK(uncertainty_mopo(pred, cfg) == doctest::Approx(5.0).epsilon(1e-15));

    cfg.frobenius_sum_abs = true;  // sqrt(|3|+|4|)
    CHECK(uncertainty_mopo(pred, cfg) == doctest::Approx(std::sqrt(7.0)).epsilon(1e-15));

    cfg.frobenius_sum_abs = false;
    cfg.stddev_entries = true;  // norm of (sqrt(3), 2)
    CHECK(uncertainty_mopo(pred, cfg) == doctest::Approx(std::sqrt(7.0)).epsilon(1e-15));

    // Max over members.
    Vec var2(2);
    var2 << 6.0, 8.0;
    pred.vars.push_back(var2);
    pred.means.push_back(Vec::Zero(2));
    cfg = UncertaintyConfig{};
    CHECK(uncertainty_mopo(pred, cfg) == doctest::Approx(10.0).epsilon(1e-15));
}

TEST_CASE("morel uncertainty is the max pairwise mean discrepancy") {
    GaussianPrediction pred;
    Vec m1(2), m2(2), m3(2);
    m1 << 0.0, 0.0;
    m2 << 3.0, 4.0;
    m3 << 1.0, 0.0;
    pred.means = {m1, m2, m3};
    pred.vars = {Vec::Ones(2), Vec::Ones(2), Vec::Ones(2)};
    CHECK(uncertainty_morel(pred) == doctest::Approx(5.0).epsilon(1e-15));

    pred.means = {m1};
    pred.vars = {Vec::Ones(2)};
    CHECK_THROWS_AS(uncertainty_morel(pred), ParameterError);
}

TEST_CASE("uncertainty dispatch clamps to u_max") {
    GaussianPrediction pred;
    pred.means = {Vec::Zero(1), Vec::Zero(1)};
    Vec var(1);
    var << 100.0;
    pred.vars = {var, var};
    UncertaintyConfig cfg;
    cfg.u_max = 2.5;
    CHECK(uncertainty(pred, cfg) == 2.5);
    cfg.u_max = std::numeric_limits<double>::infinity();
    CHECK(uncertainty(pred, cfg) == doctest::Approx(100.0));
}

TEST_CASE("select_elites keeps the lowest losses, ties to the lower index") {
    std::vector<double> losses{0.5, 0.2, 0.5, 0.1, 0.9};
    auto elites = select_elites(losses, 3);
    REQUIRE(elites.size() == 3);
    CHECK(elites[0] == 3);
    CHECK(elites[1] == 1);
    CHECK(elites[2] == 0);  // tie with index 2 resolves to 0
    CHECK_THROWS_AS(select_elites(losses, 0), ParameterError);
    CHECK_THROWS_AS(select_elites(losses, 6), ParameterError);
}

TEST_CASE("planted ensemble exposes exact constant discrepancy") {
    Vec d0 = Vec::Zero(3), d1 = Vec::Zero(3);
    d1[0] = 0.25;
    DynamicsEnsemble ens = testing::planted_ensemble(3, 2, {d0, d1});
    Vec s = Vec::Ones(3), a = Vec::Ones(2);
    GaussianPrediction pred = ens.predict(s, a);
    REQUIRE(pred.means.size() == 2);
    CHECK((pred.means[0] - s).cwiseAbs().maxCoeff() == 0.0);
    CHECK(uncertainty_morel(pred) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("trained ensemble recovers planted linear dynamics") {
    Mat A, B;
    Dataset ds = testing::linear_dataset(3, 2, 3000, 0.01, 77, &A, &B);
    EnsembleConfig cfg;
    cfg.n_total = 3;
    cfg.n_elites = 2;
    cfg.epochs = 50;
    cfg.hidden = {32, 32};
    DynamicsEnsemble ens = train_ensemble(ds, cfg, 5);

    REQUIRE(ens.trained());
    CHECK(ens.elite_indices.size() == 2);
    CHECK(ens.validation_losses.size() == 3);

    // Mean prediction error well below state scale on held-out points.
    auto rng = make_rng(400);
    std::normal_distribution<double> normal(0.0, 1.0);
    double max_err = 0.0, sum_err = 0.0;
    int n_err = 0;
    for (int i = 0; i < 50; ++i) {
        Vec s(3), a(2);
        for (int d = 0; d < 3; ++d) s[d] = normal(rng);
        for (int d = 0; d < 2; ++d) a[d] = normal(rng);
        Vec expect = s + 0.1 * (A * s + B * a);
        for (int e : ens.elite_indices) {
            auto [mean, var] = ens.member_prediction(e, s, a);
            const double err = (mean - expect).cwiseAbs().maxCoeff();
            max_err = std::max(max_err, err);
            sum_err += err;
            ++n_err;
        }
    }
    CHECK(sum_err / n_err < 0.05);
    CHECK(max_err < 0.2);

    // Training NLL decreased.
    for (const auto& hist : ens.train_history) {
        REQUIRE(hist.size() == 50);
        CHECK(hist.back() < hist.front());
    }
}

TEST_CASE("ensemble training is deterministic in the seed") {
    Dataset ds = testing::linear_dataset(2, 1, 400, 0.05, 9);
    EnsembleConfig cfg;
    cfg.n_total = 2;
    cfg.n_elites = 1;
    cfg.epochs = 3;
    cfg.hidden = {16};
    DynamicsEnsemble a = train_ensemble(ds, cfg, 123);
    DynamicsEnsemble b = train_ensemble(ds, cfg, 123);
    for (std::size_t m = 0; m < a.members.size(); ++m)
        CHECK((a.members[m].flatten() - b.members[m].flatten()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.elite_indices == b.elite_indices);
    CHECK(a.validation_losses == b.validation_losses);

    DynamicsEnsemble c = train_ensemble(ds, cfg, 124);
    CHECK((a.members[0].flatten() - c.members[0].flatten()).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("predict_next samples near the chosen member mean") {
    Vec d0 = Vec::Zero(2);
    DynamicsEnsemble ens = testing::planted_ensemble(2, 1, {d0, d0});
    Vec s(2), a(1);
    s << 1.0, -2.0;
    a << 0.5;
    auto rng = make_rng(31);
    auto [s_next, pred] = ens.predict_next(s, a, rng);
    // Variance is exp(-10) ~ 4.5e-5, so samples sit within ~0.05 of the mean.
    CHECK((s_next - s).cwiseAbs().maxCoeff() < 0.05);

    auto rng2 = make_rng(31);
    auto [s_next2, pred2] = ens.predict_next(s, a, rng2);
    CHECK((s_next - s_next2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dataset_max_uncertainty equals the brute-force maximum bitwise") {
    Vec d0 = Vec::Zero(2), d1(2);
    d1 << 0.3, -0.4;
    DynamicsEnsemble ens = testing::planted_ensemble(2, 1, {d0, d1});
    Dataset ds = testing::linear_dataset(2, 1, 1000, 0.1, 55);
    UncertaintyConfig cfg;
    cfg.quantifier = UncertaintyQuantifier::morel;
    double brute = 0.0;
    for (const auto& tr : ds.transitions)
        brute = std::max(brute, uncertainty(ens.predict(tr.s, tr.a), cfg));
    CHECK(dataset_max_uncertainty(ens, ds, cfg) == brute);
    CHECK(brute == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("untrained ensemble and empty dataset are rejected") {
    DynamicsEnsemble ens;
    Vec s(1), a(1);
    s << 0.0;
    a << 0.0;
    CHECK_THROWS_AS(ens.predict(s, a), DataError);
    Dataset empty;
    EnsembleConfig cfg;
    CHECK_THROWS_AS(train_ensemble(empty, cfg, 1), DataError);
}
