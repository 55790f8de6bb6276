#include "tatu/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "tatu/rng.hpp"

namespace tatu {

UncertaintyQuantifier quantifier_from_string(const std::string& name) {
    if (name == "mopo") return UncertaintyQuantifier::mopo;
    if (name == "morel") return UncertaintyQuantifier::morel;
    throw ParameterError("unknown uncertainty quantifier: " + name);
}

std::pair<Vec, Vec> DynamicsEnsemble::member_prediction(int member, const Vec& s, const Vec& a) const {
    Vec x(state_dim + action_dim);
    x << s, a;
    Vec out = members[member].forward(input_norm.apply(x));
    Vec mean = s + out.head(state_dim);
    Vec logvar = nn::soft_clamp(out.tail(state_dim), lv_min, lv_max);
    return {mean, logvar.array().exp().matrix()};
}

GaussianPrediction DynamicsEnsemble::predict(const Vec& s, const Vec& a) const {
    if (!trained()) throw DataError("DynamicsEnsemble: not trained");
    GaussianPrediction pred;
    pred.means.reserve(elite_indices.size());
    pred.vars.reserve(elite_indices.size());
    for (int idx : elite_indices) {
        auto [mean, var] = member_prediction(idx, s, a);
        pred.means.push_back(std::move(mean));
        pred.vars.push_back(std::move(var));
    }
    return pred;
}

std::pair<Vec, GaussianPrediction> DynamicsEnsemble::predict_next(const Vec& s, const Vec& a,
                                                                  std::mt19937_64& rng) const {
    GaussianPrediction pred = predict(s, a);
    std::uniform_int_distribution<std::size_t> pick(0, pred.means.size() - 1);
    const std::size_t k = pick(rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec s_next(state_dim);
    for (int d = 0; d < state_dim; ++d)
        s_next[d] = pred.means[k][d] + std::sqrt(pred.vars[k][d]) * normal(rng);
    return {std::move(s_next), std::move(pred)};
}

namespace {

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

Split make_split(std::size_t n, int validation_size, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t n_val = std::min<std::size_t>((std::size_t)validation_size, n / 5);
    n_val = std::max<std::size_t>(n_val, 1);
    Split split;
    split.validation.assign(idx.begin(), idx.begin() + n_val);
    split.train.assign(idx.begin() + n_val, idx.end());
    return split;
}

}  // namespace

DynamicsEnsemble train_ensemble(const Dataset& dataset, const EnsembleConfig& config,
                                std::uint64_t seed) {
    if (config.n_elites < 1 || config.n_elites > config.n_total)
        throw ParameterError("train_ensemble: need 1 <= n_elites <= n_total");
    if (dataset.size() < 10) throw DataError("train_ensemble: dataset too small");

    const int state_dim = (int)dataset.transitions.front().s.size();
    const int action_dim = (int)dataset.transitions.front().a.size();
    const int in_dim = state_dim + action_dim;

    DynamicsEnsemble ens;
    ens.state_dim = state_dim;
    ens.action_dim = action_dim;
    ens.lv_min = config.lv_min;
    ens.lv_max = config.lv_max;

    auto split_rng = make_rng(derive_seed(seed, 0xDA7A));
    Split split = make_split(dataset.size(), config.validation_size, split_rng);
    if (split.train.empty()) throw DataError("train_ensemble: no training data after validation split");

    // Input normalizer from the training split.
    Vec mean = Vec::Zero(in_dim), sq = Vec::Zero(in_dim);
    for (std::size_t i : split.train) {
        Vec x(in_dim);
        x << dataset.transitions[i].s, dataset.transitions[i].a;
        mean += x;
        sq += x.cwiseProduct(x);
    }
    mean /= (double)split.train.size();
    Vec var = sq / (double)split.train.size() - mean.cwiseProduct(mean);
    ens.input_norm.mean = mean;
    ens.input_norm.inv_std = (var.cwiseMax(0.0).cwiseSqrt().array() + 1e-8).inverse().matrix();

    std::vector<int> dims;
    dims.push_back(in_dim);
    for (int h : config.hidden) dims.push_back(h);
    dims.push_back(2 * state_dim);

    ens.members.resize(config.n_total);
    ens.train_history.assign(config.n_total, {});
    ens.validation_losses.assign(config.n_total, 0.0);

    auto train_member = [&](int m) {
        auto rng = make_rng(derive_seed(seed, 100 + (std::uint64_t)m));
        nn::Mlp net = nn::Mlp::make(dims, nn::Activation::swish, nn::Activation::identity, rng, 1.0);

        // Per-member bootstrap of the training split.
        std::vector<std::size_t> boot(split.train.size());
        std::uniform_int_distribution<std::size_t> pick(0, split.train.size() - 1);
        for (auto& b : boot) b = split.train[pick(rng)];

        nn::Adam opt(config.lr);
        opt.init(net);

        auto member_nll = [&](const nn::Mlp& model, std::size_t data_index, nn::Mlp::Grads* grads,
                              nn::Mlp::Cache& cache, double weight) {
            const Transition& tr = dataset.transitions[data_index];
            Vec x(in_dim);
            x << tr.s, tr.a;
            Vec out = model.forward(ens.input_norm.apply(x), cache);
            Vec raw_lv = out.tail(state_dim);
            Vec logvar = nn::soft_clamp(raw_lv, config.lv_min, config.lv_max);
            Vec mean_pred = tr.s + out.head(state_dim);
            const double nll = nn::gaussian_nll(mean_pred, logvar, tr.s_next);
            if (grads) {
                Vec dmean, dlogvar;
                nn::gaussian_nll_backward(mean_pred, logvar, tr.s_next, dmean, dlogvar);
                Vec dout(2 * state_dim);
                dout.head(state_dim) = weight * dmean;
                dout.tail(state_dim) =
                    weight * nn::soft_clamp_backward(raw_lv, config.lv_min, config.lv_max, dlogvar);
                model.backward(cache, std::move(dout), *grads);
            }
            return nll;
        };

        std::vector<std::size_t> order = boot;
        nn::Mlp::Cache cache;
        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            double epoch_loss = 0.0;
            std::size_t count = 0;
            for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
                const std::size_t end = std::min(order.size(), start + (std::size_t)config.batch_size);
                nn::Mlp::Grads grads = nn::Mlp::Grads::zeros_like(net);
                const double w = 1.0 / (double)(end - start);
                for (std::size_t i = start; i < end; ++i)
                    epoch_loss += member_nll(net, order[i], &grads, cache, w);
                count += end - start;
                opt.step(net, grads);
            }
            if (!std::isfinite(epoch_loss)) throw NumericError("train_ensemble: non-finite loss");
            ens.train_history[m].push_back(epoch_loss / (double)count);
        }

        double val = 0.0;
        for (std::size_t i : split.validation) val += member_nll(net, i, nullptr, cache, 0.0);
        ens.validation_losses[m] = val / (double)split.validation.size();
        ens.members[m] = std::move(net);
    };

    // Members are independent given their derived seeds, so they can train in parallel.
    std::vector<std::exception_ptr> errors(config.n_total);
    std::vector<std::thread> workers;
    workers.reserve(config.n_total);
    for (int m = 0; m < config.n_total; ++m)
        workers.emplace_back([&, m] {
            try {
                train_member(m);
            } catch (...) {
                errors[m] = std::current_exception();
            }
        });
    for (auto& w : workers) w.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    ens.elite_indices = select_elites(ens.validation_losses, config.n_elites);
    return ens;
}

std::vector<int> select_elites(const std::vector<double>& validation_losses, int n_elites) {
    if (n_elites < 1 || n_elites > (int)validation_losses.size())
        throw ParameterError("select_elites: bad n_elites");
    std::vector<int> idx(validation_losses.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return validation_losses[a] < validation_losses[b]; });
    idx.resize(n_elites);
    return idx;
}

double uncertainty_mopo(const GaussianPrediction& pred, const UncertaintyConfig& config) {
    if (pred.vars.empty()) throw ParameterError("uncertainty_mopo: no predictions");
    double best = 0.0;
    for (const Vec& var : pred.vars) {
        Vec entries = config.stddev_entries ? Vec(var.cwiseSqrt()) : var;
        const double norm = config.frobenius_sum_abs
                                ? std::sqrt(entries.cwiseAbs().sum())
                                : entries.norm();
        best = std::max(best, norm);
    }
    return best;
}

double uncertainty_morel(const GaussianPrediction& pred) {
    if (pred.means.size() < 2) throw ParameterError("uncertainty_morel: needs >= 2 predictions");
    double best = 0.0;
    for (std::size_t i = 0; i < pred.means.size(); ++i)
        for (std::size_t j = i + 1; j < pred.means.size(); ++j)
            best = std::max(best, (pred.means[i] - pred.means[j]).norm());
    return best;
}

double uncertainty(const GaussianPrediction& pred, const UncertaintyConfig& config) {
    const double u = config.quantifier == UncertaintyQuantifier::mopo
                         ? uncertainty_mopo(pred, config)
                         : uncertainty_morel(pred);
    return std::clamp(u, 0.0, config.u_max);
}

double dataset_max_uncertainty(const DynamicsEnsemble& ensemble, const Dataset& dataset,
                               const UncertaintyConfig& config) {
    if (!ensemble.trained()) throw DataError("dataset_max_uncertainty: ensemble not trained");
    if (dataset.empty()) throw DataError("dataset_max_uncertainty: empty dataset");
    double best = 0.0;
    for (const auto& tr : dataset.transitions)
        best = std::max(best, uncertainty(ensemble.predict(tr.s, tr.a), config));
    return best;
}

}  // namespace tatu
