#include "tatu/nn.hpp"

#include <cmath>

namespace tatu::nn {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double apply_act(Activation a, double x) {
    switch (a) {
        case Activation::identity: return x;
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::tanh_act: return std::tanh(x);
        case Activation::swish: return x * sigmoid(x);
    }
    return x;
}

double act_deriv(Activation a, double x) {
    switch (a) {
        case Activation::identity: return 1.0;
        case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::tanh_act: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case Activation::swish: {
            const double s = sigmoid(x);
            return s + x * s * (1.0 - s);
        }
    }
    return 1.0;
}

Vec apply_act(Activation a, const Vec& x) {
    Vec y(x.size());
    for (int i = 0; i < x.size(); ++i) y[i] = apply_act(a, x[i]);
    return y;
}

double softplus(double x) {
    // numerically stable log(1 + e^x)
    return x > 30.0 ? x : std::log1p(std::exp(std::min(x, 30.0)));
}

}  // namespace

Activation activation_from_string(const std::string& name) {
    if (name == "identity") return Activation::identity;
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh_act;
    if (name == "swish") return Activation::swish;
    throw ParameterError("unknown activation: " + name);
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::tanh_act: return "tanh";
        case Activation::swish: return "swish";
    }
    return "identity";
}

Mlp Mlp::make(const std::vector<int>& dims, Activation hidden, Activation output,
              std::mt19937_64& rng, double init_scale) {
    if (dims.size() < 2) throw ParameterError("Mlp::make: need at least input and output dims");
    Mlp net;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer;
        const int fan_in = dims[l];
        const double std_dev = init_scale / std::sqrt((double)fan_in);
        layer.W.resize(dims[l + 1], dims[l]);
        for (int i = 0; i < layer.W.rows(); ++i)
            for (int j = 0; j < layer.W.cols(); ++j) layer.W(i, j) = std_dev * normal(rng);
        layer.b = Vec::Zero(dims[l + 1]);
        layer.act = (l + 2 == dims.size()) ? output : hidden;
        net.layers.push_back(std::move(layer));
    }
    return net;
}

Vec Mlp::forward(const Vec& x) const {
    if (x.size() != input_dim()) throw ParameterError("Mlp::forward: input dimension mismatch");
    Vec h = x;
    for (const auto& layer : layers) h = apply_act(layer.act, layer.W * h + layer.b);
    return h;
}

Vec Mlp::forward(const Vec& x, Cache& cache) const {
    if (x.size() != input_dim()) throw ParameterError("Mlp::forward: input dimension mismatch");
    cache.input = x;
    cache.pre.resize(layers.size());
    cache.post.resize(layers.size());
    Vec h = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        cache.pre[l] = layers[l].W * h + layers[l].b;
        cache.post[l] = apply_act(layers[l].act, cache.pre[l]);
        h = cache.post[l];
    }
    return h;
}

Mlp::Grads Mlp::Grads::zeros_like(const Mlp& net) {
    Grads g;
    for (const auto& layer : net.layers) {
        g.dW.push_back(Mat::Zero(layer.W.rows(), layer.W.cols()));
        g.db.push_back(Vec::Zero(layer.b.size()));
    }
    return g;
}

void Mlp::Grads::add_scaled(const Grads& other, double c) {
    for (std::size_t l = 0; l < dW.size(); ++l) {
        dW[l] += c * other.dW[l];
        db[l] += c * other.db[l];
    }
}

void Mlp::Grads::scale(double c) {
    for (std::size_t l = 0; l < dW.size(); ++l) {
        dW[l] *= c;
        db[l] *= c;
    }
}

double Mlp::Grads::max_abs() const {
    double m = 0.0;
    for (std::size_t l = 0; l < dW.size(); ++l) {
        m = std::max(m, dW[l].cwiseAbs().maxCoeff());
        if (db[l].size() > 0) m = std::max(m, db[l].cwiseAbs().maxCoeff());
    }
    return m;
}

Vec Mlp::backward(const Cache& cache, Vec dy, Grads& g) const {
    for (int l = (int)layers.size() - 1; l >= 0; --l) {
        Vec dpre(dy.size());
        for (int i = 0; i < dy.size(); ++i) dpre[i] = dy[i] * act_deriv(layers[l].act, cache.pre[l][i]);
        const Vec& in = (l == 0) ? cache.input : cache.post[l - 1];
        g.dW[l] += dpre * in.transpose();
        g.db[l] += dpre;
        dy = layers[l].W.transpose() * dpre;
    }
    return dy;
}

int Mlp::n_params() const {
    int n = 0;
    for (const auto& layer : layers) n += (int)(layer.W.size() + layer.b.size());
    return n;
}

Vec Mlp::flatten() const {
    Vec theta(n_params());
    int k = 0;
    for (const auto& layer : layers) {
        for (int j = 0; j < layer.W.cols(); ++j)
            for (int i = 0; i < layer.W.rows(); ++i) theta[k++] = layer.W(i, j);
        for (int i = 0; i < layer.b.size(); ++i) theta[k++] = layer.b[i];
    }
    return theta;
}

void Mlp::unflatten(const Vec& theta) {
    if (theta.size() != n_params()) throw ParameterError("Mlp::unflatten: size mismatch");
    int k = 0;
    for (auto& layer : layers) {
        for (int j = 0; j < layer.W.cols(); ++j)
            for (int i = 0; i < layer.W.rows(); ++i) layer.W(i, j) = theta[k++];
        for (int i = 0; i < layer.b.size(); ++i) layer.b[i] = theta[k++];
    }
}

double batch_loss_grad(const Mlp& net, const std::vector<Vec>& xs,
                       const std::function<double(std::size_t i, const Vec& y, Vec& dy)>& loss,
                       Mlp::Grads& out) {
    if (xs.empty()) throw ParameterError("batch_loss_grad: empty batch");
    double total = 0.0;
    Mlp::Cache cache;
    const double inv_n = 1.0 / (double)xs.size();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        Vec y = net.forward(xs[i], cache);
        Vec dy = Vec::Zero(y.size());
        const double li = loss(i, y, dy);
        if (!std::isfinite(li)) throw NumericError("batch_loss_grad: non-finite loss");
        total += li;
        dy *= inv_n;
        net.backward(cache, std::move(dy), out);
    }
    return total * inv_n;
}

void Adam::init(const Mlp& net) {
    mW.clear();
    vW.clear();
    mb.clear();
    vb.clear();
    for (const auto& layer : net.layers) {
        mW.push_back(Mat::Zero(layer.W.rows(), layer.W.cols()));
        vW.push_back(Mat::Zero(layer.W.rows(), layer.W.cols()));
        mb.push_back(Vec::Zero(layer.b.size()));
        vb.push_back(Vec::Zero(layer.b.size()));
    }
    t = 0;
}

void Adam::step(Mlp& net, const Mlp::Grads& g) {
    if (mW.size() != net.layers.size()) throw ParameterError("Adam::step: state not initialized for this net");
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, (double)t);
    const double bc2 = 1.0 - std::pow(beta2, (double)t);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        mW[l] = beta1 * mW[l] + (1.0 - beta1) * g.dW[l];
        vW[l] = beta2 * vW[l] + (1.0 - beta2) * g.dW[l].cwiseProduct(g.dW[l]);
        mb[l] = beta1 * mb[l] + (1.0 - beta1) * g.db[l];
        vb[l] = beta2 * vb[l] + (1.0 - beta2) * g.db[l].cwiseProduct(g.db[l]);
        net.layers[l].W.array() -=
            lr * (mW[l].array() / bc1) / ((vW[l].array() / bc2).sqrt() + eps);
        net.layers[l].b.array() -=
            lr * (mb[l].array() / bc1) / ((vb[l].array() / bc2).sqrt() + eps);
    }
}

double gaussian_nll(const Vec& mean, const Vec& logvar, const Vec& target) {
    if (mean.size() != logvar.size() || mean.size() != target.size())
        throw ParameterError("gaussian_nll: dimension mismatch");
    if (!mean.allFinite() || !logvar.allFinite() || !target.allFinite())
        throw NumericError("gaussian_nll: non-finite input");
    double total = 0.0;
    for (int d = 0; d < mean.size(); ++d) {
        const double diff = target[d] - mean[d];
        total += kLog2Pi + logvar[d] + diff * diff * std::exp(-logvar[d]);
    }
    return 0.5 * total;
}

void gaussian_nll_backward(const Vec& mean, const Vec& logvar, const Vec& target,
                           Vec& dmean, Vec& dlogvar) {
    dmean.resize(mean.size());
    dlogvar.resize(mean.size());
    for (int d = 0; d < mean.size(); ++d) {
        const double diff = target[d] - mean[d];
        const double inv_var = std::exp(-logvar[d]);
        dmean[d] = -diff * inv_var;
        dlogvar[d] = 0.5 * (1.0 - diff * diff * inv_var);
    }
}

double diag_gaussian_kl(const Vec& mu, const Vec& logvar) {
    if (mu.size() != logvar.size()) throw ParameterError("diag_gaussian_kl: dimension mismatch");
    if (!mu.allFinite() || !logvar.allFinite()) throw NumericError("diag_gaussian_kl: non-finite input");
    double total = 0.0;
    for (int d = 0; d < mu.size(); ++d)
        total += mu[d] * mu[d] + std::exp(logvar[d]) - logvar[d] - 1.0;
    return 0.5 * total;
}

void diag_gaussian_kl_backward(const Vec& mu, const Vec& logvar, Vec& dmu, Vec& dlogvar) {
    dmu = mu;
    dlogvar.resize(logvar.size());
    for (int d = 0; d < logvar.size(); ++d) dlogvar[d] = 0.5 * (std::exp(logvar[d]) - 1.0);
}

Vec soft_clamp(const Vec& raw, double lo, double hi) {
    Vec y(raw.size());
    for (int i = 0; i < raw.size(); ++i) {
        double v = hi - softplus(hi - raw[i]);
        y[i] = lo + softplus(v - lo);
    }
    return y;
}

Vec soft_clamp_backward(const Vec& raw, double lo, double hi, const Vec& dout) {
    Vec dx(raw.size());
    for (int i = 0; i < raw.size(); ++i) {
        const double v = hi - softplus(hi - raw[i]);
        const double dv_draw = sigmoid(hi - raw[i]);
        const double dy_dv = sigmoid(v - lo);
        dx[i] = dout[i] * dy_dv * dv_draw;
    }
    return dx;
}

}  // namespace tatu::nn
