#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "tatu/types.hpp"

namespace tatu::nn {

enum class Activation { identity, relu, tanh_act, swish };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

struct Layer {
    Mat W;
    Vec b;
    Activation act = Activation::identity;
};

// Small feedforward net with manual reverse-mode gradients. Double precision
// throughout; parameters are plain values, so copies are cheap snapshots.
struct Mlp {
    std::vector<Layer> layers;

    static Mlp make(const std::vector<int>& dims, Activation hidden, Activation output,
                    std::mt19937_64& rng, double init_scale = 1.0);

    int input_dim() const { return (int)layers.front().W.cols(); }
    int output_dim() const { return (int)layers.back().W.rows(); }

    Vec forward(const Vec& x) const;

    struct Cache {
        Vec input;
        std::vector<Vec> pre;   // pre-activation per layer
        std::vector<Vec> post;  // post-activation per layer
    };
    Vec forward(const Vec& x, Cache& cache) const;

    struct Grads {
        std::vector<Mat> dW;
        std::vector<Vec> db;

        static Grads zeros_like(const Mlp& net);
        void add_scaled(const Grads& other, double c);
        void scale(double c);
        double max_abs() const;
    };

    // Accumulates parameter gradients into `g`; returns dL/dx for chaining.
    Vec backward(const Cache& cache, Vec dy, Grads& g) const;

    // Flat parameter view, used by finite-difference checks and checkpoints.
    int n_params() const;
    Vec flatten() const;
    void unflatten(const Vec& theta);
};

// Mean batch loss and its gradient. `loss` receives the network output for
// sample i and must fill dL/dy; throws NumericError on a non-finite loss.
double batch_loss_grad(const Mlp& net, const std::vector<Vec>& xs,
                       const std::function<double(std::size_t i, const Vec& y, Vec& dy)>& loss,
                       Mlp::Grads& out);

struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    std::vector<Mat> mW, vW;
    std::vector<Vec> mb, vb;
    long t = 0;

    explicit Adam(double learning_rate = 1e-3) : lr(learning_rate) {}
    void init(const Mlp& net);
    void step(Mlp& net, const Mlp::Grads& g);
};

// 0.5 * sum_d [ log(2*pi) + logvar_d + (target_d - mean_d)^2 * exp(-logvar_d) ]
double gaussian_nll(const Vec& mean, const Vec& logvar, const Vec& target);
void gaussian_nll_backward(const Vec& mean, const Vec& logvar, const Vec& target,
                           Vec& dmean, Vec& dlogvar);

// KL( N(mu, diag(exp(logvar))) || N(0, I) )
double diag_gaussian_kl(const Vec& mu, const Vec& logvar);
void diag_gaussian_kl_backward(const Vec& mu, const Vec& logvar, Vec& dmu, Vec& dlogvar);

// Differentiable log-variance clamp, saturating raw outputs to ~[lo, hi].
Vec soft_clamp(const Vec& raw, double lo, double hi);
Vec soft_clamp_backward(const Vec& raw, double lo, double hi, const Vec& dout);

}  // namespace tatu::nn
