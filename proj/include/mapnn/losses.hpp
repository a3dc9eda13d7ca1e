#pragma once

#include <functional>
#include <random>

#include "mapnn/model.hpp"

namespace mapnn {

struct LossWeights {
    double lambda_g = 10.0;  // gradient penalty
    double lambda_m = 50.0;  // mean squared error
    double lambda_e = 50.0;  // Sobel edge incoherence
    // +1 adds the critic's mean score on generator output to the generator
    // objective as written; -1 selects the mirrored convention.
    double adversarial_sign = 1.0;

    void validate() const;
};

/// Any scalar-per-sample critic [B,...] -> [B,1].
template <typename Scalar>
using Critic = std::function<ad::Var<Scalar>(const ad::Var<Scalar>&)>;

template <typename Scalar>
Critic<Scalar> as_critic(const DiscriminatorParams<Scalar>& d) {
    return [&d](const ad::Var<Scalar>& x) { return discriminator_forward(d, x); };
}

/// Per-sample epsilon ~ U[0,1] and the interpolate eps*gen + (1-eps)*real.
template <typename Scalar>
struct GpSample {
    Tensor<Scalar> epsilon;  // [B]
    Tensor<Scalar> interpolate;
};

template <typename Scalar>
GpSample<Scalar> make_gp_sample(const Tensor<Scalar>& gen_out, const Tensor<Scalar>& real, std::mt19937_64& rng);

template <typename Scalar>
GpSample<Scalar> make_gp_sample(const Tensor<Scalar>& gen_out, const Tensor<Scalar>& real,
                                const Tensor<Scalar>& epsilon);

template <typename Scalar>
struct CriticLoss {
    ad::Var<Scalar> total;
    Scalar wasserstein = 0;  // mean D(gen) - mean D(real)
    Scalar penalty = 0;      // lambda_g * mean (|grad D| - 1)^2
};

/// mean D(gen) - mean D(real) + lambda_g * mean_b (||grad_x D(xbar_b)||_2 - 1)^2.
/// gen_out enters as a constant. The norm is sqrt(sum + 1e-12) over every
/// pixel of a sample. The result is differentiable in the critic's
/// parameters, through the penalty's input gradient as well.
template <typename Scalar>
CriticLoss<Scalar> critic_loss(const Critic<Scalar>& critic, const Tensor<Scalar>& gen_out, const Tensor<Scalar>& real,
                               const LossWeights& w, const GpSample<Scalar>& sample);

template <typename Scalar>
CriticLoss<Scalar> critic_loss(const Critic<Scalar>& critic, const Tensor<Scalar>& gen_out, const Tensor<Scalar>& real,
                               const LossWeights& w, std::mt19937_64& rng) {
    return critic_loss(critic, gen_out, real, w, make_gp_sample(gen_out, real, rng));
}

/// mean D(gen_out); gen_out keeps its generator history.
template <typename Scalar>
ad::Var<Scalar> adversarial_gen_loss(const Critic<Scalar>& critic, const ad::Var<Scalar>& gen_out);

template <typename Scalar>
ad::Var<Scalar> mse_loss(const ad::Var<Scalar>& gen_out, const Tensor<Scalar>& real);

/// Horizontal (channel 0) and vertical (channel 1) Sobel responses,
/// unpadded: [B,1,H,W] -> [B,2,H-2,W-2].
template <typename Scalar>
ad::Var<Scalar> sobel_maps(const ad::Var<Scalar>& img);

template <typename Scalar>
ad::Var<Scalar> edge_incoherence(const ad::Var<Scalar>& gen_out, const Tensor<Scalar>& real);

template <typename Scalar>
struct GeneratorLoss {
    ad::Var<Scalar> total;
    Scalar adversarial = 0;
    Scalar mse = 0;
    Scalar edge = 0;
};

/// adversarial_sign * L_a + lambda_m * L_m + lambda_e * L_e.
template <typename Scalar>
GeneratorLoss<Scalar> composite_gen_loss(const Critic<Scalar>& critic, const ad::Var<Scalar>& gen_out,
                                         const Tensor<Scalar>& real, const LossWeights& w);

}  // namespace mapnn
