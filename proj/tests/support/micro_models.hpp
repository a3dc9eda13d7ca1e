#pragma once

// Small networks and finite-difference harnesses shared by the unit and
// acceptance suites.

#include <random>
#include <vector>

#include "mapnn/losses.hpp"
#include "support/gradcheck.hpp"

namespace mapnn::oracle {

/// Parameters of a conv(3 filters, stride 2, pad 1) -> leaky -> dense critic
/// for [B,1,side,side] inputs.
inline std::vector<Tensor<double>> two_layer_critic_params(std::mt19937_64& rng, Index side = 6) {
    const Index half = (side + 1) / 2;
    return {random_tensor({3, 1, 3, 3}, rng, -0.6, 0.6), random_tensor({3}, rng, -0.3, 0.3),
            random_tensor({3 * half * half, 1}, rng, -0.4, 0.4), random_tensor({1}, rng)};
}

inline Critic<double> two_layer_critic(std::vector<ad::Var<double>> v) {
    return [v](const ad::Var<double>& x) {
        auto h = ad::activation(ad::add_channel_bias(ad::conv2d(x, v[0], {2, 1}), v[1]), ad::Activation::leaky_relu);
        return ad::dense(ad::reshape(h, Shape{x.shape()[0], h.shape().numel() / x.shape()[0]}), v[2], v[3]);
    };
}

/// Central differences on a sample of coordinates of every generator tensor,
/// for the composite loss of a depth-2 MAP-NN on 9x9 inputs against a small
/// critic. Coordinates whose stencil crosses a kink are redrawn.
inline GradCheck composite_generator_gradcheck(unsigned seed, int coords_per_tensor = 5, double h = 1e-5) {
    std::mt19937_64 rng(seed);
    auto gen = CpceParams<double>::init(seed);
    for (const auto& name : gen.store().names()) {
        if (name.ends_with(".bias")) gen.store().at(name).mutable_value() = random_tensor(gen.store().at(name).shape(), rng, -0.1, 0.1);
    }
    std::vector<ad::Var<double>> critic_params;
    for (auto& t : two_layer_critic_params(rng, 9)) critic_params.push_back(ad::Var<double>::leaf(t, true));
    const auto critic = two_layer_critic(critic_params);
    const Tensor<double> x = random_tensor({2, 1, 9, 9}, rng, 0.25, 0.75);
    const Tensor<double> real = random_tensor({2, 1, 9, 9}, rng, 0.25, 0.75);
    const LossWeights weights{};

    auto loss = [&]() {
        CloneConfig<double> cfg{gen, 2, 2};
        auto out = mapnn_forward(cfg, ad::Var<double>::leaf(x)).outputs.back();
        return composite_gen_loss(critic, out, real, weights).total;
    };

    auto analytic = backward(loss(), gen.store());
    const auto value = [&] { return loss().value().item(); };
    const auto center = probe_value(value).pattern;
    GradCheck result;
    std::size_t tensor_index = 0;
    for (const auto& name : gen.store().names()) {
        auto& param = gen.store().at(name).mutable_value();
        std::uniform_int_distribution<Index> pick(0, param.size() - 1);
        for (int c = 0, attempts = 0; c < coords_per_tensor && attempts < 50 * coords_per_tensor; ++attempts) {
            const Index k = pick(rng);
            const double x0 = param[k];
            param[k] = x0 + h;
            const auto up = probe_value(value);
            param[k] = x0 - h;
            const auto down = probe_value(value);
            param[k] = x0;
            if (up.pattern != center || down.pattern != center) {
                ++result.skipped;
                continue;
            }
            record(result, analytic.at(name)[k], (up.value - down.value) / (2 * h), 1e-3, tensor_index, k);
            ++c;
        }
        ++tensor_index;
    }
    return result;
}

}  // namespace mapnn::oracle
