#pragma once

#include <cmath>
#include <cstdint>

#include "mapnn/param_store.hpp"

namespace mapnn {

/// Bias-corrected Adam. Moments are created lazily, on a parameter's first
/// gradient, with that parameter's shape.
template <typename Scalar>
struct AdamState {
    GradientMap<Scalar> m;
    GradientMap<Scalar> v;
    std::int64_t step = 0;
    double lr0 = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;  // added after the square root
};

/// One update of every parameter named in `grads` with learning rate `lr`.
/// Parameters absent from `grads` are left alone, moments included.
template <typename Scalar>
void adam_step(AdamState<Scalar>& state, ParamStore<Scalar>& params, const GradientMap<Scalar>& grads, double lr) {
    for (const auto& [name, g] : grads) {
        if (!params.contains(name)) throw InvalidArgument("adam_step: gradient for unknown parameter '" + name + "'");
        const Shape& expected = params.at(name).shape();
        if (g.shape() != expected) {
            throw ShapeError("adam_step", name + ": gradient shape " + g.shape().str() + " vs parameter " + expected.str());
        }
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const auto c1 = static_cast<Scalar>(1.0 - std::pow(state.beta1, t));
    const auto c2 = static_cast<Scalar>(1.0 - std::pow(state.beta2, t));
    const auto b1 = static_cast<Scalar>(state.beta1);
    const auto b2 = static_cast<Scalar>(state.beta2);
    const auto eps = static_cast<Scalar>(state.epsilon);
    const auto rate = static_cast<Scalar>(lr);

    for (const auto& [name, g] : grads) {
        auto& param = params.at(name).mutable_value();
        auto& m = state.m.try_emplace(name, param.shape()).first->second;
        auto& v = state.v.try_emplace(name, param.shape()).first->second;
        m.array() = b1 * m.array() + (Scalar(1) - b1) * g.array();
        v.array() = b2 * v.array() + (Scalar(1) - b2) * g.array().square();
        param.array() -= rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
}

/// lr0 / sqrt(epoch), epochs counted from 1.
inline double lr_schedule(double lr0, std::int64_t epoch) {
    if (epoch < 1) throw InvalidArgument("lr_schedule: epoch must be >= 1, got " + std::to_string(epoch));
    return lr0 / std::sqrt(static_cast<double>(epoch));
}

}  // namespace mapnn
