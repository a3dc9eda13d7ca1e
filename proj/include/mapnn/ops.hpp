#pragma once

#include <cstdint>

#include "mapnn/autodiff.hpp"
#include "mapnn/kernels.hpp"

namespace mapnn::ad {

using kernels::ConvGeometry;

enum class Activation { relu, leaky_relu, clip01 };

inline constexpr double kLeakySlope = 0.2;

// Elementwise arithmetic; binary operands must have equal shapes.
template <typename Scalar> Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b);
template <typename Scalar> Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b);
template <typename Scalar> Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b);
template <typename Scalar> Var<Scalar> scale(const Var<Scalar>& a, Scalar factor);
template <typename Scalar> Var<Scalar> add_scalar(const Var<Scalar>& a, Scalar offset);
/// Product with a tensor that is not differentiated.
template <typename Scalar> Var<Scalar> mul_const(const Var<Scalar>& a, const Tensor<Scalar>& mask);
template <typename Scalar> Var<Scalar> pow(const Var<Scalar>& a, Scalar exponent);
template <typename Scalar> Var<Scalar> square(const Var<Scalar>& a);

// Reductions and their broadcasting adjoints.
template <typename Scalar> Var<Scalar> sum(const Var<Scalar>& a);
template <typename Scalar> Var<Scalar> mean(const Var<Scalar>& a);
template <typename Scalar> Var<Scalar> expand_scalar(const Var<Scalar>& a, const Shape& shape);
/// [B,...] -> [B,1]
template <typename Scalar> Var<Scalar> sum_per_sample(const Var<Scalar>& a);
template <typename Scalar> Var<Scalar> expand_per_sample(const Var<Scalar>& a, const Shape& shape);
/// [B,C,...] -> [C]
template <typename Scalar> Var<Scalar> sum_to_channels(const Var<Scalar>& a);
template <typename Scalar> Var<Scalar> expand_channels(const Var<Scalar>& a, const Shape& shape);

template <typename Scalar> Var<Scalar> reshape(const Var<Scalar>& a, const Shape& shape);
template <typename Scalar> Var<Scalar> transpose(const Var<Scalar>& a);
template <typename Scalar> Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b);

template <typename Scalar> Var<Scalar> concat_channels(const Var<Scalar>& a, const Var<Scalar>& b);
template <typename Scalar> Var<Scalar> slice_channels(const Var<Scalar>& a, Index start, Index count);
template <typename Scalar> Var<Scalar> pad_channels(const Var<Scalar>& a, Index start, Index total);

// Convolution family; closed under differentiation.
template <typename Scalar> Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& w, ConvGeometry g);
template <typename Scalar>
Var<Scalar> conv2d_input_adjoint(const Var<Scalar>& dy, const Var<Scalar>& w, ConvGeometry g, Index height,
                                 Index width);
template <typename Scalar>
Var<Scalar> conv2d_weight_adjoint(const Var<Scalar>& x, const Var<Scalar>& dy, ConvGeometry g, Index kh, Index kw);

template <typename Scalar> Var<Scalar> add_channel_bias(const Var<Scalar>& x, const Var<Scalar>& bias);

/// Stride-1, unpadded cross-correlation plus per-channel bias.
/// x[B,Cin,H,W], weight[Cout,Cin,kh,kw], bias[Cout] -> [B,Cout,H-kh+1,W-kw+1]
template <typename Scalar>
Var<Scalar> conv2d_valid(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias);

/// Transposed counterpart of conv2d_valid.
/// x[B,Cin,H,W], weight[Cin,Cout,kh,kw], bias[Cout] -> [B,Cout,H+kh-1,W+kw-1]
template <typename Scalar>
Var<Scalar> tconv2d_valid(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias);

/// x[B,N] * weight[N,M] + bias[M]
template <typename Scalar>
Var<Scalar> dense(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias);

/// relu, leaky relu with slope 0.2, or clamping to [0,1]. The clamp passes
/// gradient on the closed interval [0,1].
template <typename Scalar> Var<Scalar> activation(const Var<Scalar>& x, Activation kind);

/// While alive, accumulates a fingerprint of the branch taken by every
/// element of every activation evaluated on this thread. Two evaluations
/// with equal fingerprints lie on the same smooth piece of the network.
class ActivationPatternTrace {
public:
    ActivationPatternTrace();
    ~ActivationPatternTrace();
    ActivationPatternTrace(const ActivationPatternTrace&) = delete;
    ActivationPatternTrace& operator=(const ActivationPatternTrace&) = delete;

    std::uint64_t fingerprint() const noexcept { return hash_; }
    void mix(std::uint64_t value) noexcept;

private:
    std::uint64_t hash_ = 1469598103934665603ull;
    ActivationPatternTrace* previous_;
};

/// d(sum of net_output)/d(wrt) as a differentiable node. With one scalar per
/// batch element and independent samples this is the per-sample input
/// gradient. Throws when wrt is not an ancestor of net_output.
template <typename Scalar> Var<Scalar> input_gradient_node(const Var<Scalar>& net_output, const Var<Scalar>& wrt);

}  // namespace mapnn::ad
