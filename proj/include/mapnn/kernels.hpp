#pragma once

#include "mapnn/tensor.hpp"

namespace mapnn::kernels {

/// Square-kernel convolution geometry shared by the forward pass and both
/// adjoints.
struct ConvGeometry {
    Index stride = 1;
    Index pad = 0;
};

inline Index conv_output_extent(Index in, Index k, ConvGeometry g) {
    return (in + 2 * g.pad - k) / g.stride + 1;
}

// Cross-correlation of x[B,C,H,W] with w[O,C,kh,kw] -> [B,O,Ho,Wo].
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& w, ConvGeometry g);

// Adjoint of conv2d with respect to its input; (height, width) is the
// spatial size of the original input, which stride makes ambiguous.
template <typename Scalar>
Tensor<Scalar> conv2d_input_adjoint(const Tensor<Scalar>& dy, const Tensor<Scalar>& w, ConvGeometry g,
                                    Index height, Index width);

// Adjoint of conv2d with respect to its weight -> [O,C,kh,kw].
template <typename Scalar>
Tensor<Scalar> conv2d_weight_adjoint(const Tensor<Scalar>& x, const Tensor<Scalar>& dy, ConvGeometry g,
                                     Index kh, Index kw);

}  // namespace mapnn::kernels
