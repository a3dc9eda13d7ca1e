#include "mapnn/ops.hpp"

#include <Eigen/Dense>

namespace mapnn::ad {
namespace {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
void require_same_shape(const char* op, const Var<Scalar>& a, const Var<Scalar>& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError(op, "operand shapes differ: " + a.shape().str() + " vs " + b.shape().str());
    }
}

template <typename Scalar>
Tensor<Scalar> like(const Var<Scalar>& a, typename Tensor<Scalar>::Array values) {
    return Tensor<Scalar>(a.shape(), std::move(values));
}

thread_local ActivationPatternTrace* g_pattern_trace = nullptr;

// Number of elements per channel-plane group in [B,C,...].
inline Index inner_extent(const Shape& s) { return s.numel() / (s[0] * s[1]); }

}  // namespace

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
    require_same_shape("add", a, b);
    return record<Scalar>(like(a, a.value().array() + b.value().array()), "add", {a, b},
                          [](const Var<Scalar>& g, const std::vector<bool>&) { return std::vector<Var<Scalar>>{g, g}; });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
    require_same_shape("sub", a, b);
    return record<Scalar>(like(a, a.value().array() - b.value().array()), "sub", {a, b},
                          [](const Var<Scalar>& g, const std::vector<bool>& need) {
                              return std::vector<Var<Scalar>>{g, need[1] ? scale(g, Scalar(-1)) : Var<Scalar>()};
                          });
}

template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b) {
    require_same_shape("mul", a, b);
    return record<Scalar>(like(a, a.value().array() * b.value().array()), "mul", {a, b},
                          [a, b](const Var<Scalar>& g, const std::vector<bool>& need) {
                              return std::vector<Var<Scalar>>{need[0] ? mul(g, b) : Var<Scalar>(),
                                                              need[1] ? mul(g, a) : Var<Scalar>()};
                          });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar factor) {
    return record<Scalar>(like(a, a.value().array() * factor), "scale", {a},
                          [factor](const Var<Scalar>& g, const std::vector<bool>&) {
                              return std::vector<Var<Scalar>>{scale(g, factor)};
                          });
}

template <typename Scalar>
Var<Scalar> add_scalar(const Var<Scalar>& a, Scalar offset) {
    return record<Scalar>(like(a, a.value().array() + offset), "add_scalar", {a},
                          [](const Var<Scalar>& g, const std::vector<bool>&) { return std::vector<Var<Scalar>>{g}; });
}

template <typename Scalar>
Var<Scalar> mul_const(const Var<Scalar>& a, const Tensor<Scalar>& mask) {
    if (a.shape() != mask.shape()) {
        throw ShapeError("mul_const", "operand shapes differ: " + a.shape().str() + " vs " + mask.shape().str());
    }
    return record<Scalar>(like(a, a.value().array() * mask.array()), "mul_const", {a},
                          [mask](const Var<Scalar>& g, const std::vector<bool>&) {
                              return std::vector<Var<Scalar>>{mul_const(g, mask)};
                          });
}

template <typename Scalar>
Var<Scalar> pow(const Var<Scalar>& a, Scalar exponent) {
    if (exponent == Scalar(1)) return a;
    if (exponent == Scalar(0)) return Var<Scalar>::leaf(Tensor<Scalar>::constant(a.shape(), Scalar(1)));
    return record<Scalar>(like(a, a.value().array().pow(exponent)), "pow", {a},
                          [a, exponent](const Var<Scalar>& g, const std::vector<bool>&) {
                              return std::vector<Var<Scalar>>{mul(g, scale(pow(a, exponent - 1), exponent))};
                          });
}

template <typename Scalar>
Var<Scalar> square(const Var<Scalar>& a) {
    return mul(a, a);
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
    const Shape shape = a.shape();
    return record<Scalar>(Tensor<Scalar>::scalar(a.value().array().sum()), "sum", {a},
                          [shape](const Var<Scalar>& g, const std::vector<bool>&) {
                              return std::vector<Var<Scalar>>{expand_scalar(g, shape)};
                          });
}

template <typename Scalar>
Var<Scalar> mean(const Var<Scalar>& a) {
    return scale(sum(a), Scalar(1) / static_cast<Scalar>(a.value().size()));
}

template <typename Scalar>
Var<Scalar> expand_scalar(const Var<Scalar>& a, const Shape& shape) {
    return record<Scalar>(Tensor<Scalar>::constant(shape, a.value().item()), "expand_scalar", {a},
                          [](const Var<Scalar>& g, const std::vector<bool>&) {
                              return std::vector<Var<Scalar>>{sum(g)};
                          });
}

template <typename Scalar>
Var<Scalar> sum_per_sample(const Var<Scalar>& a) {
    const Shape shape = a.shape();
    const Index batch = shape[0];
    const Index inner = shape.numel() / batch;
    Tensor<Scalar> out(Shape{batch, 1});
    for (Index b = 0; b < batch; ++b) out[b] = a.value().array().segment(b * inner, inner).sum();
    return record<Scalar>(std::move(out), "sum_per_sample", {a},
                          [shape](const Var<Scalar>& g, const std::vector<bool>&) {
                              return std::vector<Var<Scalar>>{expand_per_sample(g, shape)};
                          });
}

template <typename Scalar>
Var<Scalar> expand_per_sample(const Var<Scalar>& a, const Shape& shape) {
    const Index batch = shape[0];
    if (a.value().size() != batch) throw ShapeError("expand_per_sample", "batch", batch, a.value().size());
    const Index inner = shape.numel() / batch;
    Tensor<Scalar> out(shape);
    for (Index b = 0; b < batch; ++b) out.array().segment(b * inner, inner).setConstant(a.value()[b]);
    const Shape source = a.shape();
    return record<Scalar>(std::move(out), "expand_per_sample", {a},
                          [source](const Var<Scalar>& g, const std::vector<bool>&) {
                              return std::vector<Var<Scalar>>{reshape(sum_per_sample(g), source)};
                          });
}

template <typename Scalar>
Var<Scalar> sum_to_channels(const Var<Scalar>& a) {
    const Shape shape = a.shape();
    if (shape.rank() < 2) throw ShapeError("sum_to_channels", "input must have rank >= 2, got " + shape.str());
    const Index batch = shape[0], channels = shape[1], inner = inner_extent(shape);
    Tensor<Scalar> out(Shape{channels});
    for (Index b = 0; b < batch; ++b) {
        for (Index c = 0; c < channels; ++c) out[c] += a.value().array().segment((b * channels + c) * inner, inner).sum();
    }
    return record<Scalar>(std::move(out), "sum_to_channels", {a},
                          [shape](const Var<Scalar>& g, const std::vector<bool>&) {
                              return std::vector<Var<Scalar>>{expand_channels(g, shape)};
                          });
}

template <typename Scalar>
Var<Scalar> expand_channels(const Var<Scalar>& a, const Shape& shape) {
    if (shape.rank() < 2) throw ShapeError("expand_channels", "target must have rank >= 2, got " + shape.str());
    const Index batch = shape[0], channels = shape[1], inner = inner_extent(shape);
    if (a.value().size() != channels) throw ShapeError("expand_channels", "channels", channels, a.value().size());
    Tensor<Scalar> out(shape);
    for (Index b = 0; b < batch; ++b) {
        for (Index c = 0; c < channels; ++c) {
            out.array().segment((b * channels + c) * inner, inner).setConstant(a.value()[c]);
        }
    }
    return record<Scalar>(std::move(out), "expand_channels", {a},
                          [](const Var<Scalar>& g, const std::vector<bool>&) {
                              return std::vector<Var<Scalar>>{sum_to_channels(g)};
                          });
}

template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& a, const Shape& shape) {
    const Shape source = a.shape();
    return record<Scalar>(a.value().reshaped(shape), "reshape", {a},
                          [source](const Var<Scalar>& g, const std::vector<bool>&) {
                              return std::vector<Var<Scalar>>{reshape(g, source)};
                          });
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
    if (a.shape().rank() != 2) throw ShapeError("transpose", "input must be rank 2, got " + a.shape().str());
    const Index rows = a.shape()[0], cols = a.shape()[1];
    Tensor<Scalar> out(Shape{cols, rows});
    Eigen::Map<RowMatrix<Scalar>> dst(out.data(), cols, rows);
    Eigen::Map<const RowMatrix<Scalar>> src(a.value().data(), rows, cols);
    constexpr Index tile = 32;  // keeps both sides of a block in cache
    for (Index r = 0; r < rows; r += tile) {
        for (Index c = 0; c < cols; c += tile) {
            const Index h = std::min(tile, rows - r), w = std::min(tile, cols - c);
            dst.block(c, r, w, h) = src.block(r, c, h, w).transpose();
        }
    }
    return record<Scalar>(std::move(out), "transpose", {a},
                          [](const Var<Scalar>& g, const std::vector<bool>&) {
                              return std::vector<Var<Scalar>>{transpose(g)};
                          });
}

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
    if (a.shape().rank() != 2) throw ShapeError("matmul", "left operand must be rank 2, got " + a.shape().str());
    if (b.shape().rank() != 2) throw ShapeError("matmul", "right operand must be rank 2, got " + b.shape().str());
    if (a.shape()[1] != b.shape()[0]) throw ShapeError("matmul", "inner", a.shape()[1], b.shape()[0]);
    const Index m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Tensor<Scalar> out(Shape{m, n});
    Eigen::Map<RowMatrix<Scalar>>(out.data(), m, n).noalias() =
        Eigen::Map<const RowMatrix<Scalar>>(a.value().data(), m, k) *
        Eigen::Map<const RowMatrix<Scalar>>(b.value().data(), k, n);
    return record<Scalar>(std::move(out), "matmul", {a, b},
                          [a, b](const Var<Scalar>& g, const std::vector<bool>& need) {
                              return std::vector<Var<Scalar>>{need[0] ? matmul(g, transpose(b)) : Var<Scalar>(),
                                                              need[1] ? matmul(transpose(a), g) : Var<Scalar>()};
                          });
}

template <typename Scalar>
Var<Scalar> concat_channels(const Var<Scalar>& a, const Var<Scalar>& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.rank() != 4 || sb.rank() != 4) throw ShapeError("concat_channels", "operands must be rank 4");
    if (sa[0] != sb[0]) throw ShapeError("concat_channels", "batch", sa[0], sb[0]);
    if (sa[2] != sb[2]) throw ShapeError("concat_channels", "height", sa[2], sb[2]);
    if (sa[3] != sb[3]) throw ShapeError("concat_channels", "width", sa[3], sb[3]);
    const Index batch = sa[0], ca = sa[1], cb = sb[1], plane = sa[2] * sa[3];
    Tensor<Scalar> out(Shape{batch, ca + cb, sa[2], sa[3]});
    for (Index n = 0; n < batch; ++n) {
        out.array().segment(n * (ca + cb) * plane, ca * plane) = a.value().array().segment(n * ca * plane, ca * plane);
        out.array().segment((n * (ca + cb) + ca) * plane, cb * plane) =
            b.value().array().segment(n * cb * plane, cb * plane);
    }
    return record<Scalar>(std::move(out), "concat_channels", {a, b},
                          [ca, cb](const Var<Scalar>& g, const std::vector<bool>& need) {
                              return std::vector<Var<Scalar>>{need[0] ? slice_channels(g, 0, ca) : Var<Scalar>(),
                                                              need[1] ? slice_channels(g, ca, cb) : Var<Scalar>()};
                          });
}

template <typename Scalar>
Var<Scalar> slice_channels(const Var<Scalar>& a, Index start, Index count) {
    const Shape& s = a.shape();
    if (s.rank() != 4) throw ShapeError("slice_channels", "input must be rank 4, got " + s.str());
    if (start < 0 || count < 1 || start + count > s[1]) throw ShapeError("slice_channels", "channels", start + count, s[1]);
    const Index batch = s[0], total = s[1], plane = s[2] * s[3];
    Tensor<Scalar> out(Shape{batch, count, s[2], s[3]});
    for (Index n = 0; n < batch; ++n) {
        out.array().segment(n * count * plane, count * plane) =
            a.value().array().segment((n * total + start) * plane, count * plane);
    }
    return record<Scalar>(std::move(out), "slice_channels", {a},
                          [start, total](const Var<Scalar>& g, const std::vector<bool>&) {
                              return std::vector<Var<Scalar>>{pad_channels(g, start, total)};
                          });
}

template <typename Scalar>
Var<Scalar> pad_channels(const Var<Scalar>& a, Index start, Index total) {
    const Shape& s = a.shape();
    if (s.rank() != 4) throw ShapeError("pad_channels", "input must be rank 4, got " + s.str());
    const Index batch = s[0], count = s[1], plane = s[2] * s[3];
    if (start < 0 || start + count > total) throw ShapeError("pad_channels", "channels", total, start + count);
    Tensor<Scalar> out(Shape{batch, total, s[2], s[3]});
    for (Index n = 0; n < batch; ++n) {
        out.array().segment((n * total + start) * plane, count * plane) =
            a.value().array().segment(n * count * plane, count * plane);
    }
    return record<Scalar>(std::move(out), "pad_channels", {a},
                          [start, count](const Var<Scalar>& g, const std::vector<bool>&) {
                              return std::vector<Var<Scalar>>{slice_channels(g, start, count)};
                          });
}

template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& w, ConvGeometry geom) {
    const Index h = x.shape()[2], wd = x.shape()[3];
    return record<Scalar>(kernels::conv2d(x.value(), w.value(), geom), "conv2d", {x, w},
                          [x, w, geom, h, wd](const Var<Scalar>& g, const std::vector<bool>& need) {
                              return std::vector<Var<Scalar>>{
                                  need[0] ? conv2d_input_adjoint(g, w, geom, h, wd) : Var<Scalar>(),
                                  need[1] ? conv2d_weight_adjoint(x, g, geom, w.shape()[2], w.shape()[3])
                                          : Var<Scalar>()};
                          });
}

template <typename Scalar>
Var<Scalar> conv2d_input_adjoint(const Var<Scalar>& dy, const Var<Scalar>& w, ConvGeometry geom, Index height,
                                 Index width) {
    return record<Scalar>(kernels::conv2d_input_adjoint(dy.value(), w.value(), geom, height, width),
                          "conv2d_input_adjoint", {dy, w},
                          [dy, w, geom](const Var<Scalar>& g, const std::vector<bool>& need) {
                              return std::vector<Var<Scalar>>{
                                  need[0] ? conv2d(g, w, geom) : Var<Scalar>(),
                                  need[1] ? conv2d_weight_adjoint(g, dy, geom, w.shape()[2], w.shape()[3])
                                          : Var<Scalar>()};
                          });
}

template <typename Scalar>
Var<Scalar> conv2d_weight_adjoint(const Var<Scalar>& x, const Var<Scalar>& dy, ConvGeometry geom, Index kh,
                                  Index kw) {
    const Index h = x.shape()[2], wd = x.shape()[3];
    return record<Scalar>(kernels::conv2d_weight_adjoint(x.value(), dy.value(), geom, kh, kw),
                          "conv2d_weight_adjoint", {x, dy},
                          [x, dy, geom, h, wd](const Var<Scalar>& g, const std::vector<bool>& need) {
                              return std::vector<Var<Scalar>>{
                                  need[0] ? conv2d_input_adjoint(dy, g, geom, h, wd) : Var<Scalar>(),
                                  need[1] ? conv2d(x, g, geom) : Var<Scalar>()};
                          });
}

template <typename Scalar>
Var<Scalar> add_channel_bias(const Var<Scalar>& x, const Var<Scalar>& bias) {
    if (bias.shape().rank() != 1) throw ShapeError("add_channel_bias", "bias must be rank 1, got " + bias.shape().str());
    if (x.shape().rank() < 2) throw ShapeError("add_channel_bias", "input must have rank >= 2, got " + x.shape().str());
    if (bias.shape()[0] != x.shape()[1]) throw ShapeError("add_channel_bias", "channels", x.shape()[1], bias.shape()[0]);
    return add(x, expand_channels(bias, x.shape()));
}

template <typename Scalar>
Var<Scalar> conv2d_valid(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias) {
    constexpr const char* op = "conv2d_valid";
    if (x.shape().rank() != 4) throw ShapeError(op, "input must be rank 4, got " + x.shape().str());
    if (weight.shape().rank() != 4) throw ShapeError(op, "weight must be rank 4, got " + weight.shape().str());
    if (weight.shape()[1] != x.shape()[1]) throw ShapeError(op, "input channels", weight.shape()[1], x.shape()[1]);
    if (x.shape()[2] < weight.shape()[2]) throw ShapeError(op, "height", weight.shape()[2], x.shape()[2]);
    if (x.shape()[3] < weight.shape()[3]) throw ShapeError(op, "width", weight.shape()[3], x.shape()[3]);
    if (bias.shape().rank() != 1 || bias.shape()[0] != weight.shape()[0]) {
        throw ShapeError(op, "bias", weight.shape()[0], bias.shape().numel());
    }
    return add_channel_bias(conv2d(x, weight, ConvGeometry{1, 0}), bias);
}

template <typename Scalar>
Var<Scalar> tconv2d_valid(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias) {
    constexpr const char* op = "tconv2d_valid";
    if (x.shape().rank() != 4) throw ShapeError(op, "input must be rank 4, got " + x.shape().str());
    if (weight.shape().rank() != 4) throw ShapeError(op, "weight must be rank 4, got " + weight.shape().str());
    if (weight.shape()[0] != x.shape()[1]) throw ShapeError(op, "input channels", weight.shape()[0], x.shape()[1]);
    if (bias.shape().rank() != 1 || bias.shape()[0] != weight.shape()[1]) {
        throw ShapeError(op, "bias", weight.shape()[1], bias.shape().numel());
    }
    const Index h = x.shape()[2] + weight.shape()[2] - 1;
    const Index w = x.shape()[3] + weight.shape()[3] - 1;
    return add_channel_bias(conv2d_input_adjoint(x, weight, ConvGeometry{1, 0}, h, w), bias);
}

template <typename Scalar>
Var<Scalar> dense(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias) {
    if (bias.shape().rank() != 1 || weight.shape().rank() != 2 || bias.shape()[0] != weight.shape()[1]) {
        throw ShapeError("dense", "bias", weight.shape().rank() == 2 ? weight.shape()[1] : -1, bias.shape().numel());
    }
    return add_channel_bias(matmul(x, weight), bias);
}

ActivationPatternTrace::ActivationPatternTrace() : previous_(g_pattern_trace) { g_pattern_trace = this; }

ActivationPatternTrace::~ActivationPatternTrace() { g_pattern_trace = previous_; }

void ActivationPatternTrace::mix(std::uint64_t value) noexcept {
    hash_ = (hash_ ^ value) * 1099511628211ull;
}

template <typename Scalar>
Var<Scalar> activation(const Var<Scalar>& x, Activation kind) {
    const auto& v = x.value().array();
    typename Tensor<Scalar>::Array out, slope;
    const char* name = "relu";
    switch (kind) {
        case Activation::relu:
            out = v.max(Scalar(0));
            slope = (v > Scalar(0)).template cast<Scalar>();
            break;
        case Activation::leaky_relu: {
            name = "leaky_relu";
            const auto leak = static_cast<Scalar>(kLeakySlope);
            out = (v > Scalar(0)).select(v, v * leak);
            slope = (v > Scalar(0)).select(Tensor<Scalar>::Array::Ones(v.size()),
                                           Tensor<Scalar>::Array::Constant(v.size(), leak));
            break;
        }
        case Activation::clip01:
            name = "clip01";
            out = v.max(Scalar(0)).min(Scalar(1));
            slope = ((v >= Scalar(0)) && (v <= Scalar(1))).template cast<Scalar>();
            break;
    }
    if (g_pattern_trace) {
        for (Index i = 0; i < v.size(); ++i) {
            g_pattern_trace->mix(static_cast<std::uint64_t>(v[i] > Scalar(0)) + 2 * static_cast<std::uint64_t>(v[i] > Scalar(1)) +
                                 4 * static_cast<std::uint64_t>(v[i] >= Scalar(0)));
        }
    }
    Tensor<Scalar> mask(x.shape(), std::move(slope));
    return record<Scalar>(Tensor<Scalar>(x.shape(), std::move(out)), name, {x},
                          [mask](const Var<Scalar>& g, const std::vector<bool>&) {
                              return std::vector<Var<Scalar>>{mul_const(g, mask)};
                          });
}

template <typename Scalar>
Var<Scalar> input_gradient_node(const Var<Scalar>& net_output, const Var<Scalar>& wrt) {
    if (!wrt.requires_grad()) throw InvalidArgument("input_gradient_node: input does not require a gradient");
    return grad(sum(net_output), {wrt}, /*create_graph=*/true, /*allow_unused=*/false).front();
}

#define MAPNN_INSTANTIATE_OPS(S)                                                                       \
    template Var<S> add<S>(const Var<S>&, const Var<S>&);                                              \
    template Var<S> sub<S>(const Var<S>&, const Var<S>&);                                              \
    template Var<S> mul<S>(const Var<S>&, const Var<S>&);                                              \
    template Var<S> scale<S>(const Var<S>&, S);                                                        \
    template Var<S> add_scalar<S>(const Var<S>&, S);                                                   \
    template Var<S> mul_const<S>(const Var<S>&, const Tensor<S>&);                                     \
    template Var<S> pow<S>(const Var<S>&, S);                                                          \
    template Var<S> square<S>(const Var<S>&);                                                          \
    template Var<S> sum<S>(const Var<S>&);                                                             \
    template Var<S> mean<S>(const Var<S>&);                                                            \
    template Var<S> expand_scalar<S>(const Var<S>&, const Shape&);                                     \
    template Var<S> sum_per_sample<S>(const Var<S>&);                                                  \
    template Var<S> expand_per_sample<S>(const Var<S>&, const Shape&);                                 \
    template Var<S> sum_to_channels<S>(const Var<S>&);                                                 \
    template Var<S> expand_channels<S>(const Var<S>&, const Shape&);                                   \
    template Var<S> reshape<S>(const Var<S>&, const Shape&);                                           \
    template Var<S> transpose<S>(const Var<S>&);                                                       \
    template Var<S> matmul<S>(const Var<S>&, const Var<S>&);                                           \
    template Var<S> concat_channels<S>(const Var<S>&, const Var<S>&);                                  \
    template Var<S> slice_channels<S>(const Var<S>&, Index, Index);                                    \
    template Var<S> pad_channels<S>(const Var<S>&, Index, Index);                                      \
    template Var<S> conv2d<S>(const Var<S>&, const Var<S>&, ConvGeometry);                             \
    template Var<S> conv2d_input_adjoint<S>(const Var<S>&, const Var<S>&, ConvGeometry, Index, Index); \
    template Var<S> conv2d_weight_adjoint<S>(const Var<S>&, const Var<S>&, ConvGeometry, Index, Index);\
    template Var<S> add_channel_bias<S>(const Var<S>&, const Var<S>&);                                 \
    template Var<S> conv2d_valid<S>(const Var<S>&, const Var<S>&, const Var<S>&);                      \
    template Var<S> tconv2d_valid<S>(const Var<S>&, const Var<S>&, const Var<S>&);                     \
    template Var<S> dense<S>(const Var<S>&, const Var<S>&, const Var<S>&);                             \
    template Var<S> activation<S>(const Var<S>&, Activation);                                          \
    template Var<S> input_gradient_node<S>(const Var<S>&, const Var<S>&);

MAPNN_INSTANTIATE_OPS(float)
MAPNN_INSTANTIATE_OPS(double)

}  // namespace mapnn::ad
