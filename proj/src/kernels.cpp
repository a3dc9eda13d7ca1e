#include "mapnn/kernels.hpp"

#include <Eigen/Dense>

#include <algorithm>

namespace mapnn::kernels {
namespace {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowMap = Eigen::Map<RowMatrix<Scalar>>;

template <typename Scalar>
using ConstRowMap = Eigen::Map<const RowMatrix<Scalar>>;

struct Dims {
    Index channels, height, width, kh, kw, out_h, out_w;
};

// Unfold one image [C,H,W] into columns [C*kh*kw, Ho*Wo] of `col`, whose
// rows are `ld` apart.
template <typename Scalar>
void im2col(const Scalar* img, const Dims& d, ConvGeometry g, Scalar* col, Index ld) {
    for (Index c = 0; c < d.channels; ++c) {
        const Scalar* plane = img + c * d.height * d.width;
        for (Index ki = 0; ki < d.kh; ++ki) {
            for (Index kj = 0; kj < d.kw; ++kj) {
                Scalar* row = col + ((c * d.kh + ki) * d.kw + kj) * ld;
                for (Index oh = 0; oh < d.out_h; ++oh) {
                    const Index ih = oh * g.stride - g.pad + ki;
                    Scalar* dst = row + oh * d.out_w;
                    if (ih < 0 || ih >= d.height) {
                        std::fill(dst, dst + d.out_w, Scalar(0));
                        continue;
                    }
                    const Scalar* src = plane + ih * d.width;
                    if (g.stride == 1) {
                        const Index lo = std::min<Index>(d.out_w, std::max<Index>(0, g.pad - kj));
                        const Index hi = std::min<Index>(d.out_w, d.width + g.pad - kj);
                        std::fill(dst, dst + lo, Scalar(0));
                        if (hi > lo) std::copy(src + lo - g.pad + kj, src + hi - g.pad + kj, dst + lo);
                        std::fill(dst + std::max(lo, hi), dst + d.out_w, Scalar(0));
                    } else {
                        for (Index ow = 0; ow < d.out_w; ++ow) {
                            const Index iw = ow * g.stride - g.pad + kj;
                            dst[ow] = (iw < 0 || iw >= d.width) ? Scalar(0) : src[iw];
                        }
                    }
                }
            }
        }
    }
}

// Scatter-add columns back into an image; the adjoint of im2col.
template <typename Scalar>
void col2im(const Scalar* col, Index ld, const Dims& d, ConvGeometry g, Scalar* img) {
    for (Index c = 0; c < d.channels; ++c) {
        Scalar* plane = img + c * d.height * d.width;
        for (Index ki = 0; ki < d.kh; ++ki) {
            for (Index kj = 0; kj < d.kw; ++kj) {
                const Scalar* row = col + ((c * d.kh + ki) * d.kw + kj) * ld;
                for (Index oh = 0; oh < d.out_h; ++oh) {
                    const Index ih = oh * g.stride - g.pad + ki;
                    if (ih < 0 || ih >= d.height) continue;
                    const Scalar* src = row + oh * d.out_w;
                    Scalar* dst = plane + ih * d.width;
                    for (Index ow = 0; ow < d.out_w; ++ow) {
                        const Index iw = ow * g.stride - g.pad + kj;
                        if (iw >= 0 && iw < d.width) dst[iw] += src[ow];
                    }
                }
            }
        }
    }
}

void require_rank4(const char* op, const char* name, const Shape& s) {
    if (s.rank() != 4) throw ShapeError(op, std::string(name) + " must be rank 4, got " + s.str());
}

void check_geometry(const char* op, ConvGeometry g) {
    if (g.stride < 1) throw ShapeError(op, "stride", 1, g.stride);
    if (g.pad < 0) throw ShapeError(op, "pad", 0, g.pad);
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& w, ConvGeometry g) {
    constexpr const char* op = "conv2d";
    require_rank4(op, "input", x.shape());
    require_rank4(op, "weight", w.shape());
    check_geometry(op, g);
    if (w.dim(1) != x.dim(1)) throw ShapeError(op, "input channels", w.dim(1), x.dim(1));
    const Index batch = x.dim(0), out_c = w.dim(0);
    Dims d{x.dim(1), x.dim(2), x.dim(3), w.dim(2), w.dim(3), 0, 0};
    if (d.height + 2 * g.pad < d.kh) throw ShapeError(op, "height", d.kh, d.height + 2 * g.pad);
    if (d.width + 2 * g.pad < d.kw) throw ShapeError(op, "width", d.kw, d.width + 2 * g.pad);
    d.out_h = conv_output_extent(d.height, d.kh, g);
    d.out_w = conv_output_extent(d.width, d.kw, g);

    Tensor<Scalar> y(Shape{batch, out_c, d.out_h, d.out_w});
    ConstRowMap<Scalar> wm(w.data(), out_c, d.channels * d.kh * d.kw);
    const Index in_stride = d.channels * d.height * d.width;
    const Index plane = d.out_h * d.out_w;
    const bool pointwise = d.kh == 1 && d.kw == 1 && g.stride == 1 && g.pad == 0;
    RowMatrix<Scalar> col(d.channels * d.kh * d.kw, plane);
    for (Index b = 0; b < batch; ++b) {
        RowMap<Scalar> ym(y.data() + b * out_c * plane, out_c, plane);
        if (pointwise) {
            ym.noalias() = wm * ConstRowMap<Scalar>(x.data() + b * in_stride, d.channels, plane);
        } else {
            im2col(x.data() + b * in_stride, d, g, col.data(), plane);
            ym.noalias() = wm * col;
        }
    }
    return y;
}

template <typename Scalar>
Tensor<Scalar> conv2d_input_adjoint(const Tensor<Scalar>& dy, const Tensor<Scalar>& w, ConvGeometry g,
                                    Index height, Index width) {
    constexpr const char* op = "conv2d_input_adjoint";
    require_rank4(op, "gradient", dy.shape());
    require_rank4(op, "weight", w.shape());
    check_geometry(op, g);
    if (w.dim(0) != dy.dim(1)) throw ShapeError(op, "output channels", w.dim(0), dy.dim(1));
    const Index batch = dy.dim(0), out_c = w.dim(0);
    Dims d{w.dim(1), height, width, w.dim(2), w.dim(3), 0, 0};
    d.out_h = conv_output_extent(height, d.kh, g);
    d.out_w = conv_output_extent(width, d.kw, g);
    if (d.out_h != dy.dim(2)) throw ShapeError(op, "height", d.out_h, dy.dim(2));
    if (d.out_w != dy.dim(3)) throw ShapeError(op, "width", d.out_w, dy.dim(3));

    Tensor<Scalar> dx(Shape{batch, d.channels, height, width});
    ConstRowMap<Scalar> wm(w.data(), out_c, d.channels * d.kh * d.kw);
    const Index in_stride = d.channels * height * width;
    const Index plane = d.out_h * d.out_w;
    const bool pointwise = d.kh == 1 && d.kw == 1 && g.stride == 1 && g.pad == 0;
    RowMatrix<Scalar> col(d.channels * d.kh * d.kw, plane);
    for (Index b = 0; b < batch; ++b) {
        ConstRowMap<Scalar> dym(dy.data() + b * out_c * plane, out_c, plane);
        if (pointwise) {
            RowMap<Scalar>(dx.data() + b * in_stride, d.channels, plane).noalias() = wm.transpose() * dym;
        } else {
            col.noalias() = wm.transpose() * dym;
            col2im(col.data(), plane, d, g, dx.data() + b * in_stride);
        }
    }
    return dx;
}

template <typename Scalar>
Tensor<Scalar> conv2d_weight_adjoint(const Tensor<Scalar>& x, const Tensor<Scalar>& dy, ConvGeometry g,
                                     Index kh, Index kw) {
    constexpr const char* op = "conv2d_weight_adjoint";
    require_rank4(op, "input", x.shape());
    require_rank4(op, "gradient", dy.shape());
    check_geometry(op, g);
    if (x.dim(0) != dy.dim(0)) throw ShapeError(op, "batch", x.dim(0), dy.dim(0));
    const Index batch = x.dim(0), out_c = dy.dim(1);
    Dims d{x.dim(1), x.dim(2), x.dim(3), kh, kw, 0, 0};
    d.out_h = conv_output_extent(d.height, kh, g);
    d.out_w = conv_output_extent(d.width, kw, g);
    if (d.out_h != dy.dim(2)) throw ShapeError(op, "height", d.out_h, dy.dim(2));
    if (d.out_w != dy.dim(3)) throw ShapeError(op, "width", d.out_w, dy.dim(3));

    Tensor<Scalar> dw(Shape{out_c, d.channels, kh, kw});
    RowMap<Scalar> dwm(dw.data(), out_c, d.channels * kh * kw);
    const Index in_stride = d.channels * d.height * d.width;
    const Index plane = d.out_h * d.out_w;
    const bool pointwise = kh == 1 && kw == 1 && g.stride == 1 && g.pad == 0;
    RowMatrix<Scalar> col(d.channels * kh * kw, plane);
    for (Index b = 0; b < batch; ++b) {
        ConstRowMap<Scalar> dym(dy.data() + b * out_c * plane, out_c, plane);
        if (pointwise) {
            dwm.noalias() += dym * ConstRowMap<Scalar>(x.data() + b * in_stride, d.channels, plane).transpose();
        } else {
            im2col(x.data() + b * in_stride, d, g, col.data(), plane);
            dwm.noalias() += dym * col.transpose();
        }
    }
    return dw;
}

#define MAPNN_INSTANTIATE_KERNELS(S)                                                                   \
    template Tensor<S> conv2d<S>(const Tensor<S>&, const Tensor<S>&, ConvGeometry);                     \
    template Tensor<S> conv2d_input_adjoint<S>(const Tensor<S>&, const Tensor<S>&, ConvGeometry, Index, \
                                               Index);                                                  \
    template Tensor<S> conv2d_weight_adjoint<S>(const Tensor<S>&, const Tensor<S>&, ConvGeometry, Index, \
                                                Index);

MAPNN_INSTANTIATE_KERNELS(float)
MAPNN_INSTANTIATE_KERNELS(double)

}  // namespace mapnn::kernels
