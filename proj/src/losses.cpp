#include "mapnn/losses.hpp"

#include <cmath>

namespace mapnn {
namespace {

using ad::Var;

constexpr double kNormGuard = 1e-12;

template <typename Scalar>
void require_same(const char* op, const Shape& a, const Shape& b) {
    if (a != b) throw ShapeError(op, "shapes differ: " + a.str() + " vs " + b.str());
}

template <typename Scalar>
Tensor<Scalar> sobel_kernel() {
    Tensor<Scalar> k(Shape{2, 1, 3, 3});
    const Scalar gx[9] = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            k.at(0, 0, i, j) = gx[i * 3 + j];
            k.at(1, 0, i, j) = gx[j * 3 + i];
        }
    }
    return k;
}

}  // namespace

void LossWeights::validate() const {
    if (!(lambda_g >= 0 && lambda_m >= 0 && lambda_e >= 0)) {
        throw InvalidArgument("loss weights must be non-negative");
    }
    if (adversarial_sign != 1.0 && adversarial_sign != -1.0) {
        throw InvalidArgument("adversarial_sign must be +1 or -1");
    }
}

template <typename Scalar>
GpSample<Scalar> make_gp_sample(const Tensor<Scalar>& gen_out, const Tensor<Scalar>& real, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Tensor<Scalar> eps(Shape{gen_out.dim(0)});
    for (Index b = 0; b < eps.size(); ++b) eps[b] = static_cast<Scalar>(unit(rng));
    return make_gp_sample(gen_out, real, eps);
}

template <typename Scalar>
GpSample<Scalar> make_gp_sample(const Tensor<Scalar>& gen_out, const Tensor<Scalar>& real,
                                const Tensor<Scalar>& epsilon) {
    require_same<Scalar>("make_gp_sample", gen_out.shape(), real.shape());
    const Index batch = gen_out.dim(0);
    if (epsilon.size() != batch) throw ShapeError("make_gp_sample", "batch", batch, epsilon.size());
    const Index inner = gen_out.size() / batch;
    Tensor<Scalar> mix(gen_out.shape());
    for (Index b = 0; b < batch; ++b) {
        const Scalar e = epsilon[b];
        if (!(e >= 0 && e <= 1)) throw InvalidArgument("make_gp_sample: epsilon outside [0,1]");
        mix.array().segment(b * inner, inner) =
            e * gen_out.array().segment(b * inner, inner) + (Scalar(1) - e) * real.array().segment(b * inner, inner);
    }
    return GpSample<Scalar>{epsilon, std::move(mix)};
}

template <typename Scalar>
CriticLoss<Scalar> critic_loss(const Critic<Scalar>& critic, const Tensor<Scalar>& gen_out, const Tensor<Scalar>& real,
                               const LossWeights& w, const GpSample<Scalar>& sample) {
    require_same<Scalar>("critic_loss", gen_out.shape(), real.shape());
    require_same<Scalar>("critic_loss", gen_out.shape(), sample.interpolate.shape());
    ad::GradModeGuard recording(true);

    auto fake_score = ad::mean(critic(Var<Scalar>::leaf(gen_out)));
    auto real_score = ad::mean(critic(Var<Scalar>::leaf(real)));
    auto wasserstein = ad::sub(fake_score, real_score);

    auto xbar = Var<Scalar>::leaf(sample.interpolate, true);
    auto grad_x = ad::input_gradient_node(critic(xbar), xbar);
    auto norm = ad::pow(ad::add_scalar(ad::sum_per_sample(ad::square(grad_x)), Scalar(kNormGuard)), Scalar(0.5));
    auto penalty = ad::scale(ad::mean(ad::square(ad::add_scalar(norm, Scalar(-1)))), Scalar(w.lambda_g));

    CriticLoss<Scalar> out;
    out.wasserstein = wasserstein.value().item();
    out.penalty = penalty.value().item();
    out.total = ad::add(wasserstein, penalty);
    return out;
}

template <typename Scalar>
Var<Scalar> adversarial_gen_loss(const Critic<Scalar>& critic, const Var<Scalar>& gen_out) {
    return ad::mean(critic(gen_out));
}

template <typename Scalar>
Var<Scalar> mse_loss(const Var<Scalar>& gen_out, const Tensor<Scalar>& real) {
    require_same<Scalar>("mse_loss", gen_out.shape(), real.shape());
    return ad::mean(ad::square(ad::sub(gen_out, Var<Scalar>::leaf(real))));
}

template <typename Scalar>
Var<Scalar> sobel_maps(const Var<Scalar>& img) {
    const Shape& s = img.shape();
    if (s.rank() != 4 || s[1] != 1) throw ShapeError("sobel_maps", "input must be [B,1,H,W], got " + s.str());
    if (s[2] < 3) throw ShapeError("sobel_maps", "height", 3, s[2]);
    if (s[3] < 3) throw ShapeError("sobel_maps", "width", 3, s[3]);
    static const Tensor<Scalar> kernel = sobel_kernel<Scalar>();
    return ad::conv2d(img, Var<Scalar>::leaf(kernel), {1, 0});
}

template <typename Scalar>
Var<Scalar> edge_incoherence(const Var<Scalar>& gen_out, const Tensor<Scalar>& real) {
    require_same<Scalar>("edge_incoherence", gen_out.shape(), real.shape());
    auto target = sobel_maps(Var<Scalar>::leaf(real));
    return ad::mean(ad::square(ad::sub(sobel_maps(gen_out), target)));
}

template <typename Scalar>
GeneratorLoss<Scalar> composite_gen_loss(const Critic<Scalar>& critic, const Var<Scalar>& gen_out,
                                         const Tensor<Scalar>& real, const LossWeights& w) {
    GeneratorLoss<Scalar> out;
    auto adversarial = adversarial_gen_loss(critic, gen_out);
    auto mse = mse_loss(gen_out, real);
    auto edge = edge_incoherence(gen_out, real);
    out.adversarial = adversarial.value().item();
    out.mse = mse.value().item();
    out.edge = edge.value().item();
    out.total = ad::add(ad::add(ad::scale(adversarial, Scalar(w.adversarial_sign)), ad::scale(mse, Scalar(w.lambda_m))),
                        ad::scale(edge, Scalar(w.lambda_e)));
    return out;
}

#define MAPNN_INSTANTIATE_LOSSES(S)                                                                           \
    template GpSample<S> make_gp_sample<S>(const Tensor<S>&, const Tensor<S>&, std::mt19937_64&);             \
    template GpSample<S> make_gp_sample<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&);             \
    template CriticLoss<S> critic_loss<S>(const Critic<S>&, const Tensor<S>&, const Tensor<S>&,               \
                                          const LossWeights&, const GpSample<S>&);                            \
    template Var<S> adversarial_gen_loss<S>(const Critic<S>&, const Var<S>&);                                 \
    template Var<S> mse_loss<S>(const Var<S>&, const Tensor<S>&);                                             \
    template Var<S> sobel_maps<S>(const Var<S>&);                                                             \
    template Var<S> edge_incoherence<S>(const Var<S>&, const Tensor<S>&);                                     \
    template GeneratorLoss<S> composite_gen_loss<S>(const Critic<S>&, const Var<S>&, const Tensor<S>&,        \
                                                    const LossWeights&);

MAPNN_INSTANTIATE_LOSSES(float)
MAPNN_INSTANTIATE_LOSSES(double)

}  // namespace mapnn
