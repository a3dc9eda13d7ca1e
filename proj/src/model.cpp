#include "mapnn/model.hpp"

#include <cmath>
#include <random>
#include <string>

namespace mapnn {
namespace {

using ad::Activation;
using ad::Var;

constexpr int kDiscFilters[6] = {64, 64, 128, 128, 256, 256};

template <typename Scalar>
Tensor<Scalar> gaussian(const Shape& shape, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    Tensor<Scalar> t(shape);
    for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(dist(rng));
    return t;
}

// Layer table of the generator: name, weight shape, fan-in, followed-by-ReLU.
struct LayerSpec {
    std::string name;
    Shape weight;
    Index bias;
    Index fan_in;
    bool rectified;
};

std::vector<LayerSpec> cpce_layers() {
    const Index f = kFeatureWidth;
    std::vector<LayerSpec> layers;
    layers.push_back({"cpce.conv1", Shape{f, 1, 3, 3}, f, 9, true});
    for (int i = 2; i <= 4; ++i) layers.push_back({"cpce.conv" + std::to_string(i), Shape{f, f, 3, 3}, f, f * 9, true});
    for (int i = 1; i <= 3; ++i) {
        layers.push_back({"cpce.deconv" + std::to_string(i), Shape{f, f, 3, 3}, f, f * 9, true});
        layers.push_back({"cpce.reduce" + std::to_string(i), Shape{f, 2 * f, 1, 1}, f, 2 * f, true});
    }
    layers.push_back({"cpce.deconv4", Shape{f, 1, 3, 3}, 1, f * 9, false});
    return layers;
}

std::vector<LayerSpec> discriminator_layers(Index patch_size) {
    std::vector<LayerSpec> layers;
    Index in = 1;
    for (int i = 0; i < 6; ++i) {
        const Index out = kDiscFilters[i];
        layers.push_back({"disc.conv" + std::to_string(i + 1), Shape{out, in, 3, 3}, out, in * 9, true});
        in = out;
    }
    const Index flat = 256 * (patch_size / 8) * (patch_size / 8);
    layers.push_back({"disc.fc1", Shape{flat, 1024}, 1024, flat, true});
    layers.push_back({"disc.fc2", Shape{1024, 1}, 1, 1024, false});
    return layers;
}

template <typename Scalar>
void populate(ParamStore<Scalar>& store, const std::vector<LayerSpec>& layers, std::mt19937_64* rng) {
    for (const auto& l : layers) {
        const double stddev = std::sqrt((l.rectified ? 2.0 : 1.0) / static_cast<double>(l.fan_in));
        store.bind(l.name + ".weight", rng ? gaussian<Scalar>(l.weight, stddev, *rng) : Tensor<Scalar>(l.weight));
        store.bind(l.name + ".bias", Tensor<Scalar>(Shape{l.bias}));
    }
}

void check_patch_size(Index patch_size) {
    if (patch_size < 8 || patch_size % 8 != 0) {
        throw InvalidArgument("discriminator patch size must be a positive multiple of 8, got " +
                              std::to_string(patch_size));
    }
}

template <typename Scalar>
void note(std::vector<Shape>* trace, const Var<Scalar>& v) {
    if (trace) trace->push_back(v.shape());
}

}  // namespace

template <typename Scalar>
CpceParams<Scalar> CpceParams<Scalar>::zeros() {
    CpceParams p;
    populate<Scalar>(p.store_, cpce_layers(), nullptr);
    return p;
}

template <typename Scalar>
CpceParams<Scalar> CpceParams<Scalar>::init(std::uint64_t seed) {
    CpceParams p;
    std::mt19937_64 rng(seed);
    populate<Scalar>(p.store_, cpce_layers(), &rng);
    return p;
}

template <typename Scalar>
DiscriminatorParams<Scalar>::DiscriminatorParams(Index patch_size) : patch_size_(patch_size) {
    check_patch_size(patch_size);
}

template <typename Scalar>
DiscriminatorParams<Scalar> DiscriminatorParams<Scalar>::zeros(Index patch_size) {
    DiscriminatorParams d(patch_size);
    populate<Scalar>(d.store_, discriminator_layers(patch_size), nullptr);
    return d;
}

template <typename Scalar>
DiscriminatorParams<Scalar> DiscriminatorParams<Scalar>::init(std::uint64_t seed, Index patch_size) {
    DiscriminatorParams d(patch_size);
    std::mt19937_64 rng(seed);
    populate<Scalar>(d.store_, discriminator_layers(patch_size), &rng);
    return d;
}

template <typename Scalar>
ModelParams<Scalar> init_params(std::uint64_t seed, Index patch_size) {
    std::seed_seq seq{seed, std::uint64_t{0x6d61706e6e}};
    std::uint32_t seeds[2];
    seq.generate(seeds, seeds + 2);
    return ModelParams<Scalar>{CpceParams<Scalar>::init(seeds[0]),
                               DiscriminatorParams<Scalar>::init(seeds[1], patch_size)};
}

template <typename Scalar>
Var<Scalar> cpce_forward(const CpceParams<Scalar>& p, const Var<Scalar>& x, std::vector<Shape>* trace) {
    const Shape& s = x.shape();
    if (s.rank() != 4) throw ShapeError("cpce_forward", "input must be [B,1,H,W], got " + s.str());
    if (s[1] != 1) throw ShapeError("cpce_forward", "channels", 1, s[1]);
    if (s[2] < kCpceMinExtent) throw ShapeError("cpce_forward", "height", kCpceMinExtent, s[2]);
    if (s[3] < kCpceMinExtent) throw ShapeError("cpce_forward", "width", kCpceMinExtent, s[3]);

    const auto& w = p.store();
    auto conv = [&](const Var<Scalar>& in, const std::string& name) {
        auto out = ad::activation(ad::conv2d_valid(in, w.at(name + ".weight"), w.at(name + ".bias")), Activation::relu);
        note(trace, out);
        return out;
    };
    auto deconv = [&](const Var<Scalar>& in, const std::string& name) {
        return ad::tconv2d_valid(in, w.at(name + ".weight"), w.at(name + ".bias"));
    };

    auto e1 = conv(x, "cpce.conv1");
    auto e2 = conv(e1, "cpce.conv2");
    auto e3 = conv(e2, "cpce.conv3");
    auto e4 = conv(e3, "cpce.conv4");

    // Each decoder stage meets the encoder map of equal size (58, 60, 62 for
    // a 64 input) through a conveying path.
    const Var<Scalar>* conveyed[3] = {&e3, &e2, &e1};
    Var<Scalar> h = e4;
    for (int stage = 0; stage < 3; ++stage) {
        const std::string idx = std::to_string(stage + 1);
        auto up = ad::activation(deconv(h, "cpce.deconv" + idx), Activation::relu);
        note(trace, up);
        auto joined = ad::concat_channels(up, *conveyed[stage]);
        note(trace, joined);
        h = conv(joined, "cpce.reduce" + idx);
    }
    auto residual = deconv(h, "cpce.deconv4");
    note(trace, residual);
    return residual;
}

template <typename Scalar>
Var<Scalar> clone_forward(const CpceParams<Scalar>& p, const Var<Scalar>& x) {
    return ad::activation(ad::add(x, cpce_forward(p, x)), Activation::clip01);
}

template <typename Scalar>
DenoiseSequence<Scalar> mapnn_forward(const CloneConfig<Scalar>& cfg, const Var<Scalar>& x) {
    const int depth = cfg.inference_depth;
    if (depth < 1) throw InvalidArgument("mapnn_forward: inference depth must be >= 1, got " + std::to_string(depth));
    if (depth > kMaxInferenceDepth) {
        throw InvalidArgument("mapnn_forward: inference depth " + std::to_string(depth) + " exceeds the cap of " +
                              std::to_string(kMaxInferenceDepth));
    }
    DenoiseSequence<Scalar> seq;
    seq.beyond_training_depth = depth > cfg.training_depth;
    Var<Scalar> current = x;
    for (int t = 0; t < depth; ++t) {
        current = clone_forward(cfg.params.get(), current);
        seq.outputs.push_back(current);
    }
    return seq;
}

template <typename Scalar>
Var<Scalar> discriminator_forward(const DiscriminatorParams<Scalar>& d, const Var<Scalar>& x) {
    const Shape& s = x.shape();
    const Index p = d.patch_size();
    if (s.rank() != 4) throw ShapeError("discriminator_forward", "input must be [B,1,P,P], got " + s.str());
    if (s[1] != 1) throw ShapeError("discriminator_forward", "channels", 1, s[1]);
    if (s[2] != p) throw ShapeError("discriminator_forward", "height", p, s[2]);
    if (s[3] != p) throw ShapeError("discriminator_forward", "width", p, s[3]);

    const auto& w = d.store();
    Var<Scalar> h = x;
    for (int i = 1; i <= 6; ++i) {
        const std::string name = "disc.conv" + std::to_string(i);
        const Index stride = (i % 2 == 0) ? 2 : 1;
        h = ad::add_channel_bias(ad::conv2d(h, w.at(name + ".weight"), {stride, 1}), w.at(name + ".bias"));
        h = ad::activation(h, Activation::leaky_relu);
    }
    h = ad::reshape(h, Shape{s[0], d.flattened_length()});
    h = ad::activation(ad::dense(h, w.at("disc.fc1.weight"), w.at("disc.fc1.bias")), Activation::leaky_relu);
    return ad::dense(h, w.at("disc.fc2.weight"), w.at("disc.fc2.bias"));
}

#define MAPNN_INSTANTIATE_MODEL(S)                                                                       \
    template class CpceParams<S>;                                                                        \
    template class DiscriminatorParams<S>;                                                               \
    template ModelParams<S> init_params<S>(std::uint64_t, Index);                                        \
    template Var<S> cpce_forward<S>(const CpceParams<S>&, const Var<S>&, std::vector<Shape>*);           \
    template Var<S> clone_forward<S>(const CpceParams<S>&, const Var<S>&);                               \
    template DenoiseSequence<S> mapnn_forward<S>(const CloneConfig<S>&, const Var<S>&);                  \
    template Var<S> discriminator_forward<S>(const DiscriminatorParams<S>&, const Var<S>&);

MAPNN_INSTANTIATE_MODEL(float)
MAPNN_INSTANTIATE_MODEL(double)

}  // namespace mapnn
