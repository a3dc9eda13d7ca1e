#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mapnn/ops.hpp"
#include "mapnn/param_store.hpp"

namespace mapnn {

inline constexpr int kFeatureWidth = 32;
inline constexpr int kMaxInferenceDepth = 8;
inline constexpr Index kCpceMinExtent = 9;
inline constexpr Index kCpceParameterCount = 62'337;

/// Weights of the conveying-path encoder-decoder: four 3x3 convolutions,
/// three 3x3 transposed convolutions each followed by a 1x1 reducer applied
/// to the concatenation with the matching encoder map, and a final 3x3
/// transposed convolution down to one channel.
template <typename Scalar>
class CpceParams {
public:
    /// Every weight and bias zero.
    static CpceParams zeros();
    /// He-normal weights (1/fan_in for the final layer), zero biases.
    static CpceParams init(std::uint64_t seed);

    ParamStore<Scalar>& store() noexcept { return store_; }
    const ParamStore<Scalar>& store() const noexcept { return store_; }

private:
    ParamStore<Scalar> store_;
};

/// Wasserstein critic: six 3x3 convolutions (64,64,128,128,256,256 filters,
/// stride 1 on odd and 2 on even layers, zero same-padding), each followed
/// by a leaky ReLU, then dense 1024 (leaky ReLU) and dense 1.
template <typename Scalar>
class DiscriminatorParams {
public:
    static DiscriminatorParams zeros(Index patch_size = 64);
    static DiscriminatorParams init(std::uint64_t seed, Index patch_size = 64);

    Index patch_size() const noexcept { return patch_size_; }
    Index flattened_length() const noexcept { return 256 * (patch_size_ / 8) * (patch_size_ / 8); }

    ParamStore<Scalar>& store() noexcept { return store_; }
    const ParamStore<Scalar>& store() const noexcept { return store_; }

private:
    explicit DiscriminatorParams(Index patch_size);
    Index patch_size_ = 64;
    ParamStore<Scalar> store_;
};

template <typename Scalar>
struct ModelParams {
    CpceParams<Scalar> generator;
    DiscriminatorParams<Scalar> discriminator;
};

template <typename Scalar>
ModelParams<Scalar> init_params(std::uint64_t seed, Index patch_size = 64);

/// Residual estimate of the encoder-decoder for x[B,1,H,W] with H,W >= 9.
/// When `trace` is given it receives the shape of every intermediate map.
template <typename Scalar>
ad::Var<Scalar> cpce_forward(const CpceParams<Scalar>& p, const ad::Var<Scalar>& x,
                             std::vector<Shape>* trace = nullptr);

/// One CLONE: clip01(x + cpce_forward(x)).
template <typename Scalar>
ad::Var<Scalar> clone_forward(const CpceParams<Scalar>& p, const ad::Var<Scalar>& x);

/// Depth settings for the shared-parameter composition. Holds a reference,
/// never a copy, of the one parameter set every depth uses.
template <typename Scalar>
struct CloneConfig {
    std::reference_wrapper<const CpceParams<Scalar>> params;
    int training_depth = 5;
    int inference_depth = 1;
};

/// g^1(x) ... g^D(x).
template <typename Scalar>
struct DenoiseSequence {
    std::vector<ad::Var<Scalar>> outputs;
    bool beyond_training_depth = false;  // D > T: extrapolating past training
};

template <typename Scalar>
DenoiseSequence<Scalar> mapnn_forward(const CloneConfig<Scalar>& cfg, const ad::Var<Scalar>& x);

/// One critic value per batch element: x[B,1,P,P] -> [B,1].
template <typename Scalar>
ad::Var<Scalar> discriminator_forward(const DiscriminatorParams<Scalar>& d, const ad::Var<Scalar>& x);

}  // namespace mapnn
