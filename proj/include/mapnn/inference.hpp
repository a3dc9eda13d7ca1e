#pragma once

#include <vector>

#include "mapnn/ct_sim.hpp"
#include "mapnn/model.hpp"

namespace mapnn::infer {

/// Receptive radius of the encoder-decoder: an output pixel closer than this
/// to a cut edge sees truncated context.
inline constexpr Index kCpceContext = 8;

/// Full-slice evaluation of one CLONE. The slice is cut into tile x tile
/// patches. On every edge facing a neighbouring tile, `margin` pixels of
/// context are computed and dropped; the kept interiors overlap by `overlap`
/// pixels and are blended with linear ramps. whole_image runs the network
/// once on the entire slice instead.
struct TileConfig {
    Index tile = 64;
    Index overlap = 8;
    Index margin = kCpceContext;
    bool whole_image = false;
    Index tile_batch = 16;  // tiles per forward pass

    void validate() const;
};

/// Tile origins along one axis of length n: multiples of
/// tile - 2 * margin - overlap, then n - tile.
std::vector<Index> tile_starts(Index n, Index tile, Index margin, Index overlap);

/// One CLONE over a [0,1] slice.
ct::Image clone_slice(const CpceParams<float>& params, const ct::Image& unit, const TileConfig& tiles = {});

struct DenoiseSequence {
    std::vector<ct::Image> depths;  // depth d at index d-1, values in [0,1]
    bool beyond_training_depth = false;
};

/// g^1 ... g^max_depth of a [0,1] slice. Depth d+1 is clone_slice applied
/// to depth d, so each depth costs one pass. max_depth above
/// kMaxInferenceDepth is rejected with a message naming the cap.
DenoiseSequence progressive_infer(const CpceParams<float>& params, int training_depth, const ct::Image& unit,
                                  int max_depth, const TileConfig& tiles = {});

/// Windows a HU slice first.
DenoiseSequence progressive_infer_hu(const CpceParams<float>& params, int training_depth, const ct::Image& hu,
                                     int max_depth, ct::Window window, const TileConfig& tiles = {});

}  // namespace mapnn::infer
