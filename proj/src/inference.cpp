#include "mapnn/inference.hpp"

#include <algorithm>

namespace mapnn::infer {

namespace {

// Per-axis blend weight for offset i in a tile of length len. An edge that
// faces a neighbouring tile first drops `margin` pixels, then ramps
// linearly over `overlap`.
double ramp(Index i, Index len, Index margin, Index overlap, bool inner_lo, bool inner_hi) {
    const Index lo = inner_lo ? margin : 0, hi = inner_hi ? len - margin : len;
    if (i < lo || i >= hi) return 0.0;
    double w = 1.0;
    if (inner_lo && overlap > 0) w = std::min(w, (static_cast<double>(i - lo) + 0.5) / static_cast<double>(overlap));
    if (inner_hi && overlap > 0) w = std::min(w, (static_cast<double>(hi - i) - 0.5) / static_cast<double>(overlap));
    return w;
}

Tensor<float> as_tensor(const ct::Image& img) {
    Tensor<float> t(Shape{1, 1, img.rows(), img.cols()});
    for (Index i = 0; i < img.size(); ++i) t[i] = static_cast<float>(img.data()[i]);
    return t;
}

}  // namespace

void TileConfig::validate() const {
    if (tile < kCpceMinExtent) throw InvalidArgument("tile size must be >= " + std::to_string(kCpceMinExtent));
    if (overlap < 0 || margin < 0) throw InvalidArgument("tile overlap and margin must be >= 0");
    if (tile <= 2 * margin + overlap) throw InvalidArgument("tile must exceed 2 * margin + overlap");
    if (tile_batch < 1) throw InvalidArgument("tile_batch must be >= 1");
}

std::vector<Index> tile_starts(Index n, Index tile, Index margin, Index overlap) {
    if (n <= tile) return {0};
    std::vector<Index> starts;
    const Index step = tile - 2 * margin - overlap;
    for (Index s = 0; s + tile < n; s += step) starts.push_back(s);
    starts.push_back(n - tile);
    return starts;
}

ct::Image clone_slice(const CpceParams<float>& params, const ct::Image& unit, const TileConfig& tiles) {
    tiles.validate();
    if (unit.rows() < kCpceMinExtent || unit.cols() < kCpceMinExtent) {
        throw InvalidArgument("slice must be at least " + std::to_string(kCpceMinExtent) + " pixels on each side");
    }
    ad::NoGradGuard no_grad;
    if (tiles.whole_image) {
        const auto out = clone_forward(params, ad::Var<float>::leaf(as_tensor(unit))).value();
        ct::Image img(unit.rows(), unit.cols());
        for (Index i = 0; i < img.size(); ++i) img.data()[i] = static_cast<double>(out[i]);
        return img;
    }

    const Index th = std::min(tiles.tile, unit.rows()), tw = std::min(tiles.tile, unit.cols());
    const auto rows = tile_starts(unit.rows(), th, tiles.margin, tiles.overlap);
    const auto cols = tile_starts(unit.cols(), tw, tiles.margin, tiles.overlap);
    std::vector<std::pair<Index, Index>> origins;
    for (Index r : rows)
        for (Index c : cols) origins.emplace_back(r, c);

    ct::Image acc = ct::Image::Zero(unit.rows(), unit.cols());
    ct::Image weight = ct::Image::Zero(unit.rows(), unit.cols());
    const auto n = static_cast<Index>(origins.size());
    for (Index start = 0; start < n; start += tiles.tile_batch) {
        const Index nb = std::min(tiles.tile_batch, n - start);
        Tensor<float> batch(Shape{nb, 1, th, tw});
        for (Index k = 0; k < nb; ++k) {
            const auto [r0, c0] = origins[static_cast<std::size_t>(start + k)];
            for (Index r = 0; r < th; ++r)
                for (Index c = 0; c < tw; ++c) batch.at(k, 0, r, c) = static_cast<float>(unit(r0 + r, c0 + c));
        }
        const auto out = clone_forward(params, ad::Var<float>::leaf(std::move(batch))).value();
        for (Index k = 0; k < nb; ++k) {
            const auto [r0, c0] = origins[static_cast<std::size_t>(start + k)];
            for (Index r = 0; r < th; ++r) {
                const double wr = ramp(r, th, tiles.margin, tiles.overlap, r0 > 0, r0 + th < unit.rows());
                for (Index c = 0; c < tw; ++c) {
                    const double w = wr * ramp(c, tw, tiles.margin, tiles.overlap, c0 > 0, c0 + tw < unit.cols());
                    if (w == 0.0) continue;
                    acc(r0 + r, c0 + c) += w * static_cast<double>(out.at(k, 0, r, c));
                    weight(r0 + r, c0 + c) += w;
                }
            }
        }
    }
    return (acc / weight).cwiseMax(0.0).cwiseMin(1.0);
}

DenoiseSequence progressive_infer(const CpceParams<float>& params, int training_depth, const ct::Image& unit,
                                  int max_depth, const TileConfig& tiles) {
    if (max_depth < 1) throw InvalidArgument("max_depth must be >= 1, got " + std::to_string(max_depth));
    if (max_depth > kMaxInferenceDepth) {
        throw InvalidArgument("max_depth " + std::to_string(max_depth) + " exceeds the cap of " +
                              std::to_string(kMaxInferenceDepth));
    }
    DenoiseSequence seq;
    seq.beyond_training_depth = max_depth > training_depth;
    seq.depths.reserve(static_cast<std::size_t>(max_depth));
    const ct::Image* current = &unit;
    for (int d = 0; d < max_depth; ++d) {
        seq.depths.push_back(clone_slice(params, *current, tiles));
        current = &seq.depths.back();
    }
    return seq;
}

DenoiseSequence progressive_infer_hu(const CpceParams<float>& params, int training_depth, const ct::Image& hu,
                                     int max_depth, ct::Window window, const TileConfig& tiles) {
    return progressive_infer(params, training_depth, ct::hu_window(hu, window), max_depth, tiles);
}

}  // namespace mapnn::infer
