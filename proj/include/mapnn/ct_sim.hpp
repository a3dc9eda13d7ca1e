#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "mapnn/error.hpp"

namespace mapnn {
using Index = Eigen::Index;
}

namespace mapnn::ct {

/// Row 0 is the top of the image; column 0 the left edge.
using Image = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Linear attenuation of water in 1/cm; phantom value 1.0 means water.
inline constexpr double kMuWater = 0.2;

/// Ellipse in normalized coordinates: the image spans [-1,1] on both axes,
/// y pointing up. `value` is added inside the ellipse.
struct Ellipse {
    double x0 = 0, y0 = 0;
    double a = 0, b = 0;  // semi-axes along the rotated x and y directions
    double theta = 0;     // radians, counter-clockwise
    double value = 0;
};

struct PhantomSpec {
    std::vector<Ellipse> ellipses;
    Index size = 256;
    /// Relative random perturbation of centers, axes and angles; 0 keeps the
    /// ellipses exactly as listed.
    double jitter = 0;
    double min_value = 0;  // rasterized values are clamped to this range
    double max_value = 3;
};

enum class Region { abdomen, chest };

Region parse_region(const std::string& name);
std::string region_name(Region r);

/// Shepp-Logan head phantom with the high-contrast modified intensities.
PhantomSpec shepp_logan(Index size = 256);
/// Water-based torso cross sections in phantom units (1.0 = water): body,
/// fat rim, organs, vertebra, small low-contrast lesions; the chest variant
/// replaces the organs with two air-filled lungs.
PhantomSpec body_phantom(Region region, Index size = 256, double jitter = 0.08);

/// Copy of `spec` whose ellipses carry one fixed random perturbation of
/// relative size `jitter`; the copy's own jitter is left unchanged.
PhantomSpec perturbed(const PhantomSpec& spec, double jitter, std::uint64_t seed);

/// Pixel-center membership rasterization. Deterministic in (spec, seed).
Image make_phantom(const PhantomSpec& spec, std::uint64_t seed = 0);

/// HU of phantom values: 1000 (v - 1).
Image phantom_to_hu(const Image& v);

enum class SinogramMode { line_integral, counts };

/// n_views x n_det. Views are spaced uniformly over [0, pi); detector bin j
/// sits at s = (j - (n_det-1)/2) * spacing.
struct Sinogram {
    Image values;
    SinogramMode mode = SinogramMode::line_integral;
    double spacing = 1.0;

    Index n_views() const noexcept { return values.rows(); }
    Index n_det() const noexcept { return values.cols(); }
    double angle(Index view) const;
};

/// Smallest detector count covering the image diagonal: ceil(N sqrt 2).
Index min_detectors(Index image_size);

/// Parallel-beam line integrals. Each ray is sampled at half-pixel steps with
/// bilinear interpolation (zero outside the image). Detector spacing equals
/// pixel_size; n_det = 0 selects min_detectors.
Sinogram radon(const Image& img, Index n_views, Index n_det = 0, double pixel_size = 1.0);

/// Ram-Lak filtered backprojection onto an N x N grid with the sinogram's
/// spacing as pixel size. Count-mode sinograms are rejected.
Image fbp(const Sinogram& sino, Index size);

struct DoseParams {
    double I0 = 1e5;           // incident photons per bin at full dose
    double dose_factor = 0.25;
};

struct NoisySinogram {
    Sinogram sino;
    Index clamped = 0;  // bins whose draw was raised to one photon
};

/// Photon counts c ~ Poisson(dose_factor I0 exp(-p)), clamped to c >= 1.
/// Every view draws from its own stream seeded by (seed, view).
NoisySinogram simulate_counts(const Sinogram& sino, const DoseParams& dose, std::uint64_t seed);

/// p = ln(dose_factor I0 / c).
Sinogram log_convert(const Sinogram& counts, const DoseParams& dose);

/// simulate_counts followed by log_convert.
NoisySinogram insert_poisson_noise(const Sinogram& sino, const DoseParams& dose, std::uint64_t seed);

enum class Window { abdomen, chest };

struct HuRange {
    double lo, hi;
};

/// abdomen: level 40, width 400; chest: level -600, width 1500.
HuRange window_range(Window w);
Window parse_window(const std::string& name);
std::string window_name(Window w);
Window window_for(Region r);

/// Affine [lo, hi] -> [0, 1], clamped.
Image hu_window(const Image& hu, Window w);

struct Geometry {
    Index n_views = 360;
    Index n_det = 0;           // 0 selects min_detectors
    double pixel_size = 0.15;  // cm
};

/// Registered normal- and low-dose reconstructions (HU) of one phantom
/// slice, both from the same noiseless sinogram.
struct SlicePair {
    Image ndct_hu;
    Image ldct_hu;
    Index ndct_clamped = 0;
    Index ldct_clamped = 0;
};

/// NDCT uses dose_factor 1, LDCT `dose.dose_factor`; the two noise draws use
/// independent streams derived from `seed`.
SlicePair simulate_pair(const Image& phantom, const Geometry& geometry, const DoseParams& dose, std::uint64_t seed);

}  // namespace mapnn::ct
