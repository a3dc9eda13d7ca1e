#include "mapnn/ct_sim.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "mapnn/seeding.hpp"

namespace mapnn::ct {

namespace {

using std::numbers::pi;

// Pixel centers in normalized [-1,1] coordinates.
double norm_x(Index c, Index n) { return (2.0 * static_cast<double>(c) + 1.0) / static_cast<double>(n) - 1.0; }
double norm_y(Index r, Index n) { return 1.0 - (2.0 * static_cast<double>(r) + 1.0) / static_cast<double>(n); }

Ellipse perturb(const Ellipse& e, double jitter, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Ellipse p = e;
    const double reach = std::max(e.a, e.b);
    p.x0 += 0.5 * jitter * reach * u(rng);
    p.y0 += 0.5 * jitter * reach * u(rng);
    p.a *= 1.0 + jitter * u(rng);
    p.b *= 1.0 + jitter * u(rng);
    p.theta += jitter * u(rng);
    return p;
}

double bilinear(const Image& img, double row, double col) {
    const Index n_rows = img.rows(), n_cols = img.cols();
    if (row <= -1.0 || col <= -1.0 || row >= static_cast<double>(n_rows) || col >= static_cast<double>(n_cols)) return 0.0;
    const double fr = std::floor(row), fc = std::floor(col);
    const auto r0 = static_cast<Index>(fr), c0 = static_cast<Index>(fc);
    const double wr = row - fr, wc = col - fc;
    double v = 0.0;
    if (r0 >= 0) {
        if (c0 >= 0) v += (1 - wr) * (1 - wc) * img(r0, c0);
        if (c0 + 1 < n_cols) v += (1 - wr) * wc * img(r0, c0 + 1);
    }
    if (r0 + 1 < n_rows) {
        if (c0 >= 0) v += wr * (1 - wc) * img(r0 + 1, c0);
        if (c0 + 1 < n_cols) v += wr * wc * img(r0 + 1, c0 + 1);
    }
    return v;
}

Index next_pow2(Index n) {
    Index p = 1;
    while (p < n) p <<= 1;
    return p;
}

void require_line_integrals(const Sinogram& s, const char* op) {
    if (s.mode != SinogramMode::line_integral) {
        throw InvalidArgument(std::string(op) + ": sinogram holds photon counts; log-convert it first");
    }
}

}  // namespace

Region parse_region(const std::string& name) {
    if (name == "abdomen") return Region::abdomen;
    if (name == "chest") return Region::chest;
    throw InvalidArgument("unknown region '" + name + "' (expected abdomen or chest)");
}

std::string region_name(Region r) { return r == Region::abdomen ? "abdomen" : "chest"; }

PhantomSpec shepp_logan(Index size) {
    PhantomSpec spec;
    spec.size = size;
    const double d = pi / 180.0;
    spec.ellipses = {
        {0.0, 0.0, 0.69, 0.92, 0.0, 1.0},          {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8},
        {0.22, 0.0, 0.11, 0.31, -18 * d, -0.2},    {-0.22, 0.0, 0.16, 0.41, 18 * d, -0.2},
        {0.0, 0.35, 0.21, 0.25, 0.0, 0.1},         {0.0, 0.1, 0.046, 0.046, 0.0, 0.1},
        {0.0, -0.1, 0.046, 0.046, 0.0, 0.1},       {-0.08, -0.605, 0.046, 0.023, 0.0, 0.1},
        {0.0, -0.606, 0.023, 0.023, 0.0, 0.1},     {0.06, -0.605, 0.023, 0.046, 0.0, 0.1},
    };
    return spec;
}

PhantomSpec body_phantom(Region region, Index size, double jitter) {
    PhantomSpec spec;
    spec.size = size;
    spec.jitter = jitter;
    // Fat-filled body outline, then a soft-tissue core raising it to ~40 HU.
    spec.ellipses = {{0.0, 0.0, 0.80, 0.60, 0.0, 0.92}, {0.0, 0.0, 0.72, 0.52, 0.0, 0.12}};
    // Vertebral body with spinal canal.
    spec.ellipses.push_back({0.0, -0.36, 0.10, 0.09, 0.0, 0.60});
    spec.ellipses.push_back({0.0, -0.37, 0.035, 0.03, 0.0, -0.60});
    if (region == Region::abdomen) {
        spec.ellipses.insert(spec.ellipses.end(), {
                                                      {-0.30, 0.10, 0.30, 0.24, 0.3, 0.02},    // liver
                                                      {0.42, 0.12, 0.12, 0.18, -0.4, 0.01},    // spleen
                                                      {-0.32, -0.24, 0.08, 0.12, 0.2, 0.02},   // kidneys
                                                      {0.32, -0.24, 0.08, 0.12, -0.2, 0.02},
                                                      {0.05, -0.19, 0.045, 0.045, 0.0, 0.15},  // aorta
                                                      {0.18, 0.32, 0.07, 0.05, 0.0, -1.04},    // bowel gas
                                                      {-0.36, 0.16, 0.04, 0.04, 0.0, -0.03},   // lesions
                                                      {0.20, 0.00, 0.03, 0.03, 0.0, 0.03},
                                                  });
    } else {
        spec.ellipses.insert(spec.ellipses.end(), {
                                                      {-0.40, 0.06, 0.22, 0.36, 0.1, -0.84},   // lungs
                                                      {0.40, 0.06, 0.22, 0.36, -0.1, -0.84},
                                                      {0.04, -0.04, 0.13, 0.14, 0.0, 0.02},    // heart
                                                      {0.0, 0.50, 0.06, 0.025, 0.0, 0.60},     // sternum
                                                      {-0.42, 0.20, 0.025, 0.025, 0.0, 0.84},  // nodules
                                                      {0.36, -0.10, 0.02, 0.02, 0.0, 0.84},
                                                      {-0.35, -0.12, 0.012, 0.05, 0.5, 0.80},  // vessel
                                                  });
    }
    return spec;
}

PhantomSpec perturbed(const PhantomSpec& spec, double jitter, std::uint64_t seed) {
    PhantomSpec out = spec;
    std::mt19937_64 rng(seed);
    for (auto& e : out.ellipses) e = perturb(e, jitter, rng);
    return out;
}

Image make_phantom(const PhantomSpec& spec, std::uint64_t seed) {
    if (spec.size < 1) throw InvalidArgument("make_phantom: size must be positive");
    const Index n = spec.size;
    Image img = Image::Zero(n, n);
    std::mt19937_64 rng(seed);
    for (const auto& raw : spec.ellipses) {
        const Ellipse e = spec.jitter > 0 ? perturb(raw, spec.jitter, rng) : raw;
        if (e.a <= 0 || e.b <= 0) continue;
        const double ct = std::cos(e.theta), st = std::sin(e.theta);
        for (Index r = 0; r < n; ++r) {
            const double dy = norm_y(r, n) - e.y0;
            for (Index c = 0; c < n; ++c) {
                const double dx = norm_x(c, n) - e.x0;
                const double u = (dx * ct + dy * st) / e.a;
                const double v = (-dx * st + dy * ct) / e.b;
                if (u * u + v * v <= 1.0) img(r, c) += e.value;
            }
        }
    }
    return img.max(spec.min_value).min(spec.max_value);
}

Image phantom_to_hu(const Image& v) { return 1000.0 * (v - 1.0); }

double Sinogram::angle(Index view) const {
    return pi * static_cast<double>(view) / static_cast<double>(n_views());
}

Index min_detectors(Index image_size) {
    return static_cast<Index>(std::ceil(static_cast<double>(image_size) * std::numbers::sqrt2));
}

Sinogram radon(const Image& img, Index n_views, Index n_det, double pixel_size) {
    if (img.rows() != img.cols() || img.rows() < 1) throw InvalidArgument("radon: image must be square and non-empty");
    if (n_views < 1) throw InvalidArgument("radon: n_views must be >= 1");
    if (!(pixel_size > 0)) throw InvalidArgument("radon: pixel_size must be positive");
    const Index n = img.rows();
    if (n_det == 0) n_det = min_detectors(n);
    if (n_det < min_detectors(n)) {
        throw InvalidArgument("radon: n_det " + std::to_string(n_det) + " below ceil(N*sqrt2) = " +
                              std::to_string(min_detectors(n)));
    }
    Sinogram sino;
    sino.spacing = pixel_size;
    sino.values = Image::Zero(n_views, n_det);

    // Work in pixel units; scale by pixel_size at the end.
    const double center = (static_cast<double>(n) - 1.0) / 2.0;
    const double det_center = (static_cast<double>(n_det) - 1.0) / 2.0;
    const double half_len = static_cast<double>(n) * std::numbers::sqrt2 / 2.0 + 1.0;
    const double dt = 0.5;
    const auto steps = static_cast<Index>(std::ceil(2.0 * half_len / dt));
    for (Index v = 0; v < n_views; ++v) {
        const double theta = sino.angle(v);
        const double c = std::cos(theta), s = std::sin(theta);
        for (Index j = 0; j < n_det; ++j) {
            const double sd = static_cast<double>(j) - det_center;
            // point(t) = sd (c, s) + t (-s, c); row grows downward.
            const double t0 = -half_len;
            double col = sd * c - t0 * s + center;
            double row = center - (sd * s + t0 * c);
            const double dcol = -dt * s, drow = -dt * c;
            double acc = 0.0;
            for (Index k = 0; k <= steps; ++k) {
                acc += bilinear(img, row, col);
                col += dcol;
                row += drow;
            }
            sino.values(v, j) = acc * dt * pixel_size;
        }
    }
    return sino;
}

Image fbp(const Sinogram& sino, Index size) {
    require_line_integrals(sino, "fbp");
    if (size < 1 || sino.n_views() < 1 || sino.n_det() < 1) throw InvalidArgument("fbp: empty geometry");
    const Index n_det = sino.n_det(), n_views = sino.n_views();
    const double spacing = sino.spacing;
    const Index len = next_pow2(2 * n_det);

    // Ram-Lak kernel in the spatial domain, wrapped for circular convolution.
    std::vector<double> kernel(static_cast<std::size_t>(len), 0.0);
    kernel[0] = 1.0 / (4.0 * spacing * spacing);
    for (Index k = 1; k < len / 2; k += 2) {
        const double h = -1.0 / (pi * pi * static_cast<double>(k * k) * spacing * spacing);
        kernel[static_cast<std::size_t>(k)] = h;
        kernel[static_cast<std::size_t>(len - k)] = h;
    }
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> kernel_hat;
    fft.fwd(kernel_hat, kernel);

    Image filtered(n_views, n_det);
    std::vector<double> row(static_cast<std::size_t>(len));
    std::vector<std::complex<double>> row_hat;
    std::vector<double> back;
    for (Index v = 0; v < n_views; ++v) {
        std::fill(row.begin(), row.end(), 0.0);
        for (Index j = 0; j < n_det; ++j) row[static_cast<std::size_t>(j)] = sino.values(v, j);
        fft.fwd(row_hat, row);
        for (std::size_t k = 0; k < row_hat.size(); ++k) row_hat[k] *= kernel_hat[k];
        fft.inv(back, row_hat);
        for (Index j = 0; j < n_det; ++j) filtered(v, j) = back[static_cast<std::size_t>(j)] * spacing;
    }

    Image out = Image::Zero(size, size);
    const double center = (static_cast<double>(size) - 1.0) / 2.0;
    const double det_center = (static_cast<double>(n_det) - 1.0) / 2.0;
    for (Index v = 0; v < n_views; ++v) {
        const double theta = sino.angle(v);
        const double c = std::cos(theta), s = std::sin(theta);
        for (Index r = 0; r < size; ++r) {
            const double y = center - static_cast<double>(r);
            // Detector position in bins: x c + y s (pixel units == bin units).
            double pos = (-center) * c + y * s + det_center;
            for (Index col = 0; col < size; ++col, pos += c) {
                const double fl = std::floor(pos);
                const auto j = static_cast<Index>(fl);
                if (j < -1 || j >= n_det) continue;
                const double w = pos - fl;
                double val = 0.0;
                if (j >= 0) val += (1.0 - w) * filtered(v, j);
                if (j + 1 < n_det) val += w * filtered(v, j + 1);
                out(r, col) += val;
            }
        }
    }
    return out * (pi / static_cast<double>(n_views));
}

NoisySinogram simulate_counts(const Sinogram& sino, const DoseParams& dose, std::uint64_t seed) {
    require_line_integrals(sino, "simulate_counts");
    if (!(dose.I0 > 0)) throw InvalidArgument("insert_poisson_noise: I0 must be positive");
    if (!(dose.dose_factor > 0) || dose.dose_factor > 1) {
        throw InvalidArgument("insert_poisson_noise: dose_factor must lie in (0, 1]");
    }
    const double incident = dose.I0 * dose.dose_factor;
    if (incident < 1) throw InvalidArgument("insert_poisson_noise: I0 * dose_factor must be >= 1");

    NoisySinogram out;
    out.sino.mode = SinogramMode::counts;
    out.sino.spacing = sino.spacing;
    out.sino.values.resize(sino.n_views(), sino.n_det());
    for (Index v = 0; v < sino.n_views(); ++v) {
        auto rng = derive_rng(seed, {static_cast<std::uint64_t>(v)});
        for (Index j = 0; j < sino.n_det(); ++j) {
            const double mean = incident * std::exp(-sino.values(v, j));
            auto c = std::poisson_distribution<std::int64_t>(mean)(rng);
            if (c < 1) {
                c = 1;
                ++out.clamped;
            }
            out.sino.values(v, j) = static_cast<double>(c);
        }
    }
    return out;
}

Sinogram log_convert(const Sinogram& counts, const DoseParams& dose) {
    if (counts.mode != SinogramMode::counts) throw InvalidArgument("log_convert: sinogram is not in count mode");
    Sinogram out;
    out.spacing = counts.spacing;
    out.values = (dose.I0 * dose.dose_factor / counts.values).log();
    return out;
}

NoisySinogram insert_poisson_noise(const Sinogram& sino, const DoseParams& dose, std::uint64_t seed) {
    auto noisy = simulate_counts(sino, dose, seed);
    noisy.sino = log_convert(noisy.sino, dose);
    return noisy;
}

HuRange window_range(Window w) {
    return w == Window::abdomen ? HuRange{-160.0, 240.0} : HuRange{-1350.0, 150.0};
}

Window parse_window(const std::string& name) {
    if (name == "abdomen") return Window::abdomen;
    if (name == "chest") return Window::chest;
    throw InvalidArgument("unknown window '" + name + "' (expected abdomen or chest)");
}

std::string window_name(Window w) { return w == Window::abdomen ? "abdomen" : "chest"; }

Window window_for(Region r) { return r == Region::abdomen ? Window::abdomen : Window::chest; }

Image hu_window(const Image& hu, Window w) {
    const auto [lo, hi] = window_range(w);
    return ((hu - lo) / (hi - lo)).max(0.0).min(1.0);
}

SlicePair simulate_pair(const Image& phantom, const Geometry& geometry, const DoseParams& dose, std::uint64_t seed) {
    const Index n = phantom.rows();
    const Sinogram clean = radon(phantom * kMuWater, geometry.n_views, geometry.n_det, geometry.pixel_size);
    const auto to_hu = [](const Image& mu) -> Image { return 1000.0 * (mu / kMuWater - 1.0); };

    SlicePair pair;
    DoseParams full = dose;
    full.dose_factor = 1.0;
    auto nd = insert_poisson_noise(clean, full, derive_seed(seed, {0}));
    auto ld = insert_poisson_noise(clean, dose, derive_seed(seed, {1}));
    pair.ndct_hu = to_hu(fbp(nd.sino, n));
    pair.ldct_hu = to_hu(fbp(ld.sino, n));
    pair.ndct_clamped = nd.clamped;
    pair.ldct_clamped = ld.clamped;
    return pair;
}

}  // namespace mapnn::ct
