#include "mapnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "mapnn/json_util.hpp"
#include "mapnn/png_io.hpp"
#include "mapnn/seeding.hpp"

namespace mapnn::data {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& root, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || root.empty() ? path : root / path;
}

ct::Image load_hu(const fs::path& path) { return io::png16_to_hu(io::read_png(path)); }

}  // namespace

std::vector<std::string> DatasetManifest::groups() const {
    std::set<std::string> g;
    for (const auto& s : slices) g.insert(s.group);
    return {g.begin(), g.end()};
}

void to_json(nlohmann::json& j, const SliceRecord& r) {
    j = {{"ldct_path", r.ldct_path}, {"ndct_path", r.ndct_path}, {"region", r.region}, {"group", r.group},
         {"seed", r.seed},           {"dose_factor", r.dose_factor}, {"I0", r.I0}};
}

void from_json(const nlohmann::json& j, SliceRecord& r) {
    j.at("ldct_path").get_to(r.ldct_path);
    j.at("ndct_path").get_to(r.ndct_path);
    r.region = j.value("region", std::string("abdomen"));
    r.group = j.value("group", r.ndct_path);
    r.seed = j.value("seed", std::uint64_t{0});
    r.dose_factor = j.value("dose_factor", 0.25);
    r.I0 = j.value("I0", 1e5);
}

nlohmann::json manifest_json(const DatasetManifest& m) {
    return {{"version", m.version}, {"slices", m.slices}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j, fs::path root) {
    DatasetManifest m;
    try {
        m.version = j.at("version").get<int>();
        if (m.version != kManifestVersion) throw FormatError("manifest: unsupported version " + std::to_string(m.version));
        m.slices = j.at("slices").get<std::vector<SliceRecord>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
    m.root = std::move(root);
    return m;
}

void save_manifest(const fs::path& path, const DatasetManifest& m) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << manifest_json(m).dump(2) << '\n';
    if (!out) throw IoError("write failed for manifest " + path.string());
}

DatasetManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound("no manifest at " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest " + path.string() + ": " + e.what());
    }
    return manifest_from_json(j, path.parent_path());
}

SlicePair load_slice_pair(const SliceRecord& record, const fs::path& root) {
    SlicePair pair{load_hu(resolve(root, record.ldct_path)), load_hu(resolve(root, record.ndct_path))};
    if (pair.ldct_hu.rows() != pair.ndct_hu.rows() || pair.ldct_hu.cols() != pair.ndct_hu.cols()) {
        throw DimensionMismatch("slice pair " + record.ldct_path + " is " + std::to_string(pair.ldct_hu.rows()) + "x" +
                                std::to_string(pair.ldct_hu.cols()) + " but " + record.ndct_path + " is " +
                                std::to_string(pair.ndct_hu.rows()) + "x" + std::to_string(pair.ndct_hu.cols()));
    }
    return pair;
}

std::vector<SlicePair> load_slices(const DatasetManifest& m) {
    std::vector<SlicePair> out;
    out.reserve(m.slices.size());
    for (const auto& r : m.slices) out.push_back(load_slice_pair(r, m.root));
    return out;
}

PatchSet PatchSet::gather(const std::vector<Index>& indices) const {
    const Index s = patch_size(), plane = s * s;
    PatchSet out;
    const Shape shape{static_cast<Index>(indices.size()), 1, s, s};
    out.ldct = Tensor<float>(shape);
    out.ndct = Tensor<float>(shape);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const Index i = indices[k];
        out.ldct.array().segment(static_cast<Index>(k) * plane, plane) = ldct.array().segment(i * plane, plane);
        out.ndct.array().segment(static_cast<Index>(k) * plane, plane) = ndct.array().segment(i * plane, plane);
        out.origins.push_back(origins.at(static_cast<std::size_t>(i)));
    }
    return out;
}

PatchSet extract_patches(const std::vector<SlicePair>& pairs, ct::Window window, Index count, Index size,
                         std::uint64_t seed) {
    if (pairs.empty()) throw InvalidArgument("extract_patches: no slices");
    if (count < 1 || size < 1) throw InvalidArgument("extract_patches: count and size must be positive");
    std::vector<std::pair<ct::Image, ct::Image>> windowed;
    for (const auto& p : pairs) {
        if (p.ldct_hu.rows() < size || p.ldct_hu.cols() < size) {
            throw InvalidArgument("extract_patches: slice " + std::to_string(p.ldct_hu.rows()) + "x" +
                                  std::to_string(p.ldct_hu.cols()) + " is smaller than patch size " + std::to_string(size));
        }
        if (p.ndct_hu.rows() != p.ldct_hu.rows() || p.ndct_hu.cols() != p.ldct_hu.cols()) {
            throw DimensionMismatch("extract_patches: unregistered slice pair");
        }
        windowed.emplace_back(ct::hu_window(p.ldct_hu, window), ct::hu_window(p.ndct_hu, window));
    }

    PatchSet out;
    const Shape shape{count, 1, size, size};
    out.ldct = Tensor<float>(shape);
    out.ndct = Tensor<float>(shape);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_slice(0, pairs.size() - 1);
    const Index plane = size * size;
    for (Index k = 0; k < count; ++k) {
        const std::size_t s = pick_slice(rng);
        const auto& [ld, nd] = windowed[s];
        const Index row = std::uniform_int_distribution<Index>(0, ld.rows() - size)(rng);
        const Index col = std::uniform_int_distribution<Index>(0, ld.cols() - size)(rng);
        Eigen::Map<Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> dl(out.ldct.data() + k * plane, size,
                                                                                         size);
        Eigen::Map<Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> dn(out.ndct.data() + k * plane, size,
                                                                                         size);
        dl = ld.block(row, col, size, size).cast<float>();
        dn = nd.block(row, col, size, size).cast<float>();
        out.origins.push_back({s, row, col});
    }
    return out;
}

std::pair<DatasetManifest, DatasetManifest> split(const DatasetManifest& m, double train_fraction, std::uint64_t seed) {
    auto groups = m.groups();
    if (groups.size() < 2) {
        throw InvalidArgument("split: need at least 2 source groups, found " + std::to_string(groups.size()));
    }
    if (!(train_fraction > 0 && train_fraction < 1)) throw InvalidArgument("split: train_fraction must lie in (0, 1)");
    std::mt19937_64 rng(seed);
    std::shuffle(groups.begin(), groups.end(), rng);
    const auto n = static_cast<long>(groups.size());
    const long n_train = std::clamp(std::lround(train_fraction * static_cast<double>(n)), 1L, n - 1);
    const std::set<std::string> train_groups(groups.begin(), groups.begin() + n_train);

    DatasetManifest train, val;
    train.version = val.version = m.version;
    train.root = val.root = m.root;
    for (const auto& s : m.slices) (train_groups.count(s.group) ? train : val).slices.push_back(s);
    return {std::move(train), std::move(val)};
}

std::vector<std::pair<SliceRecord, SlicePair>> simulate_slices(const SimulateConfig& cfg) {
    if (cfg.groups < 1 || cfg.slices_per_group < 1) throw InvalidArgument("simulate: groups and slices must be positive");
    ct::Geometry geometry = cfg.geometry;
    geometry.pixel_size = cfg.fov_cm / static_cast<double>(cfg.size);
    const auto base = ct::body_phantom(cfg.region, cfg.size, 0.0);
    const std::string region = ct::region_name(cfg.region);

    std::vector<std::pair<SliceRecord, SlicePair>> out;
    for (int g = 0; g < cfg.groups; ++g) {
        auto group_spec = ct::perturbed(base, 0.12, derive_seed(cfg.seed, {0, static_cast<std::uint64_t>(g)}));
        group_spec.jitter = 0.04;
        for (int s = 0; s < cfg.slices_per_group; ++s) {
            const std::uint64_t slice_seed = derive_seed(cfg.seed, {1, static_cast<std::uint64_t>(g), static_cast<std::uint64_t>(s)});
            const auto phantom = ct::make_phantom(group_spec, slice_seed);
            const auto sim = ct::simulate_pair(phantom, geometry, cfg.dose, slice_seed);
            SliceRecord rec;
            char name[64];
            std::snprintf(name, sizeof(name), "g%03d_s%03d.png", g, s);
            rec.ldct_path = std::string("ldct/") + name;
            rec.ndct_path = std::string("ndct/") + name;
            rec.region = region;
            rec.group = "phantom-" + std::to_string(g);
            rec.seed = slice_seed;
            rec.dose_factor = cfg.dose.dose_factor;
            rec.I0 = cfg.dose.I0;
            // Quantize exactly as the 16-bit files do, so memory and disk agree.
            SlicePair pair{io::png16_to_hu(io::hu_to_png16(sim.ldct_hu)), io::png16_to_hu(io::hu_to_png16(sim.ndct_hu))};
            out.emplace_back(std::move(rec), std::move(pair));
        }
    }
    return out;
}

void to_json(nlohmann::json& j, const SimulateConfig& c) {
    j = {{"region", ct::region_name(c.region)},
         {"groups", c.groups},
         {"slices_per_group", c.slices_per_group},
         {"size", c.size},
         {"fov_cm", c.fov_cm},
         {"n_views", c.geometry.n_views},
         {"n_det", c.geometry.n_det},
         {"I0", c.dose.I0},
         {"dose_factor", c.dose.dose_factor},
         {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SimulateConfig& c) {
    const std::string where = "simulate config";
    check_keys(j, {"region", "groups", "slices_per_group", "size", "fov_cm", "n_views", "n_det", "I0", "dose_factor", "seed"},
               where);
    std::string region = ct::region_name(c.region);
    read_optional(j, "region", region, where);
    c.region = ct::parse_region(region);
    read_optional(j, "groups", c.groups, where);
    read_optional(j, "slices_per_group", c.slices_per_group, where);
    read_optional(j, "size", c.size, where);
    read_optional(j, "fov_cm", c.fov_cm, where);
    read_optional(j, "n_views", c.geometry.n_views, where);
    read_optional(j, "n_det", c.geometry.n_det, where);
    read_optional(j, "I0", c.dose.I0, where);
    read_optional(j, "dose_factor", c.dose.dose_factor, where);
    read_optional(j, "seed", c.seed, where);
}

DatasetManifest simulate_dataset(const SimulateConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir / "ldct");
    fs::create_directories(out_dir / "ndct");
    DatasetManifest m;
    m.root = out_dir;
    for (auto& [rec, pair] : simulate_slices(cfg)) {
        io::write_png(out_dir / rec.ldct_path, io::hu_to_png16(pair.ldct_hu));
        io::write_png(out_dir / rec.ndct_path, io::hu_to_png16(pair.ndct_hu));
        m.slices.push_back(std::move(rec));
    }
    save_manifest(out_dir / "manifest.json", m);
    return m;
}

}  // namespace mapnn::data
