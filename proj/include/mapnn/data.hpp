#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mapnn/ct_sim.hpp"
#include "mapnn/tensor.hpp"

namespace mapnn::data {

inline constexpr int kManifestVersion = 1;

/// One registered LDCT/NDCT slice. Paths are relative to the manifest's
/// directory unless absolute. `group` names the source (patient or
/// phantom); splits never separate slices of one group.
struct SliceRecord {
    std::string ldct_path;
    std::string ndct_path;
    std::string region = "abdomen";
    std::string group;
    std::uint64_t seed = 0;
    double dose_factor = 0.25;
    double I0 = 1e5;
};

struct DatasetManifest {
    int version = kManifestVersion;
    std::vector<SliceRecord> slices;
    std::filesystem::path root;  // directory relative paths resolve against; not serialized

    std::vector<std::string> groups() const;  // sorted, unique
};

void to_json(nlohmann::json& j, const SliceRecord& r);
void from_json(const nlohmann::json& j, SliceRecord& r);

nlohmann::json manifest_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j, std::filesystem::path root = {});
void save_manifest(const std::filesystem::path& path, const DatasetManifest& m);
/// Sets root to the file's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);

struct SlicePair {
    ct::Image ldct_hu;
    ct::Image ndct_hu;
};

/// Throws FileNotFound, FormatError (not a 16-bit grayscale PNG) or
/// DimensionMismatch.
SlicePair load_slice_pair(const SliceRecord& record, const std::filesystem::path& root = {});
std::vector<SlicePair> load_slices(const DatasetManifest& m);

struct PatchOrigin {
    std::size_t slice;
    Index row;
    Index col;
};

/// Paired windowed patches [N,1,size,size] in [0,1], cut at identical
/// coordinates.
struct PatchSet {
    Tensor<float> ldct;
    Tensor<float> ndct;
    std::vector<PatchOrigin> origins;

    Index size() const noexcept { return static_cast<Index>(origins.size()); }
    Index patch_size() const { return ldct.dim(2); }
    /// Rows `indices` of both tensors as a new set.
    PatchSet gather(const std::vector<Index>& indices) const;
};

/// `count` patches; each draws a slice uniformly, then a top-left offset
/// uniformly in [0, dim - size]. Deterministic in seed.
PatchSet extract_patches(const std::vector<SlicePair>& pairs, ct::Window window, Index count, Index size,
                         std::uint64_t seed);

/// Group-level partition: round(train_fraction * groups) groups (at least one
/// on each side) go to training. Deterministic in seed.
std::pair<DatasetManifest, DatasetManifest> split(const DatasetManifest& m, double train_fraction, std::uint64_t seed);

struct SimulateConfig {
    ct::Region region = ct::Region::abdomen;
    int groups = 10;
    int slices_per_group = 4;
    Index size = 256;
    double fov_cm = 38.4;  // sets geometry.pixel_size = fov_cm / size
    ct::Geometry geometry;
    ct::DoseParams dose;
    std::uint64_t seed = 0;
};

/// Keys: region, groups, slices_per_group, size, fov_cm, n_views, n_det,
/// I0, dose_factor, seed. Missing keys keep defaults; unknown keys throw
/// InvalidArgument.
void to_json(nlohmann::json& j, const SimulateConfig& c);
void from_json(const nlohmann::json& j, SimulateConfig& c);

/// Writes ldct/ and ndct/ 16-bit PNG slices plus manifest.json into
/// `out_dir`. Each group is one perturbed body phantom; its slices are
/// smaller perturbations of it.
DatasetManifest simulate_dataset(const SimulateConfig& cfg, const std::filesystem::path& out_dir);

/// Same phantoms and noise as simulate_dataset, kept in memory.
std::vector<std::pair<SliceRecord, SlicePair>> simulate_slices(const SimulateConfig& cfg);

}  // namespace mapnn::data
