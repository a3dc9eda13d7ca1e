#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mapnn/model.hpp"
#include "mapnn/optim.hpp"

namespace mapnn {

/// On-disk layout:
///   8 bytes  "MAPNNCKP"
///   u32      format version
///   u64      header length n
///   n bytes  JSON header {training_depth, seed, patch_size, metadata,
///            tensors: [{name, shape}]}
///   payload  every tensor in header order as little-endian float32
/// Integers are little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    int training_depth = 5;
    std::uint64_t seed = 0;
    Index patch_size = 64;
    nlohmann::json metadata = nlohmann::json::object();
    std::vector<std::pair<std::string, Tensor<float>>> tensors;

    const Tensor<float>& tensor(const std::string& name) const;
    bool has(const std::string& name) const;
    void put(std::string name, Tensor<float> value);
};

/// Writes atomically (temp file then rename). Throws IoError when the file
/// cannot be fully written, e.g. on a full disk.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
std::string encode_checkpoint(const Checkpoint& ckpt);

/// Throws IoError for unreadable, truncated or malformed files.
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint decode_checkpoint(const std::string& bytes);

/// Stores every parameter as "<prefix><name>".
void put_store(Checkpoint& ckpt, const std::string& prefix, const ParamStore<float>& store);
/// Overwrites every parameter of `store` from "<prefix><name>", checking shapes.
void take_store(const Checkpoint& ckpt, const std::string& prefix, ParamStore<float>& store);

/// Moments go under "<prefix>m/<name>" and "<prefix>v/<name>"; the step
/// counter and hyperparameters go into metadata[<prefix>].
void put_adam(Checkpoint& ckpt, const std::string& prefix, const AdamState<float>& state);
AdamState<float> take_adam(const Checkpoint& ckpt, const std::string& prefix);

/// Generator weights under "gen/".
CpceParams<float> generator_from(const Checkpoint& ckpt);

}  // namespace mapnn
