#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mapnn/checkpoint.hpp"
#include "mapnn/data.hpp"
#include "mapnn/losses.hpp"
#include "mapnn/optim.hpp"

namespace mapnn::train {

/// A loss or gradient went non-finite. what() names the iteration and the
/// snapshot written for diagnosis, if any.
class TrainingDiverged : public Error {
public:
    using Error::Error;
};

/// Weight of the generator layer that emits the residual.
inline constexpr const char* kResidualLayerWeight = "cpce.deconv4.weight";

struct TrainConfig {
    int training_depth = 5;
    Index batch_size = 128;
    int epochs = 80;
    int critic_steps = 4;  // critic updates per generator update
    /// Stops after this many generator updates even if epochs remain.
    std::optional<std::int64_t> max_iterations;
    /// The as-written adversarial sign has the generator chase the critic's
    /// low scores, away from the real patches; training uses the mirrored one.
    LossWeights weights{10.0, 50.0, 50.0, -1.0};
    double lr0 = 1e-4;
    /// Multiplies the initial weights of the generator's last layer. At 1
    /// the residual starts large enough to push a third of the pixels out
    /// of [0, 1], where the clip passes no gradient.
    double residual_init_scale = 0.1;
    std::uint64_t init_seed = 0;    // parameter initialisation
    std::uint64_t sample_seed = 1;  // batches and gradient-penalty epsilon
    /// Save a checkpoint every this many generator updates; 0 saves only
    /// the final state.
    std::int64_t checkpoint_interval = 0;
    /// Validation patches used per record; 0 uses the whole set.
    Index validation_count = 0;
    Index validation_batch = 64;

    void validate() const;
    /// Generator updates per epoch for a training set of n patches.
    std::int64_t iterations_per_epoch(Index n) const;
    std::int64_t total_iterations(Index n) const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, TrainConfig& c);

struct IterationRecord {
    std::int64_t iteration = 0;  // 1-based generator update index
    int epoch = 1;
    double lr = 0;
    double critic_loss = 0;  // mean over this cycle's critic updates
    double wasserstein = 0;
    double penalty = 0;
    double generator_loss = 0;
    double adversarial = 0;
    double mse = 0;
    double edge = 0;
    double seconds = 0;
};

struct ValidationRecord {
    int epoch = 1;
    std::int64_t iteration = 0;
    double identity_mse = 0;
    std::vector<double> depth_mse;  // g^1 ... g^T
};

struct TrainReport {
    std::vector<IterationRecord> iterations;
    std::vector<ValidationRecord> validation;
    std::vector<std::string> checkpoints;
    double seconds = 0;

    nlohmann::json to_json() const;
    static TrainReport from_json(const nlohmann::json& j);
    std::string iterations_csv() const;
    std::string validation_csv() const;
};

/// Everything needed to continue training bit for bit.
struct TrainState {
    ModelParams<float> params;
    AdamState<float> generator_adam;
    AdamState<float> critic_adam;
    std::int64_t iteration = 0;  // generator updates done
    std::int64_t critic_updates = 0;
    TrainReport report;
};

TrainState init_state(const TrainConfig& cfg, Index patch_size);

Checkpoint to_checkpoint(const TrainState& state, const TrainConfig& cfg);
/// Throws IoError when the checkpoint lacks training state.
TrainState state_from(const Checkpoint& ckpt);

enum class StepKind { critic, generator };

struct TrainHooks {
    std::function<void(StepKind, std::int64_t iteration)> on_step;
};

struct RunOptions {
    std::optional<std::filesystem::path> out_dir;  // checkpoints and NaN snapshots
    /// Pause once `state.iteration` reaches this value (resume testing).
    std::optional<std::int64_t> stop_at;
    TrainHooks hooks;
    bool verbose = false;
};

/// Continues `state` until the configured number of generator updates.
/// Each cycle: critic_steps critic updates, each on a fresh batch with the
/// generator's depth-T output held constant and fresh penalty epsilon, then
/// one generator update on the composite loss of g^T for a fresh batch.
/// Both optimisers use lr_schedule(lr0, epoch). Validation runs at every
/// epoch end and after the last update.
void run(TrainState& state, const TrainConfig& cfg, const data::PatchSet& train_set,
         const data::PatchSet& val_set, const RunOptions& opts = {});

TrainReport train(const TrainConfig& cfg, const data::PatchSet& train_set, const data::PatchSet& val_set,
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Mean squared error between g^d(ldct) and ndct for each d in `depths`,
/// accumulated in double precision. Evaluation chunking does not matter.
std::vector<double> validate(const CpceParams<float>& params, const data::PatchSet& val,
                             const std::vector<int>& depths, Index chunk = 64);

double identity_mse(const data::PatchSet& val);

/// Where patches come from for `train --config`.
struct DataConfig {
    std::optional<std::filesystem::path> manifest;
    data::SimulateConfig simulate;  // used when no manifest is given
    ct::Window window = ct::Window::abdomen;
    double train_fraction = 0.5;
    Index patch_size = 64;
    Index train_patches = 128000;
    Index val_patches = 64000;
    std::uint64_t seed = 0;  // split and patch sampling
};

void from_json(const nlohmann::json& j, DataConfig& c);
void to_json(nlohmann::json& j, const DataConfig& c);

struct PreparedData {
    data::PatchSet train;
    data::PatchSet val;
    std::vector<std::string> train_groups;
    std::vector<std::string> val_groups;
};

PreparedData prepare_data(const DataConfig& cfg);

}  // namespace mapnn::train
