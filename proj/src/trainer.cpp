#include "mapnn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <numeric>
#include <sstream>

#include "mapnn/json_util.hpp"
#include "mapnn/seeding.hpp"

namespace mapnn::train {

namespace fs = std::filesystem;

namespace {

// Stream identifiers under sample_seed.
constexpr std::uint64_t kCriticBatch = 1;
constexpr std::uint64_t kCriticEpsilon = 2;
constexpr std::uint64_t kGeneratorBatch = 3;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// `count` distinct indices (with replacement only when count > n).
std::vector<Index> sample_indices(Index n, Index count, std::mt19937_64 rng) {
    std::vector<Index> out(static_cast<std::size_t>(count));
    if (count > n) {
        std::uniform_int_distribution<Index> u(0, n - 1);
        for (auto& i : out) i = u(rng);
        return out;
    }
    std::vector<Index> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), Index{0});
    for (Index k = 0; k < count; ++k) {
        std::uniform_int_distribution<Index> u(k, n - 1);
        std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(u(rng))]);
        out[static_cast<std::size_t>(k)] = pool[static_cast<std::size_t>(k)];
    }
    return out;
}

bool all_finite(const GradientMap<float>& g) {
    return std::all_of(g.begin(), g.end(), [](const auto& kv) { return kv.second.all_finite(); });
}

template <typename To, typename From>
CpceParams<To> cast_generator(const CpceParams<From>& src) {
    auto out = CpceParams<To>::zeros();
    for (const auto& name : src.store().names()) {
        out.store().at(name).mutable_value() = src.store().at(name).value().template cast<To>();
    }
    return out;
}

data::PatchSet head(const data::PatchSet& set, Index count) {
    if (count <= 0 || count >= set.size()) return set;
    std::vector<Index> idx(static_cast<std::size_t>(count));
    std::iota(idx.begin(), idx.end(), Index{0});
    return set.gather(idx);
}

nlohmann::json iteration_json(const IterationRecord& r) {
    return {{"iteration", r.iteration},     {"epoch", r.epoch},
            {"lr", r.lr},                   {"critic_loss", r.critic_loss},
            {"wasserstein", r.wasserstein}, {"penalty", r.penalty},
            {"generator_loss", r.generator_loss}, {"adversarial", r.adversarial},
            {"mse", r.mse},                 {"edge", r.edge},
            {"seconds", r.seconds}};
}

IterationRecord iteration_from(const nlohmann::json& j) {
    IterationRecord r;
    j.at("iteration").get_to(r.iteration);
    j.at("epoch").get_to(r.epoch);
    j.at("lr").get_to(r.lr);
    j.at("critic_loss").get_to(r.critic_loss);
    j.at("wasserstein").get_to(r.wasserstein);
    j.at("penalty").get_to(r.penalty);
    j.at("generator_loss").get_to(r.generator_loss);
    j.at("adversarial").get_to(r.adversarial);
    j.at("mse").get_to(r.mse);
    j.at("edge").get_to(r.edge);
    j.at("seconds").get_to(r.seconds);
    return r;
}

[[noreturn]] void diverged(const TrainState& state, const TrainConfig& cfg, const RunOptions& opts,
                           const std::string& what) {
    std::string msg = "training diverged at iteration " + std::to_string(state.iteration + 1) + ": " + what;
    if (opts.out_dir) {
        auto ckpt = to_checkpoint(state, cfg);
        ckpt.metadata["diverged"] = what;
        const auto path = *opts.out_dir / "diverged.ckpt";
        try {
            fs::create_directories(*opts.out_dir);
            save_checkpoint(path, ckpt);
            msg += "; snapshot of the pre-update state in " + path.string();
        } catch (const std::exception& e) {
            msg += "; snapshot failed: " + std::string(e.what());
        }
    }
    throw TrainingDiverged(msg);
}

}  // namespace

void TrainConfig::validate() const {
    if (training_depth < 1 || training_depth > kMaxInferenceDepth) {
        throw InvalidArgument("train config: training_depth must lie in [1, " + std::to_string(kMaxInferenceDepth) + "]");
    }
    if (batch_size < 1) throw InvalidArgument("train config: batch_size must be >= 1");
    if (epochs < 1) throw InvalidArgument("train config: epochs must be >= 1");
    if (critic_steps < 1) throw InvalidArgument("train config: critic_steps must be >= 1");
    if (max_iterations && *max_iterations < 1) throw InvalidArgument("train config: max_iterations must be >= 1");
    if (!(lr0 > 0)) throw InvalidArgument("train config: lr0 must be positive");
    if (!(residual_init_scale >= 0) || !std::isfinite(residual_init_scale)) {
        throw InvalidArgument("train config: residual_init_scale must be finite and >= 0");
    }
    if (checkpoint_interval < 0) throw InvalidArgument("train config: checkpoint_interval must be >= 0");
    if (validation_count < 0 || validation_batch < 1) throw InvalidArgument("train config: bad validation sizes");
    weights.validate();
}

std::int64_t TrainConfig::iterations_per_epoch(Index n) const { return std::max<std::int64_t>(1, n / batch_size); }

std::int64_t TrainConfig::total_iterations(Index n) const {
    const std::int64_t full = iterations_per_epoch(n) * epochs;
    return max_iterations ? std::min(full, *max_iterations) : full;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"training_depth", c.training_depth},
         {"batch_size", c.batch_size},
         {"epochs", c.epochs},
         {"critic_steps", c.critic_steps},
         {"max_iterations", c.max_iterations ? nlohmann::json(*c.max_iterations) : nlohmann::json(nullptr)},
         {"lambda_g", c.weights.lambda_g},
         {"lambda_m", c.weights.lambda_m},
         {"lambda_e", c.weights.lambda_e},
         {"adversarial_sign", c.weights.adversarial_sign},
         {"lr0", c.lr0},
         {"residual_init_scale", c.residual_init_scale},
         {"init_seed", c.init_seed},
         {"sample_seed", c.sample_seed},
         {"checkpoint_interval", c.checkpoint_interval},
         {"validation_count", c.validation_count},
         {"validation_batch", c.validation_batch}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    const std::string where = "train config";
    check_keys(j,
               {"training_depth", "batch_size", "epochs", "critic_steps", "max_iterations", "lambda_g", "lambda_m",
                "lambda_e", "adversarial_sign", "lr0", "residual_init_scale", "init_seed", "sample_seed", "checkpoint_interval",
                "validation_count", "validation_batch"},
               where);
    read_optional(j, "training_depth", c.training_depth, where);
    read_optional(j, "batch_size", c.batch_size, where);
    read_optional(j, "epochs", c.epochs, where);
    read_optional(j, "critic_steps", c.critic_steps, where);
    if (j.contains("max_iterations")) {
        if (j.at("max_iterations").is_null()) {
            c.max_iterations.reset();
        } else {
            std::int64_t m = 0;
            read_optional(j, "max_iterations", m, where);
            c.max_iterations = m;
        }
    }
    read_optional(j, "lambda_g", c.weights.lambda_g, where);
    read_optional(j, "lambda_m", c.weights.lambda_m, where);
    read_optional(j, "lambda_e", c.weights.lambda_e, where);
    read_optional(j, "adversarial_sign", c.weights.adversarial_sign, where);
    read_optional(j, "lr0", c.lr0, where);
    read_optional(j, "residual_init_scale", c.residual_init_scale, where);
    read_optional(j, "init_seed", c.init_seed, where);
    read_optional(j, "sample_seed", c.sample_seed, where);
    read_optional(j, "checkpoint_interval", c.checkpoint_interval, where);
    read_optional(j, "validation_count", c.validation_count, where);
    read_optional(j, "validation_batch", c.validation_batch, where);
    c.validate();
}

nlohmann::json TrainReport::to_json() const {
    nlohmann::json its = nlohmann::json::array(), vals = nlohmann::json::array();
    for (const auto& r : iterations) its.push_back(iteration_json(r));
    for (const auto& v : validation) {
        vals.push_back({{"epoch", v.epoch}, {"iteration", v.iteration}, {"identity_mse", v.identity_mse},
                        {"depth_mse", v.depth_mse}});
    }
    return {{"iterations", its}, {"validation", vals}, {"checkpoints", checkpoints}, {"seconds", seconds}};
}

TrainReport TrainReport::from_json(const nlohmann::json& j) {
    TrainReport r;
    try {
        for (const auto& it : j.at("iterations")) r.iterations.push_back(iteration_from(it));
        for (const auto& v : j.at("validation")) {
            ValidationRecord rec;
            v.at("epoch").get_to(rec.epoch);
            v.at("iteration").get_to(rec.iteration);
            v.at("identity_mse").get_to(rec.identity_mse);
            v.at("depth_mse").get_to(rec.depth_mse);
            r.validation.push_back(std::move(rec));
        }
        j.at("checkpoints").get_to(r.checkpoints);
        j.at("seconds").get_to(r.seconds);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("train report: ") + e.what());
    }
    return r;
}

std::string TrainReport::iterations_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "iteration,epoch,lr,critic_loss,wasserstein,penalty,generator_loss,adversarial,mse,edge,seconds\n";
    for (const auto& r : iterations) {
        out << r.iteration << ',' << r.epoch << ',' << r.lr << ',' << r.critic_loss << ',' << r.wasserstein << ','
            << r.penalty << ',' << r.generator_loss << ',' << r.adversarial << ',' << r.mse << ',' << r.edge << ','
            << r.seconds << '\n';
    }
    return out.str();
}

std::string TrainReport::validation_csv() const {
    std::ostringstream out;
    out.precision(17);
    std::size_t depths = 0;
    for (const auto& v : validation) depths = std::max(depths, v.depth_mse.size());
    out << "epoch,iteration,identity_mse";
    for (std::size_t d = 1; d <= depths; ++d) out << ",mse_depth" << d;
    out << '\n';
    for (const auto& v : validation) {
        out << v.epoch << ',' << v.iteration << ',' << v.identity_mse;
        for (double m : v.depth_mse) out << ',' << m;
        out << '\n';
    }
    return out.str();
}

TrainState init_state(const TrainConfig& cfg, Index patch_size) {
    cfg.validate();
    TrainState s{init_params<float>(cfg.init_seed, patch_size), {}, {}, 0, 0, {}};
    auto& w = s.params.generator.store().at(kResidualLayerWeight).mutable_value();
    for (Index i = 0; i < w.size(); ++i) w[i] *= static_cast<float>(cfg.residual_init_scale);
    s.generator_adam.lr0 = s.critic_adam.lr0 = cfg.lr0;
    return s;
}

Checkpoint to_checkpoint(const TrainState& state, const TrainConfig& cfg) {
    Checkpoint ckpt;
    ckpt.training_depth = cfg.training_depth;
    ckpt.seed = cfg.init_seed;
    ckpt.patch_size = state.params.discriminator.patch_size();
    ckpt.metadata["config"] = cfg;
    ckpt.metadata["iteration"] = state.iteration;
    ckpt.metadata["critic_updates"] = state.critic_updates;
    ckpt.metadata["report"] = state.report.to_json();
    put_store(ckpt, "gen/", state.params.generator.store());
    put_store(ckpt, "disc/", state.params.discriminator.store());
    put_adam(ckpt, "adam_gen/", state.generator_adam);
    put_adam(ckpt, "adam_disc/", state.critic_adam);
    return ckpt;
}

TrainState state_from(const Checkpoint& ckpt) {
    const auto& meta = ckpt.metadata;
    if (!meta.contains("iteration") || !meta.contains("report")) {
        throw IoError("checkpoint holds weights only, no training state to resume");
    }
    TrainState s{{generator_from(ckpt), DiscriminatorParams<float>::zeros(ckpt.patch_size)}, {}, {}, 0, 0, {}};
    take_store(ckpt, "disc/", s.params.discriminator.store());
    s.generator_adam = take_adam(ckpt, "adam_gen/");
    s.critic_adam = take_adam(ckpt, "adam_disc/");
    try {
        meta.at("iteration").get_to(s.iteration);
        meta.at("critic_updates").get_to(s.critic_updates);
        s.report = TrainReport::from_json(meta.at("report"));
    } catch (const std::exception& e) {
        throw IoError(std::string("checkpoint training state: ") + e.what());
    }
    return s;
}

void run(TrainState& state, const TrainConfig& cfg, const data::PatchSet& train_set, const data::PatchSet& val_set,
         const RunOptions& opts) {
    cfg.validate();
    if (train_set.size() == 0) throw InvalidArgument("train: empty training set");
    if (val_set.size() == 0) throw InvalidArgument("train: empty validation set");
    const Index p = state.params.discriminator.patch_size();
    if (train_set.patch_size() != p || val_set.patch_size() != p) {
        throw ShapeError("train", "patch size", p, train_set.patch_size());
    }
    const std::int64_t per_epoch = cfg.iterations_per_epoch(train_set.size());
    const std::int64_t total = cfg.total_iterations(train_set.size());
    const std::int64_t stop = std::min(total, opts.stop_at.value_or(total));
    const data::PatchSet val = head(val_set, cfg.validation_count);
    std::vector<int> all_depths(static_cast<std::size_t>(cfg.training_depth));
    std::iota(all_depths.begin(), all_depths.end(), 1);
    const double identity = identity_mse(val);
    if (opts.out_dir) fs::create_directories(*opts.out_dir);

    auto& gen = state.params.generator;
    auto& disc = state.params.discriminator;
    const Critic<float> critic = as_critic(disc);
    const CloneConfig<float> clone_cfg{std::cref(gen), cfg.training_depth, cfg.training_depth};
    const auto run_start = Clock::now();
    const double prior_seconds = state.report.seconds;

    while (state.iteration < stop) {
        const auto t0 = Clock::now();
        const std::int64_t it = state.iteration;  // 0-based index of this cycle
        const auto uit = static_cast<std::uint64_t>(it);
        IterationRecord rec;
        rec.iteration = it + 1;
        rec.epoch = static_cast<int>(it / per_epoch + 1);
        rec.lr = lr_schedule(cfg.lr0, rec.epoch);

        for (int k = 0; k < cfg.critic_steps; ++k) {
            const auto uk = static_cast<std::uint64_t>(k);
            const auto batch = train_set.gather(
                sample_indices(train_set.size(), cfg.batch_size, derive_rng(cfg.sample_seed, {kCriticBatch, uit, uk})));
            Tensor<float> fake;
            {
                ad::NoGradGuard no_grad;
                fake = mapnn_forward(clone_cfg, ad::Var<float>::leaf(batch.ldct)).outputs.back().value();
            }
            auto eps_rng = derive_rng(cfg.sample_seed, {kCriticEpsilon, uit, uk});
            const auto loss = critic_loss(critic, fake, batch.ndct, cfg.weights, eps_rng);
            const float value = loss.total.value().item();
            if (!std::isfinite(value)) diverged(state, cfg, opts, "critic loss is " + std::to_string(value));
            const auto grads = backward(loss.total, disc.store());
            if (!all_finite(grads)) diverged(state, cfg, opts, "critic gradient is not finite");
            adam_step(state.critic_adam, disc.store(), grads, rec.lr);
            ++state.critic_updates;
            rec.critic_loss += value / cfg.critic_steps;
            rec.wasserstein += static_cast<double>(loss.wasserstein) / cfg.critic_steps;
            rec.penalty += static_cast<double>(loss.penalty) / cfg.critic_steps;
            if (opts.hooks.on_step) opts.hooks.on_step(StepKind::critic, it + 1);
        }

        {
            const auto batch = train_set.gather(
                sample_indices(train_set.size(), cfg.batch_size, derive_rng(cfg.sample_seed, {kGeneratorBatch, uit})));
            const auto seq = mapnn_forward(clone_cfg, ad::Var<float>::leaf(batch.ldct));
            const auto loss = composite_gen_loss(critic, seq.outputs.back(), batch.ndct, cfg.weights);
            const float value = loss.total.value().item();
            if (!std::isfinite(value)) diverged(state, cfg, opts, "generator loss is " + std::to_string(value));
            const auto grads = backward(loss.total, gen.store());
            if (!all_finite(grads)) diverged(state, cfg, opts, "generator gradient is not finite");
            adam_step(state.generator_adam, gen.store(), grads, rec.lr);
            rec.generator_loss = value;
            rec.adversarial = loss.adversarial;
            rec.mse = loss.mse;
            rec.edge = loss.edge;
            if (opts.hooks.on_step) opts.hooks.on_step(StepKind::generator, it + 1);
        }
        ++state.iteration;
        rec.seconds = seconds_since(t0);
        state.report.iterations.push_back(rec);

        if (state.iteration % per_epoch == 0 || state.iteration == total) {
            ValidationRecord v;
            v.epoch = rec.epoch;
            v.iteration = state.iteration;
            v.identity_mse = identity;
            v.depth_mse = validate(gen, val, all_depths, cfg.validation_batch);
            state.report.validation.push_back(std::move(v));
        }
        if (opts.verbose) {
            std::cerr << "iter " << rec.iteration << "/" << total << " epoch " << rec.epoch << " critic "
                      << rec.critic_loss << " gen " << rec.generator_loss << " mse " << rec.mse << " ("
                      << rec.seconds << " s)";
            if (!state.report.validation.empty() && state.report.validation.back().iteration == state.iteration) {
                std::cerr << " val g1 " << state.report.validation.back().depth_mse.front() << " identity "
                          << identity;
            }
            std::cerr << '\n';
        }

        const bool final = state.iteration == total;
        const bool periodic = cfg.checkpoint_interval > 0 && state.iteration % cfg.checkpoint_interval == 0;
        if (opts.out_dir && (final || periodic)) {
            char name[48];
            std::snprintf(name, sizeof(name), "ckpt_%06lld.ckpt", static_cast<long long>(state.iteration));
            const auto path = *opts.out_dir / (final ? std::string("final.ckpt") : std::string(name));
            state.report.checkpoints.push_back(path.string());
            state.report.seconds = prior_seconds + seconds_since(run_start);
            save_checkpoint(path, to_checkpoint(state, cfg));
        }
    }
    state.report.seconds = prior_seconds + seconds_since(run_start);
}

TrainReport train(const TrainConfig& cfg, const data::PatchSet& train_set, const data::PatchSet& val_set,
                  const std::optional<fs::path>& out_dir) {
    if (train_set.size() == 0) throw InvalidArgument("train: empty training set");
    auto state = init_state(cfg, train_set.patch_size());
    RunOptions opts;
    opts.out_dir = out_dir;
    run(state, cfg, train_set, val_set, opts);
    return state.report;
}

std::vector<double> validate(const CpceParams<float>& params, const data::PatchSet& val, const std::vector<int>& depths,
                             Index chunk) {
    if (chunk < 1) throw InvalidArgument("validate: chunk must be >= 1");
    if (depths.empty()) return {};
    for (int d : depths) {
        if (d < 1 || d > kMaxInferenceDepth) {
            throw InvalidArgument("validate: depth " + std::to_string(d) + " outside [1, " +
                                  std::to_string(kMaxInferenceDepth) + "]");
        }
    }
    if (val.size() == 0) throw InvalidArgument("validate: empty validation set");
    const int max_depth = *std::max_element(depths.begin(), depths.end());
    const auto p64 = cast_generator<double>(params);
    const CloneConfig<double> cfg{std::cref(p64), max_depth, max_depth};
    std::vector<double> sse(static_cast<std::size_t>(max_depth), 0.0);
    ad::NoGradGuard no_grad;
    for (Index start = 0; start < val.size(); start += chunk) {
        std::vector<Index> idx(static_cast<std::size_t>(std::min(chunk, val.size() - start)));
        std::iota(idx.begin(), idx.end(), start);
        const auto part = val.gather(idx);
        const auto target = part.ndct.cast<double>();
        const auto seq = mapnn_forward(cfg, ad::Var<double>::leaf(part.ldct.cast<double>()));
        for (int d = 0; d < max_depth; ++d) {
            sse[static_cast<std::size_t>(d)] += (seq.outputs[static_cast<std::size_t>(d)].value().array() - target.array()).square().sum();
        }
    }
    const double n = static_cast<double>(val.ldct.size());
    std::vector<double> out;
    for (int d : depths) out.push_back(sse[static_cast<std::size_t>(d - 1)] / n);
    return out;
}

double identity_mse(const data::PatchSet& val) {
    if (val.size() == 0) throw InvalidArgument("identity_mse: empty set");
    return (val.ldct.array().cast<double>() - val.ndct.array().cast<double>()).square().mean();
}

void from_json(const nlohmann::json& j, DataConfig& c) {
    const std::string where = "data config";
    check_keys(j, {"manifest", "simulate", "window", "train_fraction", "patch_size", "train_patches", "val_patches", "seed"},
               where);
    if (j.contains("manifest")) {
        std::string m;
        read_optional(j, "manifest", m, where);
        c.manifest = m;
    }
    if (j.contains("simulate")) c.simulate = j.at("simulate").get<data::SimulateConfig>();
    c.window = ct::window_for(c.simulate.region);
    if (j.contains("window")) {
        std::string w;
        read_optional(j, "window", w, where);
        c.window = ct::parse_window(w);
    }
    read_optional(j, "train_fraction", c.train_fraction, where);
    read_optional(j, "patch_size", c.patch_size, where);
    read_optional(j, "train_patches", c.train_patches, where);
    read_optional(j, "val_patches", c.val_patches, where);
    read_optional(j, "seed", c.seed, where);
    if (c.patch_size < 8 || c.patch_size % 8 != 0) throw InvalidArgument(where + ": patch_size must be a positive multiple of 8");
    if (c.train_patches < 1 || c.val_patches < 1) throw InvalidArgument(where + ": patch counts must be positive");
}

void to_json(nlohmann::json& j, const DataConfig& c) {
    j = {{"simulate", c.simulate},          {"window", ct::window_name(c.window)},
         {"train_fraction", c.train_fraction}, {"patch_size", c.patch_size},
         {"train_patches", c.train_patches},  {"val_patches", c.val_patches},
         {"seed", c.seed}};
    if (c.manifest) j["manifest"] = c.manifest->string();
}

PreparedData prepare_data(const DataConfig& cfg) {
    data::DatasetManifest manifest;
    std::vector<data::SlicePair> pairs;
    if (cfg.manifest) {
        manifest = data::load_manifest(*cfg.manifest);
    } else {
        for (auto& [rec, pair] : data::simulate_slices(cfg.simulate)) {
            manifest.slices.push_back(std::move(rec));
            pairs.push_back(std::move(pair));
        }
    }
    const auto [train_m, val_m] = data::split(manifest, cfg.train_fraction, derive_seed(cfg.seed, {0}));
    const auto pairs_of = [&](const data::DatasetManifest& part) {
        if (cfg.manifest) return data::load_slices(part);
        std::vector<data::SlicePair> out;
        for (const auto& rec : part.slices) {
            for (std::size_t i = 0; i < manifest.slices.size(); ++i) {
                if (manifest.slices[i].ldct_path == rec.ldct_path) out.push_back(pairs[i]);
            }
        }
        return out;
    };
    PreparedData out;
    out.train = data::extract_patches(pairs_of(train_m), cfg.window, cfg.train_patches, cfg.patch_size,
                                      derive_seed(cfg.seed, {1}));
    out.val = data::extract_patches(pairs_of(val_m), cfg.window, cfg.val_patches, cfg.patch_size,
                                    derive_seed(cfg.seed, {2}));
    out.train_groups = train_m.groups();
    out.val_groups = val_m.groups();
    return out;
}

}  // namespace mapnn::train
