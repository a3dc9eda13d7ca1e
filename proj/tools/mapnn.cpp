// Command-line front end: simulate, train, denoise, stats, serve.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "mapnn/checkpoint.hpp"
#include "mapnn/gateway.hpp"
#include "mapnn/json_util.hpp"
#include "mapnn/png_io.hpp"
#include "mapnn/stats.hpp"
#include "mapnn/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mapnn;

namespace {

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InvalidArgument(path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    out.close();
    if (!out) throw IoError("cannot write " + path.string());
}

struct SimulateArgs {
    fs::path out;
    fs::path config;
    std::optional<std::string> region;
    std::optional<int> groups;
    std::optional<int> slices;
    std::optional<Index> size;
    std::optional<Index> views;
    std::optional<double> dose_factor;
    std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& a) {
    data::SimulateConfig cfg;
    if (!a.config.empty()) cfg = read_json_file(a.config).get<data::SimulateConfig>();
    if (a.region) cfg.region = ct::parse_region(*a.region);
    if (a.groups) cfg.groups = *a.groups;
    if (a.slices) cfg.slices_per_group = *a.slices;
    if (a.size) cfg.size = *a.size;
    if (a.views) cfg.geometry.n_views = *a.views;
    if (a.dose_factor) cfg.dose.dose_factor = *a.dose_factor;
    if (a.seed) cfg.seed = *a.seed;
    const auto m = data::simulate_dataset(cfg, a.out);
    std::cout << "wrote " << m.slices.size() << " slice pairs to " << (a.out / "manifest.json").string() << "\n";
    return 0;
}

struct TrainArgs {
    fs::path config;
    fs::path out;
    fs::path resume;
    bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
    const auto j = read_json_file(a.config);
    check_keys(j, {"train", "data"}, "train config");
    train::TrainConfig tc;
    train::DataConfig dc;
    if (j.contains("train")) tc = j.at("train").get<train::TrainConfig>();
    if (j.contains("data")) dc = j.at("data").get<train::DataConfig>();
    tc.validate();
    fs::create_directories(a.out);
    const auto prepared = train::prepare_data(dc);
    std::cout << "train patches " << prepared.train.size() << " from " << prepared.train_groups.size()
              << " groups, val patches " << prepared.val.size() << " from " << prepared.val_groups.size()
              << " groups\n";
    auto state = a.resume.empty() ? train::init_state(tc, dc.patch_size)
                                  : train::state_from(load_checkpoint(a.resume));
    if (state.iteration > 0) std::cout << "resuming at iteration " << state.iteration << "\n";
    train::RunOptions opts;
    opts.out_dir = a.out;
    opts.verbose = !a.quiet;
    write_text(a.out / "config.json", json{{"train", tc}, {"data", dc}}.dump(2));
    train::run(state, tc, prepared.train, prepared.val, opts);
    write_text(a.out / "report.json", state.report.to_json().dump(2));
    write_text(a.out / "iterations.csv", state.report.iterations_csv());
    write_text(a.out / "validation.csv", state.report.validation_csv());
    if (!state.report.validation.empty()) {
        const auto& v = state.report.validation.back();
        std::printf("final validation: identity %.6g, g1 %.6g\n", v.identity_mse, v.depth_mse.front());
    }
    return 0;
}

struct DenoiseArgs {
    fs::path ckpt;
    fs::path input;
    int depth = 1;
    std::string window = "abdomen";
    fs::path out;
    bool whole_image = false;
};

int cmd_denoise(const DenoiseArgs& a) {
    if (a.depth < 1 || a.depth > kMaxInferenceDepth) {
        throw InvalidArgument("--depth must be in [1, " + std::to_string(kMaxInferenceDepth) + "], the cap is " +
                              std::to_string(kMaxInferenceDepth));
    }
    const auto w = ct::parse_window(a.window);
    const auto model = gateway::Model::load(a.ckpt);
    const auto hu = io::png16_to_hu(io::read_png(a.input));
    infer::TileConfig tiles;
    tiles.whole_image = a.whole_image;
    const auto seq = infer::progressive_infer_hu(model->params, model->training_depth, hu, a.depth, w, tiles);
    fs::create_directories(a.out);
    for (std::size_t d = 0; d < seq.depths.size(); ++d) {
        write_text(a.out / ("depth_" + std::to_string(d + 1) + ".png"), gateway::depth_png(seq.depths[d]));
    }
    if (seq.beyond_training_depth) {
        std::cerr << "note: depth " << a.depth << " exceeds the training depth " << model->training_depth << "\n";
    }
    std::cout << "wrote " << seq.depths.size() << " images to " << a.out.string() << "\n";
    return 0;
}

struct StatsArgs {
    std::vector<std::string> counts;
    fs::path ratings;
};

int cmd_stats(const StatsArgs& a) {
    if (a.counts.empty() == a.ratings.empty()) throw InvalidArgument("give exactly one of --counts or --ratings");
    json out;
    if (!a.counts.empty()) {
        out = json::array();
        for (const auto& c : a.counts) {
            long long gt = 0, lt = 0;
            char tail = 0;
            if (std::sscanf(c.c_str(), "%lld,%lld%c", &gt, &lt, &tail) != 2) {
                throw InvalidArgument("--counts expects N_GT,N_LT, got '" + c + "'");
            }
            out.push_back(stats::sign_test_json(stats::sign_test(gt, lt)));
        }
    } else {
        std::ifstream in(a.ratings);
        if (!in) throw FileNotFound("cannot open " + a.ratings.string());
        out = stats::stats_report(stats::read_ratings_jsonl(in));
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

struct ServeArgs {
    fs::path ckpt;
    int port = 8080;
    std::string host = "127.0.0.1";
    fs::path data_dir;
};

int cmd_serve(const ServeArgs& a) {
    gateway::ServiceConfig cfg;
    cfg.checkpoint = a.ckpt;
    cfg.data_dir = a.data_dir.empty() ? gateway::data_dir_from_env() : a.data_dir;
    std::cout << "serving on " << a.host << ":" << a.port << ", data in " << cfg.data_dir.string() << std::endl;
    if (!gateway::serve(cfg, a.host, a.port)) {
        std::cerr << "error: cannot listen on " << a.host << ":" << a.port << "\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Progressive low-dose CT denoising toolkit"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Write a simulated LDCT/NDCT dataset");
    s->add_option("--out", sim.out, "Output directory")->required();
    s->add_option("--config", sim.config, "SimulateConfig JSON")->check(CLI::ExistingFile);
    s->add_option("--region", sim.region, "abdomen or chest");
    s->add_option("--groups", sim.groups, "Phantom groups");
    s->add_option("--slices", sim.slices, "Slices per group");
    s->add_option("--size", sim.size, "Slice size in pixels");
    s->add_option("--views", sim.views, "Projection views");
    s->add_option("--dose-factor", sim.dose_factor, "LDCT dose relative to NDCT");
    s->add_option("--seed", sim.seed, "Seed");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train a generator");
    t->add_option("--config", tr.config, "JSON with 'train' and 'data' objects")->required()->check(CLI::ExistingFile);
    t->add_option("--out", tr.out, "Output directory")->required();
    t->add_option("--resume", tr.resume, "Checkpoint to continue from")->check(CLI::ExistingFile);
    t->add_flag("--quiet", tr.quiet, "No per-iteration log");

    DenoiseArgs dn;
    auto* d = app.add_subcommand("denoise", "Write depth_1.png ... depth_D.png for one slice");
    d->add_option("--ckpt", dn.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    d->add_option("--input", dn.input, "16-bit PNG slice (HU + 1024)")->required()->check(CLI::ExistingFile);
    d->add_option("--depth", dn.depth, "Maximum depth")->required();
    d->add_option("--window", dn.window, "abdomen or chest")->capture_default_str();
    d->add_option("--out", dn.out, "Output directory")->required();
    d->add_flag("--whole-image", dn.whole_image, "One forward pass over the whole slice");

    StatsArgs st;
    auto* sc = app.add_subcommand("stats", "Sign tests and kappa");
    sc->add_option("--counts", st.counts, "N_GT,N_LT pairs")->expected(1, -1);
    sc->add_option("--ratings", st.ratings, "Ratings JSON-lines file");

    ServeArgs sv;
    auto* srv = app.add_subcommand("serve", "Run the HTTP service");
    srv->add_option("--ckpt", sv.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    srv->add_option("--port", sv.port, "Port")->capture_default_str();
    srv->add_option("--host", sv.host, "Bind address")->capture_default_str();
    srv->add_option("--data-dir", sv.data_dir, std::string("Data directory (default $") + gateway::kDataDirEnv + ")");

    CLI11_PARSE(app, argc, argv);

    try {
        if (s->parsed()) return cmd_simulate(sim);
        if (t->parsed()) return cmd_train(tr);
        if (d->parsed()) return cmd_denoise(dn);
        if (sc->parsed()) return cmd_stats(st);
        if (srv->parsed()) return cmd_serve(sv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
