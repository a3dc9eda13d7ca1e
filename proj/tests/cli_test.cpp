#include <gtest/gtest.h>

#include <unistd.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sys/wait.h>

#include "mapnn/checkpoint.hpp"
#include "mapnn/png_io.hpp"
#include "mapnn/trainer.hpp"

using namespace mapnn;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
    int status;
    std::string out;  // stdout and stderr
};

Result cli(const std::string& args) {
    const auto cmd = std::string(MAPNN_CLI_PATH) + " " + args + " 2>&1";
    FILE* p = ::popen(cmd.c_str(), "r");
    Result r{-1, {}};
    if (!p) return r;
    std::array<char, 4096> buf{};
    while (const auto n = std::fread(buf.data(), 1, buf.size(), p)) r.out.append(buf.data(), n);
    const int st = ::pclose(p);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("mapnn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + "_" +
                std::to_string(::getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path checkpoint() {
        train::TrainConfig cfg;
        cfg.training_depth = 3;
        const auto path = dir_ / "model.ckpt";
        save_checkpoint(path, train::to_checkpoint(train::init_state(cfg, 32), cfg));
        return path;
    }
    fs::path slice() {
        const auto hu = ct::phantom_to_hu(ct::make_phantom(ct::body_phantom(ct::Region::abdomen, 70), 4));
        const auto path = dir_ / "slice.png";
        io::write_png(path, io::hu_to_png16(hu));
        return path;
    }
    std::string denoise(const fs::path& ckpt, const fs::path& input, const std::string& depth, const fs::path& out) {
        return "denoise --ckpt " + ckpt.string() + " --input " + input.string() + " --depth " + depth + " --out " +
               out.string();
    }

    fs::path dir_;
};

std::size_t count_files(const fs::path& dir) {
    if (!fs::exists(dir)) return 0;
    return static_cast<std::size_t>(std::distance(fs::directory_iterator(dir), fs::directory_iterator()));
}

}  // namespace

TEST_F(CliTest, DenoiseWritesExactlyDepthFiles) {
    const auto ckpt = checkpoint();
    const auto input = slice();
    const auto out = dir_ / "out";
    const auto r = cli(denoise(ckpt, input, "3", out));
    ASSERT_EQ(r.status, 0) << r.out;
    EXPECT_EQ(count_files(out), 3u);
    for (int d = 1; d <= 3; ++d) {
        const auto img = io::read_png(out / ("depth_" + std::to_string(d) + ".png"));
        EXPECT_EQ(img.bit_depth, 8);
        EXPECT_EQ(img.rows, 70);
    }
    // Past the training depth is allowed but noted.
    const auto r5 = cli(denoise(ckpt, input, "5", dir_ / "out5") + " --whole-image");
    ASSERT_EQ(r5.status, 0) << r5.out;
    EXPECT_EQ(count_files(dir_ / "out5"), 5u);
    EXPECT_NE(r5.out.find("exceeds the training depth 3"), std::string::npos);
}

TEST_F(CliTest, DenoiseRejectsBadDepthAndInputs) {
    const auto ckpt = checkpoint();
    const auto input = slice();
    const auto out = dir_ / "out";
    auto r = cli(denoise(ckpt, input, "0", out));
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.out.find("--depth"), std::string::npos) << r.out;
    EXPECT_EQ(count_files(out), 0u);

    r = cli(denoise(ckpt, input, "9", out));
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.out.find("cap is 8"), std::string::npos) << r.out;

    r = cli(denoise(ckpt, input, "2", out) + " --window liver");
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.out.find("unknown window"), std::string::npos) << r.out;

    std::ofstream(dir_ / "corrupt.ckpt", std::ios::binary) << "MAPNNCKP\x01\x00\x00\x00 truncated";
    r = cli(denoise(dir_ / "corrupt.ckpt", input, "2", out));
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.out.find("error:"), std::string::npos) << r.out;

    r = cli(denoise(ckpt, dir_ / "missing.png", "2", out));
    EXPECT_NE(r.status, 0);

    io::write_png(dir_ / "eight.png", io::display_png8(ct::Image::Zero(32, 32)));
    r = cli(denoise(ckpt, dir_ / "eight.png", "2", out));
    EXPECT_NE(r.status, 0);
    EXPECT_EQ(count_files(out), 0u);
}

TEST_F(CliTest, UnknownFlagsAndCommandsFail) {
    EXPECT_NE(cli("denoise --frobnicate").status, 0);
    EXPECT_NE(cli("stats --counts 5,2 --bogus 1").status, 0);
    EXPECT_NE(cli("launch").status, 0);
    EXPECT_NE(cli("").status, 0);
}

TEST_F(CliTest, StatsCountsReproduceTableValues) {
    const auto r = cli("stats --counts 5,2 7,3");
    ASSERT_EQ(r.status, 0) << r.out;
    const auto j = json::parse(r.out);
    ASSERT_EQ(j.size(), 2u);
    EXPECT_EQ(j[0].at("p1").get<double>(), 0.2265625);
    EXPECT_EQ(j[0].at("p2").get<double>(), 0.9375);
    EXPECT_EQ(j[1].at("p1").get<double>(), 0.171875);
    EXPECT_EQ(j[1].at("p2").get<double>(), 0.9453125);
    EXPECT_NE(cli("stats --counts '5;2'").status, 0);
    EXPECT_NE(cli("stats --counts 5,2,1").status, 0);
    EXPECT_NE(cli("stats").status, 0);
}

TEST_F(CliTest, StatsOverARatingsFile) {
    {
        std::ofstream out(dir_ / "r.jsonl");
        for (const auto& [method, f] : std::vector<std::pair<std::string, int>>{{"DL1", 4}, {"IR", 2}}) {
            out << json{{"case_id", "c1"}, {"reader_id", "r1"}, {"method", method}, {"noise", 3}, {"fidelity", f}}.dump()
                << "\n";
        }
    }
    auto r = cli("stats --ratings " + (dir_ / "r.jsonl").string());
    ASSERT_EQ(r.status, 0) << r.out;
    EXPECT_EQ(json::parse(r.out).at("ratings"), 2);

    std::ofstream(dir_ / "bad.jsonl") << R"({"case_id":"c","reader_id":"r","method":"DL","noise":5,"fidelity":1})"
                                      << "\n";
    r = cli("stats --ratings " + (dir_ / "bad.jsonl").string());
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.out.find("line 1"), std::string::npos) << r.out;
    EXPECT_NE(cli("stats --ratings " + (dir_ / "none.jsonl").string()).status, 0);
}

TEST_F(CliTest, SimulateThenTrainWritesArtifacts) {
    const auto ds = dir_ / "ds";
    auto r = cli("simulate --out " + ds.string() + " --groups 2 --slices 1 --size 64 --views 90 --seed 5");
    ASSERT_EQ(r.status, 0) << r.out;
    const auto manifest = data::load_manifest(ds / "manifest.json");
    ASSERT_EQ(manifest.slices.size(), 2u);
    EXPECT_EQ(io::read_png(ds / manifest.slices[0].ldct_path).bit_depth, 16);

    const json cfg = {{"train",
                       {{"training_depth", 2},
                        {"batch_size", 4},
                        {"epochs", 1},
                        {"critic_steps", 2},
                        {"lr0", 1e-4},
                        {"validation_batch", 8}}},
                      {"data",
                       {{"manifest", (ds / "manifest.json").string()},
                        {"patch_size", 16},
                        {"train_patches", 8},
                        {"val_patches", 8},
                        {"seed", 2}}}};
    std::ofstream(dir_ / "cfg.json") << cfg.dump();
    const auto out = dir_ / "run";
    r = cli("train --quiet --config " + (dir_ / "cfg.json").string() + " --out " + out.string());
    ASSERT_EQ(r.status, 0) << r.out;
    for (const char* f : {"report.json", "iterations.csv", "validation.csv", "final.ckpt", "config.json"}) {
        EXPECT_TRUE(fs::exists(out / f)) << f;
    }
    std::ifstream rep(out / "report.json");
    const auto report = train::TrainReport::from_json(json::parse(rep));
    EXPECT_EQ(report.iterations.size(), 2u);
    ASSERT_FALSE(report.validation.empty());
    EXPECT_EQ(report.validation.back().depth_mse.size(), 2u);
    const auto ckpt = load_checkpoint(out / "final.ckpt");
    EXPECT_EQ(ckpt.training_depth, 2);

    std::ofstream(dir_ / "typo.json") << R"({"train": {"batchsize": 4}})";
    r = cli("train --config " + (dir_ / "typo.json").string() + " --out " + (dir_ / "typo").string());
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.out.find("batchsize"), std::string::npos) << r.out;
}
