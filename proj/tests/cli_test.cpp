#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "support.hpp"
#include "wordgan/cli.hpp"

using namespace wordgan;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "wordgan");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    auto bytes = read_file_bytes(p);
    return {bytes.begin(), bytes.end()};
}

std::size_t count_lines(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    return n;
}

class CliTest : public ::testing::Test {
protected:
    oracle::TempDir dir{"cli"};
    fs::path data = dir.path / "data", ckpts = dir.path / "ckpt", out = dir.path / "out";

    void SetUp() override {
        std::ofstream(dir.path / "toy.cfg") << "image_extent = 16\n"
                                               "batch_size = 16\n"
                                               "z_dim = 8\n"
                                               "embedding_dim = 6\n"
                                               "g_base_channels = 4\n"
                                               "d_base_channels = 4\n"
                                               "condition_channels = 4\n"
                                               "epochs = 1\n"
                                               "dataset = " + data.string() + "\n"
                                               "checkpoints = " + ckpts.string() + "\n"
                                               "output = " + out.string() + "\n";
    }

    std::vector<std::string> with_config(std::string cmd, std::vector<std::string> extra = {}) {
        std::vector<std::string> args{std::move(cmd), "--config", (dir.path / "toy.cfg").string()};
        args.insert(args.end(), extra.begin(), extra.end());
        return args;
    }
};

}  // namespace

TEST_F(CliTest, DatasetWritesPairsAndCreatesDirectory) {
    auto r = run(with_config("dataset"));
    ASSERT_EQ(r.code, 0) << r.err;
    std::size_t images = 0, captions = 0;
    for (const auto& e : fs::directory_iterator(data / "images")) images += e.path().extension() == ".png";
    for (const auto& e : fs::directory_iterator(data / "captions")) captions += e.path().extension() == ".txt";
    EXPECT_EQ(images, 120u);
    EXPECT_EQ(captions, 120u);
    EXPECT_TRUE(fs::exists(data / "manifest.txt"));
    EXPECT_NE(slurp(data / "manifest.txt").find("seed 1"), std::string::npos);
}

TEST_F(CliTest, DatasetIsByteIdenticalAcrossRuns) {
    ASSERT_EQ(run(with_config("dataset")).code, 0);
    const auto first = slurp(data / "images" / "000017.png");
    const auto manifest = slurp(data / "manifest.txt");
    fs::remove_all(data);
    ASSERT_EQ(run(with_config("dataset")).code, 0);
    EXPECT_EQ(slurp(data / "images" / "000017.png"), first);
    EXPECT_EQ(slurp(data / "manifest.txt"), manifest);
}

TEST_F(CliTest, TrainGenerateEvalPipeline) {
    ASSERT_EQ(run(with_config("dataset")).code, 0);
    auto r = run(with_config("train"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("epoch 1 iter 8"), std::string::npos) << r.out;
    EXPECT_TRUE(fs::exists(ckpts / checkpoint_file_name(8)));
    EXPECT_EQ(count_lines(out / "loss.csv"), 1u + 8u);

    const std::string text = "text=one small red circle on a white background";
    auto g1 = run(with_config("generate", {text, "output=" + (dir.path / "g1").string()}));
    ASSERT_EQ(g1.code, 0) << g1.err;
    auto g2 = run(with_config("generate", {text, "output=" + (dir.path / "g2").string()}));
    ASSERT_EQ(g2.code, 0) << g2.err;
    std::size_t pngs = 0;
    for (const auto& e : fs::directory_iterator(dir.path / "g1")) pngs += e.path().extension() == ".png";
    EXPECT_EQ(pngs, 9u);
    EXPECT_TRUE(fs::exists(dir.path / "g1" / "word_4_circle.png"));
    auto strip = read_png(dir.path / "g1" / "strip.png");
    EXPECT_EQ(strip.width, 8u * 16u);
    EXPECT_EQ(strip.height, 16u);
    EXPECT_EQ(slurp(dir.path / "g1" / "strip.txt"), "one small red circle on a white background\n");
    for (const auto& e : fs::directory_iterator(dir.path / "g1"))
        EXPECT_EQ(slurp(e.path()), slurp(dir.path / "g2" / e.path().filename()));

    const auto report = dir.path / "report.csv";
    auto e1 = run(with_config("eval", {"n_sentences=5", "report=" + report.string()}));
    ASSERT_EQ(e1.code, 0) << e1.err;
    EXPECT_EQ(count_lines(report), 49u);
    EXPECT_NE(e1.out.find("mean ssim by word: 1:"), std::string::npos);
    const auto first = slurp(report);
    ASSERT_EQ(run(with_config("eval", {"n_sentences=5", "report=" + report.string()})).code, 0);
    EXPECT_EQ(slurp(report), first);

    auto inspect = run(with_config("inspect"));
    ASSERT_EQ(inspect.code, 0);
    EXPECT_NE(inspect.out.find("counter iteration 8"), std::string::npos);
}

TEST_F(CliTest, ResumeContinuesIterationCounter) {
    ASSERT_EQ(run(with_config("dataset")).code, 0);
    ASSERT_EQ(run(with_config("train", {"max_iterations=3"})).code, 0);
    EXPECT_TRUE(fs::exists(ckpts / checkpoint_file_name(3)));
    auto r = run(with_config("train", {"--resume", "epochs=2"}));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("at iteration 3"), std::string::npos) << r.out;
    EXPECT_TRUE(fs::exists(ckpts / checkpoint_file_name(16)));
    EXPECT_EQ(count_lines(out / "loss.csv"), 1u + 16u);

    std::ifstream in(out / "loss.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, loss_log_header());
    for (std::uint64_t it = 1; std::getline(in, line); ++it) EXPECT_EQ(line.substr(0, line.find(',')), std::to_string(it));
}

TEST_F(CliTest, ResumedRunMatchesUninterruptedRun) {
    ASSERT_EQ(run(with_config("dataset")).code, 0);
    ASSERT_EQ(run(with_config("train", {"epochs=2"})).code, 0);
    const auto straight = slurp(ckpts / checkpoint_file_name(16));
    fs::remove_all(ckpts);
    ASSERT_EQ(run(with_config("train", {"epochs=1"})).code, 0);
    ASSERT_EQ(run(with_config("train", {"--resume", "epochs=2"})).code, 0);
    EXPECT_EQ(slurp(ckpts / checkpoint_file_name(16)), straight);
}

TEST_F(CliTest, MissingCheckpointLeavesNoReport) {
    ASSERT_EQ(run(with_config("dataset")).code, 0);
    const auto report = dir.path / "report.csv";
    auto r = run(with_config("eval", {"checkpoint=" + (dir.path / "nope.lcg").string(), "report=" + report.string()}));
    EXPECT_EQ(r.code, kExitIo);
    EXPECT_FALSE(fs::exists(report));
    EXPECT_NE(r.err.find("nope.lcg"), std::string::npos);
}

TEST_F(CliTest, TruncatedCheckpointNamesEntry) {
    ASSERT_EQ(run(with_config("dataset")).code, 0);
    ASSERT_EQ(run(with_config("train", {"max_iterations=1"})).code, 0);
    const auto path = ckpts / checkpoint_file_name(1);
    fs::resize_file(path, fs::file_size(path) - 100);
    auto r = run(with_config("generate", {"text=one red circle"}));
    EXPECT_EQ(r.code, kExitIo);
    EXPECT_NE(r.err.find("truncated"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("manifest entry 'adam.disc.v."), std::string::npos) << r.err;
}

TEST_F(CliTest, ConfigErrors) {
    EXPECT_EQ(run(with_config("train", {"bogus=1"})).code, kExitConfig);
    EXPECT_EQ(run(with_config("train", {"batch_size=1"})).code, kExitConfig);
    EXPECT_EQ(run({"train", "--config", (dir.path / "absent.cfg").string()}).code, kExitConfig);
    EXPECT_EQ(run({"frobnicate"}).code, kExitConfig);
    EXPECT_EQ(run({}).code, kExitConfig);
    ASSERT_EQ(run(with_config("dataset")).code, 0);
    ASSERT_EQ(run(with_config("train", {"max_iterations=1"})).code, 0);
    EXPECT_EQ(run(with_config("generate", {"text=..."})).code, kExitConfig);
}

TEST_F(CliTest, MissingDatasetIsIoError) {
    auto r = run(with_config("train", {"dataset=" + (dir.path / "none").string()}));
    EXPECT_EQ(r.code, kExitIo);
}

TEST_F(CliTest, SeedFlagOverridesConfig) {
    ASSERT_EQ(run(with_config("dataset", {"--seed", "9"})).code, 0);
    EXPECT_NE(slurp(data / "manifest.txt").find("seed 9"), std::string::npos);
}

TEST(CliBinary, ExitCodesFromProcess) {
    const std::string bin = WORDGAN_CLI_PATH;
    oracle::TempDir dir("bin");
    auto status = [](const std::string& cmd) {
        const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    EXPECT_EQ(status(bin + " --help"), 0);
    EXPECT_EQ(status(bin + " train nonsense_key=1"), 2);
    EXPECT_EQ(status(bin + " eval checkpoint=" + (dir.path / "x.lcg").string()), 3);
    EXPECT_EQ(status(bin + " dataset image_extent=16 samples_per_combination=1 dataset=" + (dir.path / "d").string()), 0);
    EXPECT_TRUE(fs::exists(dir.path / "d" / "manifest.txt"));
}
