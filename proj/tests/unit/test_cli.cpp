#include <cstdlib>
#include <sstream>

#include <gtest/gtest.h>

#include "boxprompt/cli.hpp"
#include "boxprompt/storage.hpp"
#include "boxprompt/synthetic.hpp"
#include "tempdir.hpp"

using namespace boxprompt;
using testing_support::TempDir;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    const auto bytes = read_file_bytes(p);
    return {bytes.begin(), bytes.end()};
}

void write_small_dataset(const fs::path& root, int cases = 5) {
    SyntheticDatasetSpec spec;
    spec.domains = {"A", "B", "C"};
    spec.cases_per_domain = cases;
    spec.size = 64;
    spec.noise.speckle_count = 2;
    spec.noise.speckle_size = 4;
    spec.noise.min_gap = 4;
    write_dataset(root, make_synthetic_dataset(spec));
}

}  // namespace

TEST(Cli, FormatFraction) {
    EXPECT_EQ(format_fraction(1.0), "1.0");
    EXPECT_EQ(format_fraction(0.5), "0.5");
    EXPECT_EQ(format_fraction(0.0), "0.0");
    EXPECT_EQ(format_fraction(2.0 / 3.0), "0.6666666666666666");
}

TEST(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(cli({}).code, kExitValidation);
    EXPECT_EQ(cli({"frobnicate"}).code, kExitValidation);
    EXPECT_EQ(cli({"threshold", "--in", "x.npy"}).code, kExitValidation);
    EXPECT_EQ(cli({"threshold", "--in", "x.npy", "--out", "y.png", "--theta", "2"}).code, kExitValidation);
    EXPECT_EQ(cli({"--help"}).code, kExitOk);
}

TEST(Cli, ThresholdFilterBboxDice) {
    TempDir dir;
    ProbabilityMap map(16, 16, 0.1f);
    for (int r = 4; r <= 9; ++r) {
        for (int c = 2; c <= 6; ++c) map.at(r, c) = 0.9f;
    }
    map.at(15, 15) = 0.8f;
    write_probmap(dir / "map.npy", map);

    auto r = cli({"threshold", "--in", (dir / "map.npy").string(), "--theta", "0.75", "--out", (dir / "t.png").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(count_foreground(read_mask(dir / "t.png")), 31u);

    r = cli({"filter", "--in", (dir / "map.npy").string(), "--out", (dir / "f.png").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(r.out, "0 4 7 11\n");
    EXPECT_EQ(count_foreground(read_mask(dir / "f.png")), 30u);

    r = cli({"bbox", "--in", (dir / "t.png").string()});
    EXPECT_EQ(r.out, "2 4 15 15\n");
    r = cli({"bbox", "--in", (dir / "t.png").string(), "--largest"});
    EXPECT_EQ(r.out, "2 4 6 9\n");

    r = cli({"dice", "--pred", (dir / "t.png").string(), "--gt", (dir / "t.png").string()});
    EXPECT_EQ(r.out, "1.0\n");

    write_mask(dir / "empty.png", BinaryMask(16, 16));
    r = cli({"bbox", "--in", (dir / "empty.png").string()});
    EXPECT_EQ(r.out, "empty\n");
}

TEST(Cli, IoAndFormatErrorsExitTwo) {
    TempDir dir;
    EXPECT_EQ(cli({"dice", "--pred", (dir / "none.png").string(), "--gt", (dir / "none.png").string()}).code, kExitIo);
    const fs::path rgb = fs::path(BOXPROMPT_TEST_DATA) / "mask_rgb.png";
    EXPECT_EQ(cli({"bbox", "--in", rgb.string()}).code, kExitIo);
    const fs::path f64 = fs::path(BOXPROMPT_TEST_DATA) / "probmap_f64.npy";
    EXPECT_EQ(cli({"threshold", "--in", f64.string(), "--out", (dir / "o.png").string()}).code, kExitIo);
}

TEST(Cli, DimensionMismatchExitsOne) {
    TempDir dir;
    write_mask(dir / "a.png", BinaryMask(4, 4));
    write_mask(dir / "b.png", BinaryMask(4, 5));
    EXPECT_EQ(cli({"dice", "--pred", (dir / "a.png").string(), "--gt", (dir / "b.png").string()}).code, kExitValidation);
}

TEST(Cli, MergeThenSplit) {
    TempDir dir;
    std::vector<std::string> args = {"merge", "--id", "m0", "--out", (dir / "c.png").string(), "--manifest",
                                     (dir / "m.json").string()};
    for (int k = 0; k < 3; ++k) {
        Image img(8, 8);
        for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<std::uint8_t>(k * 50 + i);
        write_image(dir / ("t" + std::to_string(k) + ".png"), img);
        args.push_back("--tile");
        args.push_back((dir / ("t" + std::to_string(k) + ".png")).string());
    }
    args.insert(args.end(), {"--box", "1:1,2,3,4"});
    auto r = cli(args);
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(r.out, "1 9 2 11 4\n");
    const PromptManifest m = read_manifest(dir / "m.json");
    ASSERT_EQ(m.composites.size(), 1u);
    EXPECT_FALSE(m.composites[0].slots[3].has_value());

    r = cli({"split", "--in", (dir / "c.png").string(), "--manifest", (dir / "m.json").string(), "--out-dir",
             (dir / "parts").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    int n = 0;
    for (const auto& e : fs::directory_iterator(dir / "parts")) {
        (void)e;
        ++n;
    }
    EXPECT_EQ(n, 3);

    r = cli({"merge", "--tile", (dir / "t0.png").string(), "--box", "0:0,0,8,8", "--out", (dir / "x.png").string()});
    EXPECT_EQ(r.code, kExitValidation);
}

TEST(Cli, PipelineWritesArtifacts) {
    TempDir dir;
    write_small_dataset(dir / "ds");
    auto r = cli({"pipeline", "--dataset", (dir / "ds").string(), "--source", "A", "--tile-size", "64", "--out",
                  (dir / "out").string(), "--segmenter", "mock-perfect", "--box-source", "gt"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("100.00"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "out/manifest.json"));
    EXPECT_TRUE(fs::exists(dir / "out/composites/B-0000.png"));
    EXPECT_TRUE(fs::exists(dir / "out/report.txt"));
    const DiceReport report = read_report(dir / "out/report.json");
    EXPECT_EQ(report.source_to_rest, 1.0);
    EXPECT_EQ(read_image(dir / "out/composites/B-0001.png").width(), 128);

    r = cli({"report", "--in", (dir / "out/report.json").string()});
    EXPECT_EQ(r.code, kExitOk);
    EXPECT_NE(r.out.find("AVG"), std::string::npos);
}

TEST(Cli, PipelineValidation) {
    TempDir dir;
    write_small_dataset(dir / "ds", 1);
    const std::string ds = (dir / "ds").string();
    EXPECT_EQ(cli({"pipeline", "--dataset", ds, "--tile-size", "64"}).code, kExitValidation);
    EXPECT_EQ(cli({"pipeline", "--dataset", ds, "--source", "A", "--tile-size", "64", "--segmenter", "external"}).code,
              kExitValidation);
    EXPECT_EQ(cli({"pipeline", "--dataset", ds, "--source", "A", "--tile-size", "60", "--factor", "8"}).code,
              kExitValidation);
    EXPECT_EQ(cli({"pipeline", "--dataset", (dir / "nope").string(), "--source", "A"}).code, kExitIo);
    EXPECT_EQ(cli({"pipeline", "--dataset", ds, "--source", "A"}).code, kExitValidation);  // tiles are 64, not 512
}

TEST(Cli, ConfigPrecedence) {
    TempDir dir;
    write_small_dataset(dir / "ds", 2);
    write_text_file(dir / "cfg.json", "{\"tile_size\": 64, \"source_domain\": \"A\", \"box_source\": \"gt\", "
                                      "\"dataset_root\": \"" + (dir / "ds").string() + "\"}\n");
    auto r = cli({"pipeline", "--config", (dir / "cfg.json").string(), "--out", (dir / "o1").string(), "--segmenter",
                  "mock-perfect"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(read_report(dir / "o1/report.json").source_to_rest, 1.0);

    // A flag beats the file.
    r = cli({"pipeline", "--config", (dir / "cfg.json").string(), "--out", (dir / "o2").string(), "--segmenter",
             "mock-perfect", "--source", "B"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(read_report(dir / "o2/report.json").source_domain, "B");

    // The environment variable supplies the file when --config is absent.
    ::setenv(kConfigEnvVar, (dir / "cfg.json").c_str(), 1);
    r = cli({"pipeline", "--out", (dir / "o3").string(), "--segmenter", "mock-perfect"});
    ::unsetenv(kConfigEnvVar);
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(slurp(dir / "o3/report.json"), slurp(dir / "o1/report.json"));

    write_text_file(dir / "bad.json", "{\"theta9\": 1}");
    EXPECT_EQ(cli({"pipeline", "--config", (dir / "bad.json").string()}).code, kExitValidation);
}

TEST(Cli, EmitScoreMatchesSinglePhase) {
    TempDir dir;
    write_small_dataset(dir / "ds");
    const std::string ds = (dir / "ds").string();
    const std::vector<std::string> common = {"--dataset", ds, "--source", "A", "--tile-size", "64"};

    auto with = [&](std::vector<std::string> extra) {
        std::vector<std::string> args = {"pipeline"};
        args.insert(args.end(), common.begin(), common.end());
        args.insert(args.end(), extra.begin(), extra.end());
        return cli(args);
    };
    auto r = with({"--segmenter", "mock-noisy", "--seed", "7", "--save-predictions", "--out", (dir / "single").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;

    r = with({"--segmenter", "external", "--phase", "emit", "--out", (dir / "two").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_FALSE(fs::exists(dir / "two/report.json"));
    EXPECT_EQ(slurp(dir / "two/manifest.json"), slurp(dir / "single/manifest.json"));

    // Scoring without predictions is an I/O error.
    r = with({"--segmenter", "external", "--phase", "score", "--out", (dir / "two").string()});
    EXPECT_EQ(r.code, kExitIo);

    fs::copy(dir / "single/predictions", dir / "two/predictions", fs::copy_options::recursive);
    r = with({"--segmenter", "external", "--phase", "score", "--out", (dir / "two").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(slurp(dir / "two/report.json"), slurp(dir / "single/report.json"));

    // A prediction with a value outside [0,1] breaks the segmenter contract.
    const fs::path victim = dir / "two/predictions/B-0000/0/0.npy";
    ProbabilityMap bad = read_probmap(victim);
    auto bytes = encode_probmap(bad);
    const float over = 1.5f;
    std::memcpy(bytes.data() + bytes.size() - 4, &over, 4);
    write_file_bytes(victim, bytes.data(), bytes.size());
    r = with({"--segmenter", "external", "--phase", "score", "--out", (dir / "two").string()});
    EXPECT_EQ(r.code, kExitContract) << r.err;

    // So does a missing box file.
    fs::copy_file(dir / "single/predictions/B-0000/0/0.npy", victim, fs::copy_options::overwrite_existing);
    fs::remove(dir / "two/predictions/B-0000/1/0.npy");
    r = with({"--segmenter", "external", "--phase", "score", "--out", (dir / "two").string()});
    EXPECT_EQ(r.code, kExitContract) << r.err;
}

TEST(Cli, SweepWritesGrid) {
    TempDir dir;
    write_small_dataset(dir / "ds", 2);
    auto r = cli({"sweep", "--dataset", (dir / "ds").string(), "--tile-size", "64", "--out", (dir / "s").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto j = nlohmann::json::parse(slurp(dir / "s/sweep.json"));
    EXPECT_EQ(j["columns"].size(), 3u);
    EXPECT_EQ(j["rows"].size(), 3u);
    EXPECT_NE(r.out.find("A to Rest"), std::string::npos);
}
