#include <cstring>

#include <gtest/gtest.h>

#include "boxprompt/storage.hpp"
#include "boxprompt/synthetic.hpp"
#include "tempdir.hpp"

using namespace boxprompt;
using testing_support::TempDir;

namespace {

const fs::path kData = BOXPROMPT_TEST_DATA;

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no exception";
    return ErrorKind::InvalidArgument;
}

/// Hand-built NPY with an arbitrary header dict, padded to `align`.
std::vector<char> npy_bytes(const std::string& dict, std::size_t payload, std::size_t align = 64, char major = 1) {
    std::string header = dict;
    const std::size_t pre = 10;
    while ((pre + header.size() + 1) % align != 0) header += ' ';
    header += '\n';
    std::string prefix = "\x93NUMPY";
    prefix += major;
    prefix += '\0';
    prefix += static_cast<char>(header.size() & 0xff);
    prefix += static_cast<char>(header.size() >> 8);
    const std::string all = prefix + header + std::string(payload, '\0');
    return {all.begin(), all.end()};
}

PromptManifest sample_manifest() {
    PromptManifest m;
    m.tile_size = 8;
    ManifestComposite c;
    c.composite_id = "B-0000";
    c.image = "composites/B-0000.png";
    c.domain = "B";
    c.slots = {std::string("B/x"), std::string("B/y"), std::nullopt, std::nullopt};
    c.boxes[0] = {{1, 1, 3, 4}};
    c.boxes[1] = {{8, 0, 15, 7}, {9, 2, 10, 3}};
    m.composites.push_back(c);
    m.skipped_cases = {"B/z"};
    return m;
}

}  // namespace

TEST(Npy, ReadsNumpyWrittenFile) {
    const ProbabilityMap m = read_probmap(kData / "probmap_128x128.npy");
    ASSERT_EQ(m.width(), 128);
    ASSERT_EQ(m.height(), 128);
    for (int i = 0; i < 128; i += 7) {
        for (int j = 0; j < 128; j += 5) {
            EXPECT_EQ(m.at(i, j), static_cast<float>(((i * 131 + j * 7) % 256) / 255.0));
        }
    }
}

TEST(Npy, EncodingMatchesNumpyBytes) {
    const ProbabilityMap m = read_probmap(kData / "probmap_128x128.npy");
    const auto numpy_bytes = read_file_bytes(kData / "probmap_128x128.npy");
    EXPECT_EQ(encode_probmap(m), numpy_bytes);
}

TEST(Npy, HeaderIsAligned) {
    const auto bytes = encode_probmap(ProbabilityMap(3, 5, 0.25f));
    const std::size_t header_len = static_cast<unsigned char>(bytes[8]) | (static_cast<unsigned char>(bytes[9]) << 8);
    EXPECT_EQ((10 + header_len) % 64, 0u);
    EXPECT_EQ(bytes[10 + header_len - 1], '\n');
    EXPECT_EQ(bytes.size(), 10 + header_len + 15 * 4);
    EXPECT_EQ(decode_probmap(bytes), ProbabilityMap(3, 5, 0.25f));
}

TEST(Npy, RoundTripThroughFile) {
    TempDir dir;
    ProbabilityMap m(7, 3);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<float>(i) / 21.0f;
    write_probmap(dir / "p.npy", m);
    EXPECT_EQ(read_probmap(dir / "p.npy"), m);
}

TEST(Npy, AcceptsSixteenByteAlignedHeader) {
    auto bytes = npy_bytes("{'descr': '<f4', 'fortran_order': False, 'shape': (2, 3), }", 24, 16);
    const float v = 0.5f;
    std::memcpy(bytes.data() + bytes.size() - 4, &v, 4);
    const ProbabilityMap m = decode_probmap(bytes);
    EXPECT_EQ(m.width(), 3);
    EXPECT_EQ(m.height(), 2);
    EXPECT_EQ(m.at(1, 2), 0.5f);
}

TEST(Npy, RejectsForeignFiles) {
    EXPECT_EQ(kind_of([] { read_probmap(kData / "probmap_f64.npy"); }), ErrorKind::WrongDtype);
    EXPECT_EQ(kind_of([] { read_probmap(kData / "probmap_rank3.npy"); }), ErrorKind::WrongRank);
    EXPECT_EQ(kind_of([] { read_probmap(kData / "probmap_fortran.npy"); }), ErrorKind::UnsupportedLayout);
    EXPECT_EQ(kind_of([] { read_probmap(kData / "probmap_out_of_range.npy"); }), ErrorKind::OutOfRangeValue);
    EXPECT_EQ(kind_of([] { read_probmap(kData / "mask_values.png"); }), ErrorKind::BadMagic);
    EXPECT_EQ(kind_of([] { read_probmap(kData / "does_not_exist.npy"); }), ErrorKind::Io);
}

TEST(Npy, RejectsTruncatedAndOddHeaders) {
    const std::string good = "{'descr': '<f4', 'fortran_order': False, 'shape': (2, 3), }";
    EXPECT_EQ(kind_of([&] { decode_probmap(npy_bytes(good, 20)); }), ErrorKind::TruncatedPayload);
    EXPECT_EQ(kind_of([&] { decode_probmap(npy_bytes(good, 24, 64, 2)); }), ErrorKind::BadMagic);
    EXPECT_EQ(kind_of([&] { decode_probmap(npy_bytes("{'descr': '>f4', 'fortran_order': False, 'shape': (2, 3), }", 24)); }),
              ErrorKind::WrongDtype);
    EXPECT_EQ(kind_of([&] { decode_probmap(npy_bytes("{'descr': '<f4', 'fortran_order': False, 'shape': (6,), }", 24)); }),
              ErrorKind::WrongRank);
    EXPECT_EQ(kind_of([&] { decode_probmap({'\x93', 'N', 'U'}); }), ErrorKind::BadMagic);
}

TEST(Npy, EncoderRejectsOutOfRange) {
    EXPECT_EQ(kind_of([] { encode_probmap(ProbabilityMap(2, 2, -0.1f)); }), ErrorKind::OutOfRangeValue);
    EXPECT_EQ(kind_of([] { encode_probmap(ProbabilityMap(2, 2, std::numeric_limits<float>::quiet_NaN())); }),
              ErrorKind::OutOfRangeValue);
}

TEST(Png, MaskRoundTripAndNonzeroIsForeground) {
    TempDir dir;
    BinaryMask m(5, 3);
    m.at(1, 4) = 1;
    m.at(2, 0) = 1;
    write_mask(dir / "m.png", m);
    EXPECT_EQ(read_mask(dir / "m.png"), m);
    EXPECT_EQ(read_image(dir / "m.png").at(1, 4), 255);

    const BinaryMask v = read_mask(kData / "mask_values.png");
    EXPECT_EQ(v, BinaryMask(2, 2, std::vector<std::uint8_t>{0, 1, 1, 1}));
}

TEST(Png, ImageRoundTrip) {
    TempDir dir;
    Image img(6, 4);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<std::uint8_t>(i * 10);
    write_image(dir / "i.png", img);
    EXPECT_EQ(read_image(dir / "i.png"), img);
}

TEST(Png, RejectsNonGray8) {
    EXPECT_EQ(kind_of([] { read_mask(kData / "mask_rgb.png"); }), ErrorKind::UnsupportedPng);
    EXPECT_EQ(kind_of([] { read_mask(kData / "mask_16bit.png"); }), ErrorKind::UnsupportedPng);
    EXPECT_EQ(kind_of([] { read_mask(kData / "probmap_f64.npy"); }), ErrorKind::UnsupportedPng);
    EXPECT_EQ(category_of(ErrorKind::UnsupportedPng), ErrorCategory::Io);
}

TEST(Manifest, JsonRoundTrip) {
    const PromptManifest m = sample_manifest();
    const auto j = manifest_to_json(m);
    EXPECT_EQ(j["schema_version"], 1);
    EXPECT_TRUE(j["composites"][0]["slots"][2].is_null());
    EXPECT_EQ(manifest_from_json(nlohmann::json::parse(j.dump())), m);

    TempDir dir;
    write_manifest(dir / "manifest.json", m);
    EXPECT_EQ(read_manifest(dir / "manifest.json"), m);
}

TEST(Manifest, Rejections) {
    auto j = nlohmann::json::parse(manifest_to_json(sample_manifest()).dump());
    auto bad_version = j;
    bad_version["schema_version"] = 2;
    EXPECT_EQ(kind_of([&] { manifest_from_json(bad_version); }), ErrorKind::SchemaVersionMismatch);

    auto missing = j;
    missing["composites"][0].erase("slots");
    EXPECT_EQ(kind_of([&] { manifest_from_json(missing); }), ErrorKind::MalformedJson);

    auto crossing = j;
    crossing["composites"][0]["boxes"][0][0] = {1, 1, 9, 4};
    EXPECT_EQ(kind_of([&] { manifest_from_json(crossing); }), ErrorKind::ContainmentViolation);

    auto blank_box = j;
    blank_box["composites"][0]["boxes"][3] = {{8, 8, 9, 9}};
    EXPECT_EQ(kind_of([&] { manifest_from_json(blank_box); }), ErrorKind::ContainmentViolation);

    auto duplicate = j;
    duplicate["composites"].push_back(duplicate["composites"][0]);
    EXPECT_EQ(kind_of([&] { manifest_from_json(duplicate); }), ErrorKind::MalformedJson);

    TempDir dir;
    write_text_file(dir / "broken.json", "{ not json");
    EXPECT_EQ(kind_of([&] { read_manifest(dir / "broken.json"); }), ErrorKind::MalformedJson);
}

TEST(Manifest, PlanRoundTrip) {
    SyntheticDatasetSpec spec;
    spec.domains = {"A", "B"};
    spec.cases_per_domain = 6;
    spec.size = 32;
    spec.noise.speckle_count = 0;
    const Dataset ds = make_synthetic_dataset(spec);
    PipelineConfig cfg;
    cfg.tile_size = 32;
    cfg.source_domain = "A";
    const PipelinePlan plan = plan_composites(ds, cfg);
    const PipelinePlan back = plan_from_manifest(manifest_from_plan(plan));
    ASSERT_EQ(back.composites.size(), plan.composites.size());
    for (std::size_t i = 0; i < plan.composites.size(); ++i) {
        EXPECT_EQ(back.composites[i].target_domain, plan.composites[i].target_domain);
        EXPECT_EQ(back.composites[i].batch.slots, plan.composites[i].batch.slots);
        EXPECT_EQ(back.composites[i].batch.boxes, plan.composites[i].batch.boxes);
        EXPECT_EQ(back.composites[i].batch.id, plan.composites[i].batch.id);
    }
}

TEST(Predictions, DirectorySegmenterReadsWhatWasWritten) {
    TempDir dir;
    const CompositeBatch batch = [] {
        CompositeBatch b = merge_tiles({{"x", Image(2, 2), {{0, 0, 1, 1}, {0, 0, 0, 0}}}, {"y", Image(2, 2), {{0, 0, 1, 1}}}});
        b.id = "C-0000";
        return b;
    }();
    std::vector<ProbabilityMap> maps = {ProbabilityMap(4, 4, 0.1f), ProbabilityMap(4, 4, 0.2f), ProbabilityMap(4, 4, 0.3f)};
    write_predictions(dir.path(), batch, maps);
    EXPECT_TRUE(fs::exists(dir / "C-0000/0/1.npy"));
    EXPECT_TRUE(fs::exists(dir / "C-0000/1/0.npy"));
    PredictionDirSegmenter seg(dir.path());
    EXPECT_EQ(seg.predict(batch), maps);

    fs::remove(dir / "C-0000/1/0.npy");
    EXPECT_EQ(kind_of([&] { seg.predict(batch); }), ErrorKind::SegmenterContractViolation);
    CompositeBatch other = batch;
    other.id = "C-0001";
    EXPECT_EQ(kind_of([&] { seg.predict(other); }), ErrorKind::MissingPredictions);
}

TEST(Predictions, OutOfRangeFileIsContractViolation) {
    TempDir dir;
    CompositeBatch batch = merge_tiles({{"x", Image(1, 1), {{0, 0, 0, 0}}}});
    batch.id = "K";
    fs::create_directories(dir / "K/0");
    fs::copy_file(kData / "probmap_out_of_range.npy", dir / "K/0/0.npy");
    PredictionDirSegmenter seg(dir.path());
    EXPECT_EQ(kind_of([&] { seg.predict(batch); }), ErrorKind::SegmenterContractViolation);
}

TEST(Reports, JsonRoundTrip) {
    const DiceReport r = aggregate({{"B/1", "A", "B", 0.25}, {"C/1", "A", "C", 1.0 / 3.0}});
    EXPECT_EQ(report_from_json(nlohmann::json::parse(report_to_json(r).dump())), r);
    TempDir dir;
    write_report(dir / "r.json", r, ReportFormat::Structured);
    EXPECT_EQ(read_report(dir / "r.json"), r);
    write_report(dir / "r.txt", r, ReportFormat::Text);
    const auto text = read_file_bytes(dir / "r.txt");
    EXPECT_NE(std::string(text.begin(), text.end()).find("AVG"), std::string::npos);
}

TEST(Reports, SweepRoundTrip) {
    SweepTable t{{"A", "B"}, {{0.5, {0.1, 0.2}, 0.15}, {0.9, {0.3, 0.4}, 0.35}}};
    EXPECT_EQ(sweep_from_json(nlohmann::json::parse(sweep_to_json(t).dump())), t);
}

TEST(Config, JsonOverlaysBase) {
    PipelineConfig base;
    base.source_domain = "A";
    const PipelineConfig cfg = config_from_json(nlohmann::json::parse(R"({"theta2": 0.9, "box_source": "gt"})"), base);
    EXPECT_EQ(cfg.theta2, 0.9);
    EXPECT_EQ(cfg.box_source, BoxSource::GroundTruth);
    EXPECT_EQ(cfg.source_domain, "A");
    EXPECT_EQ(config_from_json(nlohmann::json::parse(config_to_json(cfg).dump())), cfg);
    EXPECT_EQ(kind_of([] { config_from_json(nlohmann::json::parse(R"({"theta3": 1})")); }), ErrorKind::InvalidArgument);
}

TEST(Dataset, WriteLoadRoundTrip) {
    SyntheticDatasetSpec spec;
    spec.domains = {"A", "B"};
    spec.cases_per_domain = 3;
    spec.size = 32;
    spec.noise.speckle_count = 1;
    spec.noise.speckle_size = 3;
    spec.noise.min_gap = 2;
    const Dataset ds = make_synthetic_dataset(spec);
    TempDir dir;
    write_dataset(dir.path(), ds);
    const Dataset back = load_dataset(dir.path());
    ASSERT_EQ(back.domains.size(), 2u);
    for (const auto& [domain, cases] : ds.domains) {
        ASSERT_EQ(back.domains.at(domain).size(), cases.size());
        for (std::size_t i = 0; i < cases.size(); ++i) {
            EXPECT_EQ(back.domains.at(domain)[i].case_id, cases[i].case_id);
            EXPECT_EQ(back.domains.at(domain)[i].image, cases[i].image);
            EXPECT_EQ(back.domains.at(domain)[i].gt_mask, cases[i].gt_mask);
            EXPECT_EQ(back.domains.at(domain)[i].coarse_map, cases[i].coarse_map);
        }
    }
    EXPECT_EQ(load_dataset(dir.path(), {"B"}).domains.size(), 1u);
}

TEST(Dataset, LoadErrors) {
    TempDir dir;
    EXPECT_EQ(kind_of([&] { load_dataset(dir / "nope"); }), ErrorKind::DatasetMissing);
    EXPECT_EQ(kind_of([&] { load_dataset(dir.path(), {"A"}); }), ErrorKind::DatasetMissing);
    write_image(dir / "A/c_image.png", Image(4, 4));
    write_mask(dir / "A/c_gt.png", BinaryMask(4, 4));
    EXPECT_EQ(kind_of([&] { load_dataset(dir.path()); }), ErrorKind::DatasetIncomplete);
    write_probmap(dir / "A/c_coarse.npy", ProbabilityMap(4, 2));
    EXPECT_EQ(kind_of([&] { load_dataset(dir.path()); }), ErrorKind::DimensionMismatch);
}
