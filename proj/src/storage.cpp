#include "boxprompt/storage.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <fmt/format.h>

namespace boxprompt {

using nlohmann::json;
using nlohmann::ordered_json;

// --- files -------------------------------------------------------------------

std::vector<char> read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open " + path.string());
    }
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw Error(ErrorKind::Io, "failed reading " + path.string());
    }
    return bytes;
}

void write_file_bytes(const fs::path& path, const char* data, std::size_t size) {
    std::error_code ec;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw Error(ErrorKind::Io, "cannot create " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    }
    out.write(data, static_cast<std::streamsize>(size));
    if (!out) {
        throw Error(ErrorKind::Io, "failed writing " + path.string());
    }
}

void write_text_file(const fs::path& path, const std::string& text) {
    write_file_bytes(path, text.data(), text.size());
}

namespace {

json parse_json_file(const fs::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw Error(ErrorKind::MalformedJson, path.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& path, const ordered_json& j) { write_text_file(path, j.dump(2) + "\n"); }

/// Runs fn, turning nlohmann type/lookup errors into MalformedJson.
template <typename Fn>
auto guarded(const char* what, Fn&& fn) {
    try {
        return fn();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::MalformedJson, fmt::format("{}: {}", what, e.what()));
    }
}

ordered_json box_to_json(const BoundingBox& b) { return ordered_json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

BoundingBox box_from_json(const json& j) {
    if (!j.is_array() || j.size() != 4) {
        throw Error(ErrorKind::MalformedJson, "box must be [x_min, y_min, x_max, y_max]");
    }
    return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(), j.at(3).get<int>()};
}

}  // namespace

// --- manifest ------------------------------------------------------------------

ordered_json manifest_to_json(const PromptManifest& manifest) {
    ordered_json composites = ordered_json::array();
    for (const auto& c : manifest.composites) {
        ordered_json slots = ordered_json::array();
        ordered_json boxes = ordered_json::array();
        for (int k = 0; k < kSlotsPerComposite; ++k) {
            slots.push_back(c.slots[k] ? ordered_json(*c.slots[k]) : ordered_json(nullptr));
            ordered_json slot_boxes = ordered_json::array();
            for (const auto& b : c.boxes[k]) slot_boxes.push_back(box_to_json(b));
            boxes.push_back(std::move(slot_boxes));
        }
        composites.push_back(ordered_json{{"composite_id", c.composite_id},
                                          {"image", c.image},
                                          {"domain", c.domain},
                                          {"slots", std::move(slots)},
                                          {"boxes", std::move(boxes)}});
    }
    return ordered_json{{"schema_version", manifest.schema_version},
                        {"tile_size", manifest.tile_size},
                        {"composites", std::move(composites)},
                        {"skipped_cases", manifest.skipped_cases}};
}

PromptManifest manifest_from_json(const json& j) {
    if (!j.is_object() || !j.contains("schema_version") || !j["schema_version"].is_number_integer()) {
        throw Error(ErrorKind::MalformedJson, "manifest lacks an integer schema_version");
    }
    const int version = j["schema_version"].get<int>();
    if (version != kManifestSchemaVersion) {
        throw Error(ErrorKind::SchemaVersionMismatch,
                    fmt::format("manifest schema {} is not supported, expected {}", version, kManifestSchemaVersion));
    }
    PromptManifest manifest = guarded("manifest", [&] {
        PromptManifest m;
        m.schema_version = version;
        m.tile_size = j.at("tile_size").get<int>();
        for (const auto& jc : j.at("composites")) {
            ManifestComposite c;
            c.composite_id = jc.at("composite_id").get<std::string>();
            c.image = jc.value("image", std::string{});
            c.domain = jc.value("domain", std::string{});
            const auto& slots = jc.at("slots");
            const auto& boxes = jc.at("boxes");
            if (!slots.is_array() || slots.size() != kSlotsPerComposite || !boxes.is_array() ||
                boxes.size() != kSlotsPerComposite) {
                throw Error(ErrorKind::MalformedJson,
                            "composite '" + c.composite_id + "' needs exactly 4 slots and 4 box lists");
            }
            for (int k = 0; k < kSlotsPerComposite; ++k) {
                if (!slots[k].is_null()) c.slots[k] = slots[k].get<std::string>();
                for (const auto& jb : boxes[k]) c.boxes[k].push_back(box_from_json(jb));
            }
            m.composites.push_back(std::move(c));
        }
        if (j.contains("skipped_cases")) {
            m.skipped_cases = j["skipped_cases"].get<std::vector<std::string>>();
        }
        return m;
    });
    if (manifest.tile_size <= 0) {
        throw Error(ErrorKind::MalformedJson, "manifest tile_size must be positive");
    }
    std::set<std::string> ids;
    for (const auto& c : manifest.composites) {
        if (c.composite_id.empty() || !ids.insert(c.composite_id).second) {
            throw Error(ErrorKind::MalformedJson, "composite ids must be unique and non-empty: '" + c.composite_id + "'");
        }
    }
    plan_from_manifest(manifest);  // containment checks
    return manifest;
}

void write_manifest(const fs::path& path, const PromptManifest& manifest) {
    write_json_file(path, manifest_to_json(manifest));
}

PromptManifest read_manifest(const fs::path& path) {
    try {
        return manifest_from_json(parse_json_file(path));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Io) throw;
        throw Error(e.kind(), path.string() + ": " + e.detail());
    }
}

PromptManifest manifest_from_plan(const PipelinePlan& plan) {
    PromptManifest manifest;
    manifest.tile_size = plan.tile_size;
    manifest.skipped_cases = plan.skipped_cases;
    for (const auto& planned : plan.composites) {
        const auto& batch = planned.batch;
        ManifestComposite c;
        c.composite_id = batch.id;
        c.image = "composites/" + batch.id + ".png";
        c.domain = planned.target_domain;
        for (int k = 0; k < kSlotsPerComposite; ++k) {
            if (!batch.slots[k].blank) c.slots[k] = batch.slots[k].case_id;
            c.boxes[k] = batch.boxes[k];
        }
        manifest.composites.push_back(std::move(c));
    }
    return manifest;
}

PipelinePlan plan_from_manifest(const PromptManifest& manifest) {
    PipelinePlan plan;
    plan.tile_size = manifest.tile_size;
    plan.skipped_cases = manifest.skipped_cases;
    for (const auto& c : manifest.composites) {
        PlannedComposite planned;
        planned.target_domain = c.domain;
        auto& batch = planned.batch;
        batch.id = c.composite_id;
        batch.tile_size = manifest.tile_size;
        for (int k = 0; k < kSlotsPerComposite; ++k) {
            batch.slots[k].index = k;
            batch.slots[k].blank = !c.slots[k].has_value();
            batch.slots[k].case_id = c.slots[k].value_or("");
            batch.boxes[k] = c.boxes[k];
        }
        try {
            validate_composite_layout(batch);
        } catch (const Error& e) {
            throw Error(ErrorKind::ContainmentViolation, "composite '" + c.composite_id + "': " + e.detail());
        }
        plan.composites.push_back(std::move(planned));
    }
    return plan;
}

// --- predictions ---------------------------------------------------------------

fs::path prediction_path(const fs::path& dir, const std::string& composite_id, int slot_index, int box_index) {
    return dir / composite_id / std::to_string(slot_index) / (std::to_string(box_index) + ".npy");
}

void write_predictions(const fs::path& dir, const CompositeBatch& batch, const std::vector<ProbabilityMap>& maps) {
    if (maps.size() != batch.box_count()) {
        throw Error(ErrorKind::SegmenterContractViolation, "prediction count does not match box count");
    }
    std::size_t next = 0;
    for (int k = 0; k < kSlotsPerComposite; ++k) {
        for (std::size_t b = 0; b < batch.boxes[k].size(); ++b) {
            write_probmap(prediction_path(dir, batch.id, k, static_cast<int>(b)), maps[next++]);
        }
    }
}

std::vector<ProbabilityMap> PredictionDirSegmenter::predict(const CompositeBatch& batch) {
    const fs::path root = dir_ / batch.id;
    if (!fs::is_directory(root)) {
        throw Error(ErrorKind::MissingPredictions, "no prediction directory " + root.string());
    }
    std::size_t on_disk = 0;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file() && entry.path().extension() == ".npy") ++on_disk;
    }
    if (on_disk != batch.box_count()) {
        throw Error(ErrorKind::SegmenterContractViolation,
                    fmt::format("composite '{}': {} prediction files for {} boxes", batch.id, on_disk, batch.box_count()));
    }
    std::vector<ProbabilityMap> maps;
    for (int k = 0; k < kSlotsPerComposite; ++k) {
        for (std::size_t b = 0; b < batch.boxes[k].size(); ++b) {
            const auto path = prediction_path(dir_, batch.id, k, static_cast<int>(b));
            if (!fs::exists(path)) {
                throw Error(ErrorKind::MissingPredictions, "missing " + path.string());
            }
            try {
                maps.push_back(read_probmap(path));
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::OutOfRangeValue) {
                    throw Error(ErrorKind::SegmenterContractViolation, e.detail());
                }
                throw;
            }
        }
    }
    return maps;
}

// --- reports -------------------------------------------------------------------

ordered_json report_to_json(const DiceReport& report) {
    ordered_json scores = ordered_json::array();
    for (const auto& s : report.scores) {
        scores.push_back(ordered_json{{"case_id", s.case_id},
                                      {"source_domain", s.source_domain},
                                      {"target_domain", s.target_domain},
                                      {"dice", s.dice}});
    }
    ordered_json per_domain = ordered_json::object();
    for (const auto& [domain, mean] : report.per_domain_mean) per_domain[domain] = mean;
    return ordered_json{{"source_domain", report.source_domain},
                        {"source_to_rest", report.source_to_rest},
                        {"per_domain_mean", std::move(per_domain)},
                        {"scores", std::move(scores)},
                        {"skipped_cases", report.skipped_cases}};
}

DiceReport report_from_json(const json& j) {
    return guarded("report", [&] {
        DiceReport r;
        r.source_domain = j.at("source_domain").get<std::string>();
        r.source_to_rest = j.at("source_to_rest").get<double>();
        for (const auto& [domain, mean] : j.at("per_domain_mean").items()) {
            r.per_domain_mean[domain] = mean.get<double>();
        }
        for (const auto& js : j.at("scores")) {
            r.scores.push_back({js.at("case_id").get<std::string>(), js.at("source_domain").get<std::string>(),
                                js.at("target_domain").get<std::string>(), js.at("dice").get<double>()});
        }
        r.skipped_cases = j.value("skipped_cases", std::vector<std::string>{});
        return r;
    });
}

void write_report(const fs::path& path, const DiceReport& report, ReportFormat format) {
    if (format == ReportFormat::Structured) {
        write_json_file(path, report_to_json(report));
        return;
    }
    std::string text = render_report_table(report);
    if (!report.skipped_cases.empty()) {
        text += fmt::format("skipped {} case(s) without a prompt box\n", report.skipped_cases.size());
    }
    write_text_file(path, text);
}

DiceReport read_report(const fs::path& path) { return report_from_json(parse_json_file(path)); }

ordered_json sweep_to_json(const SweepTable& table) {
    ordered_json rows = ordered_json::array();
    for (const auto& row : table.rows) {
        rows.push_back(ordered_json{{"theta2", row.theta2}, {"values", row.values}, {"average", row.average}});
    }
    return ordered_json{{"columns", table.columns}, {"rows", std::move(rows)}};
}

SweepTable sweep_from_json(const json& j) {
    return guarded("sweep", [&] {
        SweepTable t;
        t.columns = j.at("columns").get<std::vector<std::string>>();
        for (const auto& jr : j.at("rows")) {
            t.rows.push_back({jr.at("theta2").get<double>(), jr.at("values").get<std::vector<double>>(),
                              jr.at("average").get<double>()});
        }
        return t;
    });
}

void write_sweep(const fs::path& path, const SweepTable& table, ReportFormat format) {
    if (format == ReportFormat::Structured) {
        write_json_file(path, sweep_to_json(table));
    } else {
        write_text_file(path, render_sweep_table(table));
    }
}

// --- config --------------------------------------------------------------------

ordered_json config_to_json(const PipelineConfig& cfg) {
    return ordered_json{{"theta1", cfg.theta1},
                        {"theta2", cfg.theta2},
                        {"downscale_factor", cfg.downscale_factor},
                        {"connectivity", static_cast<int>(cfg.connectivity)},
                        {"tile_size", cfg.tile_size},
                        {"box_source", std::string(to_string(cfg.box_source))},
                        {"empty_mask_fallback", std::string(to_string(cfg.empty_mask_fallback))},
                        {"source_domain", cfg.source_domain},
                        {"target_domains", cfg.target_domains},
                        {"dataset_root", cfg.dataset_root},
                        {"jobs", cfg.jobs}};
}

PipelineConfig config_from_json(const json& j, PipelineConfig cfg) {
    if (!j.is_object()) {
        throw Error(ErrorKind::MalformedJson, "config must be a JSON object");
    }
    guarded("config", [&] {
        for (const auto& [key, value] : j.items()) {
            if (key == "theta1") cfg.theta1 = value.get<double>();
            else if (key == "theta2") cfg.theta2 = value.get<double>();
            else if (key == "downscale_factor") cfg.downscale_factor = value.get<int>();
            else if (key == "connectivity") {
                const int c = value.get<int>();
                if (c != 4 && c != 8) throw Error(ErrorKind::InvalidArgument, "connectivity must be 4 or 8");
                cfg.connectivity = static_cast<Connectivity>(c);
            } else if (key == "tile_size") cfg.tile_size = value.get<int>();
            else if (key == "box_source") cfg.box_source = parse_box_source(value.get<std::string>());
            else if (key == "empty_mask_fallback") {
                cfg.empty_mask_fallback = parse_empty_mask_fallback(value.get<std::string>());
            } else if (key == "source_domain") cfg.source_domain = value.get<std::string>();
            else if (key == "target_domains") cfg.target_domains = value.get<std::vector<std::string>>();
            else if (key == "dataset_root") cfg.dataset_root = value.get<std::string>();
            else if (key == "jobs") cfg.jobs = value.get<int>();
            else throw Error(ErrorKind::InvalidArgument, "unknown config key '" + key + "'");
        }
        return 0;
    });
    return cfg;
}

PipelineConfig read_config(const fs::path& path, PipelineConfig base) {
    return config_from_json(parse_json_file(path), std::move(base));
}

// --- dataset -------------------------------------------------------------------

namespace {

constexpr std::string_view kImageSuffix = "_image.png";
constexpr std::string_view kGtSuffix = "_gt.png";
constexpr std::string_view kCoarseSuffix = "_coarse.npy";

std::string stem_of(const CaseRecord& record) {
    const auto slash = record.case_id.rfind('/');
    return slash == std::string::npos ? record.case_id : record.case_id.substr(slash + 1);
}

}  // namespace

Dataset load_dataset(const fs::path& root, const std::vector<std::string>& domains) {
    if (!fs::is_directory(root)) {
        throw Error(ErrorKind::DatasetMissing, "dataset root " + root.string() + " is not a directory");
    }
    std::vector<std::string> names = domains;
    if (names.empty()) {
        for (const auto& entry : fs::directory_iterator(root)) {
            if (entry.is_directory()) names.push_back(entry.path().filename().string());
        }
    }
    std::sort(names.begin(), names.end());

    Dataset dataset;
    for (const auto& domain : names) {
        const fs::path dir = root / domain;
        if (!fs::is_directory(dir)) {
            throw Error(ErrorKind::DatasetMissing, "domain directory " + dir.string() + " is missing");
        }
        // stem -> bitmask of present files
        std::map<std::string, int> present;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            const std::string name = entry.path().filename().string();
            int bit = 0;
            std::string_view suffix;
            for (auto [s, b] : {std::pair{kImageSuffix, 1}, std::pair{kGtSuffix, 2}, std::pair{kCoarseSuffix, 4}}) {
                if (name.size() > s.size() && name.ends_with(s)) {
                    suffix = s;
                    bit = b;
                }
            }
            if (bit == 0) continue;
            present[name.substr(0, name.size() - suffix.size())] |= bit;
        }
        auto& cases = dataset.domains[domain];
        for (const auto& [stem, bits] : present) {
            if (bits != 7) {
                throw Error(ErrorKind::DatasetIncomplete,
                            fmt::format("{}/{}: needs {}, {} and {}", domain, stem, kImageSuffix, kGtSuffix,
                                        kCoarseSuffix));
            }
            CaseRecord record;
            record.case_id = make_case_id(domain, stem);
            record.domain = domain;
            record.image = read_image(dir / (stem + std::string(kImageSuffix)));
            record.gt_mask = read_mask(dir / (stem + std::string(kGtSuffix)));
            record.coarse_map = read_probmap(dir / (stem + std::string(kCoarseSuffix)));
            record.validate();
            cases.push_back(std::move(record));
        }
    }
    return dataset;
}

void write_dataset(const fs::path& root, const Dataset& dataset) {
    for (const auto& [domain, cases] : dataset.domains) {
        const fs::path dir = root / domain;
        fs::create_directories(dir);
        for (const auto& record : cases) {
            const std::string stem = stem_of(record);
            write_image(dir / (stem + std::string(kImageSuffix)), record.image);
            write_mask(dir / (stem + std::string(kGtSuffix)), record.gt_mask);
            write_probmap(dir / (stem + std::string(kCoarseSuffix)), record.coarse_map);
        }
    }
}

}  // namespace boxprompt
