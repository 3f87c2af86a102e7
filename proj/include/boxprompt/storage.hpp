#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "boxprompt/compose.hpp"
#include "boxprompt/evalkit.hpp"
#include "boxprompt/grid.hpp"
#include "boxprompt/pipeline.hpp"

namespace boxprompt {

namespace fs = std::filesystem;

// --- PNG (single-channel, 8-bit) ------------------------------------------

/// Any nonzero pixel is foreground. Throws UnsupportedPng for anything other than
/// 8-bit grayscale, Io when the file cannot be read.
BinaryMask read_mask(const fs::path& path);
/// Writes {0, 255}.
void write_mask(const fs::path& path, const BinaryMask& mask);

Image read_image(const fs::path& path);
void write_image(const fs::path& path, const Image& image);

// --- NPY v1.0, '<f4', C order, 2-D ------------------------------------------

ProbabilityMap read_probmap(const fs::path& path);
void write_probmap(const fs::path& path, const ProbabilityMap& map);

/// In-memory variants; the byte layout is identical to the files.
ProbabilityMap decode_probmap(const std::vector<char>& bytes);
std::vector<char> encode_probmap(const ProbabilityMap& map);

// --- prompt manifest ---------------------------------------------------------

inline constexpr int kManifestSchemaVersion = 1;

struct ManifestComposite {
    std::string composite_id;
    /// Composite PNG, relative to the manifest's directory.
    std::string image;
    std::string domain;
    /// case_id per slot; nullopt marks a blank slot.
    std::array<std::optional<std::string>, kSlotsPerComposite> slots;
    /// Composite-coordinate boxes per slot.
    std::array<std::vector<BoundingBox>, kSlotsPerComposite> boxes;

    friend bool operator==(const ManifestComposite&, const ManifestComposite&) = default;
};

struct PromptManifest {
    int schema_version = kManifestSchemaVersion;
    int tile_size = kDefaultTileSize;
    std::vector<ManifestComposite> composites;
    std::vector<std::string> skipped_cases;

    friend bool operator==(const PromptManifest&, const PromptManifest&) = default;
};

nlohmann::ordered_json manifest_to_json(const PromptManifest& manifest);
/// Throws SchemaVersionMismatch, MalformedJson or ContainmentViolation.
PromptManifest manifest_from_json(const nlohmann::json& json);

void write_manifest(const fs::path& path, const PromptManifest& manifest);
PromptManifest read_manifest(const fs::path& path);

/// Composite images are referenced as "composites/<id>.png".
PromptManifest manifest_from_plan(const PipelinePlan& plan);
/// Composite images are not loaded; batches carry an empty image.
PipelinePlan plan_from_manifest(const PromptManifest& manifest);

// --- predictions ---------------------------------------------------------------

/// <dir>/<composite_id>/<slot_index>/<box_index>.npy
fs::path prediction_path(const fs::path& dir, const std::string& composite_id, int slot_index, int box_index);

/// Writes one NPY per box of the composite.
void write_predictions(const fs::path& dir, const CompositeBatch& batch, const std::vector<ProbabilityMap>& maps);

/// Serves predictions written by an external segmenter. Throws MissingPredictions
/// when a file is absent.
class PredictionDirSegmenter final : public Segmenter {
public:
    explicit PredictionDirSegmenter(fs::path dir) : dir_(std::move(dir)) {}

    std::vector<ProbabilityMap> predict(const CompositeBatch& batch) override;

private:
    fs::path dir_;
};

// --- reports -------------------------------------------------------------------

enum class ReportFormat { Structured, Text };

nlohmann::ordered_json report_to_json(const DiceReport& report);
DiceReport report_from_json(const nlohmann::json& json);

void write_report(const fs::path& path, const DiceReport& report, ReportFormat format);
DiceReport read_report(const fs::path& path);

nlohmann::ordered_json sweep_to_json(const SweepTable& table);
SweepTable sweep_from_json(const nlohmann::json& json);
void write_sweep(const fs::path& path, const SweepTable& table, ReportFormat format);

// --- config --------------------------------------------------------------------

nlohmann::ordered_json config_to_json(const PipelineConfig& cfg);
/// Fields absent from json keep their value in base.
PipelineConfig config_from_json(const nlohmann::json& json, PipelineConfig base = {});
PipelineConfig read_config(const fs::path& path, PipelineConfig base = {});

// --- dataset -------------------------------------------------------------------

/// <root>/<domain>/<stem>_image.png, <stem>_gt.png, <stem>_coarse.npy.
/// Throws DatasetMissing, DatasetIncomplete or DimensionMismatch at load time.
/// When domains is non-empty only those subdirectories are read.
Dataset load_dataset(const fs::path& root, const std::vector<std::string>& domains = {});
void write_dataset(const fs::path& root, const Dataset& dataset);

/// Reads a whole file; throws Io.
std::vector<char> read_file_bytes(const fs::path& path);
/// Writes a whole file, creating parent directories; throws Io.
void write_file_bytes(const fs::path& path, const char* data, std::size_t size);
void write_text_file(const fs::path& path, const std::string& text);

}  // namespace boxprompt
