#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "boxprompt/compose.hpp"
#include "boxprompt/evalkit.hpp"
#include "boxprompt/mask_ops.hpp"
#include "boxprompt/segmenter.hpp"

namespace boxprompt {

/// Where the prompt box of a case comes from.
enum class BoxSource {
    Filtered,     // largest component of the thresholded coarse map
    CoarseRaw,    // every thresholded coarse pixel, no filtering
    GroundTruth,  // tight box of the ground-truth mask (upper bound)
    FullImage,    // the whole tile
};

enum class EmptyMaskFallback { FullImageBox, SkipCase };

std::string_view to_string(BoxSource source);
std::string_view to_string(EmptyMaskFallback fallback);
BoxSource parse_box_source(std::string_view text);
EmptyMaskFallback parse_empty_mask_fallback(std::string_view text);

struct PipelineConfig {
    double theta1 = 0.75;
    double theta2 = 0.5;
    int downscale_factor = 4;
    Connectivity connectivity = Connectivity::Four;
    int tile_size = kDefaultTileSize;
    BoxSource box_source = BoxSource::Filtered;
    EmptyMaskFallback empty_mask_fallback = EmptyMaskFallback::FullImageBox;
    std::string source_domain;
    /// Empty means every domain except the source.
    std::vector<std::string> target_domains;
    std::string dataset_root;
    int jobs = 1;

    /// Throws InvalidArgument on the first violated constraint.
    void validate() const;

    friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

struct CaseRecord {
    /// "<domain>/<stem>", unique across the dataset.
    std::string case_id;
    std::string domain;
    Image image;
    ProbabilityMap coarse_map;
    BinaryMask gt_mask;

    /// Throws DimensionMismatch unless image, coarse map and mask agree in size.
    void validate() const;
};

struct Dataset {
    /// Domain label -> cases in dataset order.
    std::map<std::string, std::vector<CaseRecord>> domains;

    const CaseRecord* find(const std::string& case_id) const;
    std::map<std::string, BinaryMask> ground_truth() const;
};

std::string make_case_id(const std::string& domain, const std::string& stem);

/// Prompt box for one case according to cfg.box_source. Throws EmptyMask when the
/// thresholded coarse map is empty and the fallback is SkipCase.
BoundingBox refine_boxes(const CaseRecord& record, const PipelineConfig& cfg);

struct PlannedComposite {
    std::string target_domain;
    CompositeBatch batch;
};

struct PipelinePlan {
    int tile_size = kDefaultTileSize;
    std::vector<PlannedComposite> composites;
    std::vector<std::string> skipped_cases;
};

/// Target domains resolved against the dataset, sorted.
std::vector<std::string> resolve_targets(const Dataset& dataset, const PipelineConfig& cfg);

/// Refines a box per case and groups cases four at a time per target domain in
/// dataset order. Composite ids are "<domain>-<nnnn>".
PipelinePlan plan_composites(const Dataset& dataset, const PipelineConfig& cfg);

/// Thresholds each per-box map at theta2, keeps only the box's slot quadrant,
/// and unions maps of the same slot into the tile prediction.
std::vector<std::pair<std::string, BinaryMask>> assemble_tile_predictions(const CompositeBatch& batch,
                                                                         const std::vector<ProbabilityMap>& maps,
                                                                         double theta2);

/// Receives each composite's validated segmenter output. Calls are serialised.
using PredictionSink = std::function<void(const PlannedComposite&, const std::vector<ProbabilityMap>&)>;

/// Segmenter pass plus scoring over an existing plan.
DiceReport execute_plan(const Dataset& dataset, const PipelinePlan& plan, const PipelineConfig& cfg,
                        Segmenter& segmenter, const PredictionSink& sink = {});

/// plan_composites followed by execute_plan.
DiceReport run_pipeline(const Dataset& dataset, const PipelineConfig& cfg, Segmenter& segmenter,
                        const PredictionSink& sink = {});

}  // namespace boxprompt
