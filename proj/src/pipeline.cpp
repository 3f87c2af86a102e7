#include "boxprompt/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>

namespace boxprompt {

std::string_view to_string(BoxSource source) {
    switch (source) {
        case BoxSource::Filtered: return "filtered";
        case BoxSource::CoarseRaw: return "coarse_raw";
        case BoxSource::GroundTruth: return "gt";
        case BoxSource::FullImage: return "full_image";
    }
    return "filtered";
}

std::string_view to_string(EmptyMaskFallback fallback) {
    return fallback == EmptyMaskFallback::SkipCase ? "skip_case" : "full_image_box";
}

BoxSource parse_box_source(std::string_view text) {
    for (auto s : {BoxSource::Filtered, BoxSource::CoarseRaw, BoxSource::GroundTruth, BoxSource::FullImage}) {
        if (text == to_string(s)) return s;
    }
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("unknown box source '{}' (filtered|coarse_raw|gt|full_image)", text));
}

EmptyMaskFallback parse_empty_mask_fallback(std::string_view text) {
    for (auto f : {EmptyMaskFallback::FullImageBox, EmptyMaskFallback::SkipCase}) {
        if (text == to_string(f)) return f;
    }
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("unknown empty-mask fallback '{}' (full_image_box|skip_case)", text));
}

void PipelineConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidArgument, msg); };
    if (!(theta1 >= 0.0 && theta1 <= 1.0)) fail(fmt::format("theta1={} outside [0,1]", theta1));
    if (!(theta2 >= 0.0 && theta2 <= 1.0)) fail(fmt::format("theta2={} outside [0,1]", theta2));
    if (downscale_factor < 1) fail("downscale_factor must be >= 1");
    if (tile_size <= 0) fail("tile_size must be positive");
    if (tile_size % downscale_factor != 0) {
        fail(fmt::format("downscale_factor {} does not divide tile_size {}", downscale_factor, tile_size));
    }
    if (jobs < 1) fail("jobs must be >= 1");
}

void CaseRecord::validate() const {
    if (!coarse_map.same_shape(image) || !gt_mask.same_shape(image)) {
        throw Error(ErrorKind::DimensionMismatch,
                    fmt::format("case '{}': image {}x{}, coarse map {}x{}, gt {}x{}", case_id, image.width(),
                                image.height(), coarse_map.width(), coarse_map.height(), gt_mask.width(),
                                gt_mask.height()));
    }
}

const CaseRecord* Dataset::find(const std::string& case_id) const {
    for (const auto& [_, cases] : domains) {
        for (const auto& c : cases) {
            if (c.case_id == case_id) return &c;
        }
    }
    return nullptr;
}

std::map<std::string, BinaryMask> Dataset::ground_truth() const {
    std::map<std::string, BinaryMask> out;
    for (const auto& [_, cases] : domains) {
        for (const auto& c : cases) out.emplace(c.case_id, c.gt_mask);
    }
    return out;
}

std::string make_case_id(const std::string& domain, const std::string& stem) { return domain + "/" + stem; }

BoundingBox refine_boxes(const CaseRecord& record, const PipelineConfig& cfg) {
    const int w = record.image.width();
    const int h = record.image.height();
    std::optional<BoundingBox> box;
    switch (cfg.box_source) {
        case BoxSource::FullImage:
            return full_image_box(w, h);
        case BoxSource::GroundTruth:
            box = bbox_from_mask(record.gt_mask);
            break;
        case BoxSource::Filtered: {
            const BinaryMask mask = threshold(record.coarse_map, cfg.theta1);
            box = filter_largest_downscaled(mask, cfg.downscale_factor, cfg.connectivity).box;
            break;
        }
        case BoxSource::CoarseRaw: {
            const BinaryMask mask = threshold(record.coarse_map, cfg.theta1);
            const auto coarse = bbox_from_mask(downscale_mask(mask, cfg.downscale_factor));
            if (coarse) box = rescale_bbox(*coarse, cfg.downscale_factor);
            break;
        }
    }
    if (box) return *box;
    if (cfg.empty_mask_fallback == EmptyMaskFallback::SkipCase) {
        throw Error(ErrorKind::EmptyMask, "case '" + record.case_id + "' has no foreground to prompt from");
    }
    return full_image_box(w, h);
}

std::vector<std::string> resolve_targets(const Dataset& dataset, const PipelineConfig& cfg) {
    std::set<std::string> targets;
    if (cfg.target_domains.empty()) {
        for (const auto& [domain, _] : dataset.domains) {
            if (domain != cfg.source_domain) targets.insert(domain);
        }
    } else {
        for (const auto& d : cfg.target_domains) {
            if (!dataset.domains.contains(d)) {
                throw Error(ErrorKind::InvalidArgument, "target domain '" + d + "' not in dataset");
            }
            targets.insert(d);
        }
    }
    if (targets.empty()) {
        throw Error(ErrorKind::EmptyInput, "no target domains to evaluate");
    }
    return {targets.begin(), targets.end()};
}

PipelinePlan plan_composites(const Dataset& dataset, const PipelineConfig& cfg) {
    cfg.validate();
    PipelinePlan plan;
    plan.tile_size = cfg.tile_size;
    for (const auto& domain : resolve_targets(dataset, cfg)) {
        std::vector<TileInput> pending;
        int index = 0;
        auto flush = [&] {
            if (pending.empty()) return;
            PlannedComposite planned{domain, merge_tiles(pending)};
            planned.batch.id = fmt::format("{}-{:04d}", domain, index++);
            plan.composites.push_back(std::move(planned));
            pending.clear();
        };
        for (const auto& record : dataset.domains.at(domain)) {
            record.validate();
            if (!record.image.same_shape(cfg.tile_size, cfg.tile_size)) {
                throw Error(ErrorKind::DimensionMismatch,
                            fmt::format("case '{}' is {}x{}, tile size is {}", record.case_id, record.image.width(),
                                        record.image.height(), cfg.tile_size));
            }
            BoundingBox box;
            try {
                box = refine_boxes(record, cfg);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::EmptyMask) throw;
                plan.skipped_cases.push_back(record.case_id);
                continue;
            }
            pending.push_back({record.case_id, record.image, {box}});
            if (pending.size() == kSlotsPerComposite) flush();
        }
        flush();
    }
    return plan;
}

std::vector<std::pair<std::string, BinaryMask>> assemble_tile_predictions(const CompositeBatch& batch,
                                                                         const std::vector<ProbabilityMap>& maps,
                                                                         double theta2) {
    const int size = batch.tile_size;
    std::vector<std::pair<std::string, BinaryMask>> out;
    std::size_t next_map = 0;
    for (int k = 0; k < kSlotsPerComposite; ++k) {
        const auto& slot = batch.slots[k];
        if (slot.blank) continue;
        BinaryMask tile(size, size);
        for (std::size_t b = 0; b < batch.boxes[k].size(); ++b) {
            const ProbabilityMap quadrant = crop_slot(maps.at(next_map++), k, size);
            const BinaryMask bits = threshold(quadrant, theta2);
            for (std::size_t i = 0; i < tile.size(); ++i) tile[i] |= bits[i];
        }
        out.emplace_back(slot.case_id, std::move(tile));
    }
    return out;
}

DiceReport execute_plan(const Dataset& dataset, const PipelinePlan& plan, const PipelineConfig& cfg,
                        Segmenter& segmenter, const PredictionSink& sink) {
    cfg.validate();
    if (cfg.source_domain.empty()) {
        throw Error(ErrorKind::InvalidArgument, "source_domain is required");
    }
    const std::size_t n = plan.composites.size();
    std::vector<std::vector<CaseScore>> scores(n);

    std::mutex segmenter_mutex;
    std::mutex sink_mutex;
    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};

    auto work = [&] {
        for (std::size_t i = next++; i < n && !failed; i = next++) {
            try {
                const auto& planned = plan.composites[i];
                std::vector<ProbabilityMap> maps;
                if (segmenter.reentrant()) {
                    maps = segmenter.predict(planned.batch);
                } else {
                    std::lock_guard lock(segmenter_mutex);
                    maps = segmenter.predict(planned.batch);
                }
                check_segmenter_output(planned.batch, maps);
                if (sink) {
                    std::lock_guard lock(sink_mutex);
                    sink(planned, maps);
                }
                for (auto& [case_id, pred] : assemble_tile_predictions(planned.batch, maps, cfg.theta2)) {
                    const CaseRecord* record = dataset.find(case_id);
                    if (record == nullptr) {
                        throw Error(ErrorKind::MissingGroundTruth, "case '" + case_id + "' not in dataset");
                    }
                    scores[i].push_back({case_id, cfg.source_domain, planned.target_domain, dice(pred, record->gt_mask)});
                }
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed = true;
            }
        }
    };

    const int workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), std::max<std::size_t>(n, 1)));
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    }
    if (first_error) std::rethrow_exception(first_error);

    std::vector<CaseScore> flat;
    for (auto& s : scores) flat.insert(flat.end(), s.begin(), s.end());
    DiceReport report = aggregate(std::move(flat));
    report.skipped_cases = plan.skipped_cases;
    std::sort(report.skipped_cases.begin(), report.skipped_cases.end());
    return report;
}

DiceReport run_pipeline(const Dataset& dataset, const PipelineConfig& cfg, Segmenter& segmenter,
                        const PredictionSink& sink) {
    return execute_plan(dataset, plan_composites(dataset, cfg), cfg, segmenter, sink);
}

}  // namespace boxprompt
