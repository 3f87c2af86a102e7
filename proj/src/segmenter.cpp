#include "boxprompt/segmenter.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace boxprompt {

std::uint64_t stable_hash(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void check_segmenter_output(const CompositeBatch& batch, const std::vector<ProbabilityMap>& maps) {
    if (maps.size() != batch.box_count()) {
        throw Error(ErrorKind::SegmenterContractViolation,
                    fmt::format("composite '{}': expected {} maps, got {}", batch.id, batch.box_count(), maps.size()));
    }
    const int side = batch.composite_size();
    for (std::size_t i = 0; i < maps.size(); ++i) {
        if (!maps[i].same_shape(side, side)) {
            throw Error(ErrorKind::SegmenterContractViolation,
                        fmt::format("composite '{}': map {} is {}x{}, expected {}x{}", batch.id, i, maps[i].width(),
                                    maps[i].height(), side, side));
        }
        try {
            validate_probabilities(maps[i]);
        } catch (const Error& e) {
            throw Error(ErrorKind::SegmenterContractViolation,
                        fmt::format("composite '{}': map {}: {}", batch.id, i, e.what()));
        }
    }
}

namespace {

const BinaryMask& lookup_gt(const std::map<std::string, BinaryMask>& gt, const TileSlot& slot, int tile_size) {
    const auto it = gt.find(slot.case_id);
    if (it == gt.end()) {
        throw Error(ErrorKind::MissingGroundTruth, "no ground truth for case '" + slot.case_id + "'");
    }
    if (!it->second.same_shape(tile_size, tile_size)) {
        throw Error(ErrorKind::DimensionMismatch, "ground truth of '" + slot.case_id + "' is not tile sized");
    }
    return it->second;
}

/// Calls fill(tile_row, tile_col, composite value ref) for every pixel of the box
/// clipped to its slot quadrant.
template <typename Fill>
ProbabilityMap render_box(const CompositeBatch& batch, int slot_index, const BoundingBox& box, Fill&& fill) {
    const int side = batch.composite_size();
    ProbabilityMap map(side, side, 0.0f);
    const auto region = slot_region(slot_index, batch.tile_size);
    const int r0 = std::max(box.y_min, region.y_min), r1 = std::min(box.y_max, region.y_max);
    const int c0 = std::max(box.x_min, region.x_min), c1 = std::min(box.x_max, region.x_max);
    for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
            map.at(r, c) = fill(r - region.y_min, c - region.x_min);
        }
    }
    return map;
}

}  // namespace

PerfectMockSegmenter::PerfectMockSegmenter(std::map<std::string, BinaryMask> ground_truth)
    : ground_truth_(std::move(ground_truth)) {}

std::vector<ProbabilityMap> PerfectMockSegmenter::predict(const CompositeBatch& batch) {
    std::vector<ProbabilityMap> maps;
    for (int k = 0; k < kSlotsPerComposite; ++k) {
        const auto& slot = batch.slots[k];
        if (slot.blank || batch.boxes[k].empty()) continue;
        const BinaryMask& gt = lookup_gt(ground_truth_, slot, batch.tile_size);
        for (const auto& box : batch.boxes[k]) {
            maps.push_back(render_box(batch, k, box, [&](int r, int c) { return gt.at(r, c) != 0 ? 1.0f : 0.0f; }));
        }
    }
    return maps;
}

NoisyMockSegmenter::NoisyMockSegmenter(std::map<std::string, BinaryMask> ground_truth, NoisySegmenterSpec spec)
    : ground_truth_(std::move(ground_truth)), spec_(spec) {
    if (!(spec.target_low >= 0.0 && spec.target_low <= 1.0 && spec.background_high >= 0.0 &&
          spec.background_high <= 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "noisy segmenter confidence bounds must lie in [0,1]");
    }
}

float NoisyMockSegmenter::confidence(const std::string& case_id, int row, int col, bool on_target) const {
    std::uint64_t h = mix64(spec_.seed ^ stable_hash(case_id));
    h = mix64(h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(row)) << 32 |
                   static_cast<std::uint32_t>(col)));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;  // [0,1)
    const double v = on_target ? spec_.target_low + (1.0 - spec_.target_low) * u : spec_.background_high * u;
    return static_cast<float>(v);
}

std::vector<ProbabilityMap> NoisyMockSegmenter::predict(const CompositeBatch& batch) {
    std::vector<ProbabilityMap> maps;
    for (int k = 0; k < kSlotsPerComposite; ++k) {
        const auto& slot = batch.slots[k];
        if (slot.blank || batch.boxes[k].empty()) continue;
        const BinaryMask& gt = lookup_gt(ground_truth_, slot, batch.tile_size);
        for (const auto& box : batch.boxes[k]) {
            maps.push_back(render_box(batch, k, box, [&](int r, int c) {
                return confidence(slot.case_id, r, c, gt.at(r, c) != 0);
            }));
        }
    }
    return maps;
}

}  // namespace boxprompt
