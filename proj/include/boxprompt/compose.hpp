#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "boxprompt/grid.hpp"
#include "boxprompt/mask_ops.hpp"

namespace boxprompt {

inline constexpr int kSlotsPerComposite = 4;
inline constexpr int kDefaultTileSize = 512;

/// Slots are fixed row-major: 0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right.
struct TileSlot {
    int index = 0;
    std::string case_id;
    bool blank = true;

    friend bool operator==(const TileSlot&, const TileSlot&) = default;
};

struct SlotOffset {
    int row = 0;
    int col = 0;
};

SlotOffset slot_offset(int slot_index, int tile_size);

/// Slot whose quadrant contains composite pixel (row, col).
int slot_at(int row, int col, int tile_size);

/// Quadrant of a slot in composite coordinates.
BoundingBox slot_region(int slot_index, int tile_size);

struct TileInput {
    std::string case_id;
    Image image;
    std::vector<BoundingBox> boxes;  // tile coordinates
};

struct CompositeBatch {
    std::string id;
    int tile_size = kDefaultTileSize;
    std::array<TileSlot, kSlotsPerComposite> slots;
    Image image;  // 2S x 2S
    std::array<std::vector<BoundingBox>, kSlotsPerComposite> boxes;  // composite coordinates

    int composite_size() const noexcept { return 2 * tile_size; }
    std::size_t box_count() const noexcept;

    friend bool operator==(const CompositeBatch&, const CompositeBatch&) = default;
};

BoundingBox translate_to_slot(const BoundingBox& tile_box, int slot_index, int tile_size);
BoundingBox translate_from_slot(const BoundingBox& composite_box, int slot_index, int tile_size);

/// Packs 1-4 square tiles into a 2S x 2S composite; missing slots are zero-filled blanks.
/// Throws MixedTileSizes when tiles differ in size, BoxOutOfBounds for boxes outside a tile.
CompositeBatch merge_tiles(const std::vector<TileInput>& tiles);

/// Throws ContainmentViolation unless the batch's shape, blanks and boxes are consistent.
void validate_composite_layout(const CompositeBatch& batch);

BinaryMask remap_mask_to_slot(const BinaryMask& mask, const TileSlot& slot, int tile_size);

/// Copies one slot's S x S quadrant out of a 2S x 2S grid.
template <typename T, typename Tag>
Grid<T, Tag> crop_slot(const Grid<T, Tag>& composite, int slot_index, int tile_size) {
    if (!composite.same_shape(2 * tile_size, 2 * tile_size)) {
        throw Error(ErrorKind::DimensionMismatch,
                    "composite must be " + std::to_string(2 * tile_size) + " square, got " +
                        std::to_string(composite.width()) + "x" + std::to_string(composite.height()));
    }
    const auto off = slot_offset(slot_index, tile_size);
    Grid<T, Tag> tile(tile_size, tile_size);
    for (int r = 0; r < tile_size; ++r) {
        const T* src = &composite.at(r + off.row, off.col);
        std::copy(src, src + tile_size, &tile.at(r, 0));
    }
    return tile;
}

template <typename T, typename Tag>
struct SplitTile {
    int slot_index = 0;
    std::string case_id;
    Grid<T, Tag> tile;
};

/// Quadrant crops for every non-blank slot, in slot order.
template <typename T, typename Tag>
std::vector<SplitTile<T, Tag>> split_grid(const Grid<T, Tag>& composite,
                                          const std::array<TileSlot, kSlotsPerComposite>& slots,
                                          int tile_size) {
    if (!composite.same_shape(2 * tile_size, 2 * tile_size)) {
        throw Error(ErrorKind::DimensionMismatch, "composite is not " + std::to_string(2 * tile_size) + " square");
    }
    std::vector<SplitTile<T, Tag>> out;
    for (const auto& slot : slots) {
        if (slot.blank) continue;
        out.push_back({slot.index, slot.case_id, crop_slot(composite, slot.index, tile_size)});
    }
    return out;
}

std::vector<SplitTile<float, ProbabilityMapTag>> split_composite(
    const ProbabilityMap& prediction, const std::array<TileSlot, kSlotsPerComposite>& slots, int tile_size);

/// Boxes of a non-blank slot, back in tile coordinates.
std::vector<BoundingBox> unmerge_boxes(const CompositeBatch& batch, int slot_index);

}  // namespace boxprompt
