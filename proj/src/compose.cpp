#include "boxprompt/compose.hpp"

#include <algorithm>

namespace boxprompt {

namespace {

void check_slot_index(int slot_index) {
    if (slot_index < 0 || slot_index >= kSlotsPerComposite) {
        throw Error(ErrorKind::InvalidArgument, "slot index " + std::to_string(slot_index) + " not in 0..3");
    }
}

void check_tile_size(int tile_size) {
    if (tile_size <= 0) {
        throw Error(ErrorKind::InvalidArgument, "tile size must be positive");
    }
}

}  // namespace

SlotOffset slot_offset(int slot_index, int tile_size) {
    check_slot_index(slot_index);
    return {(slot_index / 2) * tile_size, (slot_index % 2) * tile_size};
}

int slot_at(int row, int col, int tile_size) {
    return (row >= tile_size ? 2 : 0) + (col >= tile_size ? 1 : 0);
}

BoundingBox slot_region(int slot_index, int tile_size) {
    const auto off = slot_offset(slot_index, tile_size);
    return {off.col, off.row, off.col + tile_size - 1, off.row + tile_size - 1};
}

std::size_t CompositeBatch::box_count() const noexcept {
    std::size_t n = 0;
    for (const auto& b : boxes) n += b.size();
    return n;
}

BoundingBox translate_to_slot(const BoundingBox& tile_box, int slot_index, int tile_size) {
    const auto off = slot_offset(slot_index, tile_size);
    return {tile_box.x_min + off.col, tile_box.y_min + off.row, tile_box.x_max + off.col,
            tile_box.y_max + off.row};
}

BoundingBox translate_from_slot(const BoundingBox& composite_box, int slot_index, int tile_size) {
    const auto off = slot_offset(slot_index, tile_size);
    return {composite_box.x_min - off.col, composite_box.y_min - off.row, composite_box.x_max - off.col,
            composite_box.y_max - off.row};
}

CompositeBatch merge_tiles(const std::vector<TileInput>& tiles) {
    if (tiles.empty() || tiles.size() > kSlotsPerComposite) {
        throw Error(ErrorKind::InvalidArgument,
                    "a composite takes 1 to 4 tiles, got " + std::to_string(tiles.size()));
    }
    const int size = tiles.front().image.width();
    check_tile_size(size);
    for (const auto& t : tiles) {
        if (!t.image.same_shape(size, size)) {
            throw Error(ErrorKind::MixedTileSizes,
                        "tile '" + t.case_id + "' is " + std::to_string(t.image.width()) + "x" +
                            std::to_string(t.image.height()) + ", expected " + std::to_string(size) +
                            " square");
        }
    }

    CompositeBatch batch;
    batch.tile_size = size;
    batch.image = Image(2 * size, 2 * size);
    for (int k = 0; k < kSlotsPerComposite; ++k) {
        batch.slots[k].index = k;
    }
    for (std::size_t k = 0; k < tiles.size(); ++k) {
        const int slot = static_cast<int>(k);
        const auto& tile = tiles[k];
        batch.slots[k].case_id = tile.case_id;
        batch.slots[k].blank = false;

        const auto off = slot_offset(slot, size);
        for (int r = 0; r < size; ++r) {
            const auto* src = &tile.image.at(r, 0);
            std::copy(src, src + size, &batch.image.at(r + off.row, off.col));
        }
        for (const auto& box : tile.boxes) {
            if (!box.fits_within(size, size)) {
                throw Error(ErrorKind::BoxOutOfBounds, "box outside tile '" + tile.case_id + "'");
            }
            batch.boxes[k].push_back(translate_to_slot(box, slot, size));
        }
    }
    return batch;
}

void validate_composite_layout(const CompositeBatch& batch) {
    check_tile_size(batch.tile_size);
    const int size = batch.tile_size;
    if (!batch.image.empty() && !batch.image.same_shape(2 * size, 2 * size)) {
        throw Error(ErrorKind::ContainmentViolation, "composite image is not 2S x 2S");
    }
    for (int k = 0; k < kSlotsPerComposite; ++k) {
        const auto& slot = batch.slots[k];
        if (slot.index != k) {
            throw Error(ErrorKind::ContainmentViolation, "slot " + std::to_string(k) + " has index " +
                                                             std::to_string(slot.index));
        }
        if (slot.blank && !batch.boxes[k].empty()) {
            throw Error(ErrorKind::ContainmentViolation, "blank slot " + std::to_string(k) + " carries boxes");
        }
        const auto region = slot_region(k, size);
        for (const auto& box : batch.boxes[k]) {
            if (!box.well_formed() || !region.contains(box)) {
                throw Error(ErrorKind::ContainmentViolation,
                            "box in slot " + std::to_string(k) + " leaves its quadrant");
            }
        }
    }
}

BinaryMask remap_mask_to_slot(const BinaryMask& mask, const TileSlot& slot, int tile_size) {
    check_tile_size(tile_size);
    if (!mask.same_shape(tile_size, tile_size)) {
        throw Error(ErrorKind::DimensionMismatch, "mask is not " + std::to_string(tile_size) + " square");
    }
    const auto off = slot_offset(slot.index, tile_size);
    BinaryMask out(2 * tile_size, 2 * tile_size);
    for (int r = 0; r < tile_size; ++r) {
        const auto* src = &mask.at(r, 0);
        std::copy(src, src + tile_size, &out.at(r + off.row, off.col));
    }
    return out;
}

std::vector<SplitTile<float, ProbabilityMapTag>> split_composite(
    const ProbabilityMap& prediction, const std::array<TileSlot, kSlotsPerComposite>& slots, int tile_size) {
    check_tile_size(tile_size);
    return split_grid(prediction, slots, tile_size);
}

std::vector<BoundingBox> unmerge_boxes(const CompositeBatch& batch, int slot_index) {
    check_slot_index(slot_index);
    std::vector<BoundingBox> out;
    for (const auto& box : batch.boxes[slot_index]) {
        out.push_back(translate_from_slot(box, slot_index, batch.tile_size));
    }
    return out;
}

}  // namespace boxprompt
