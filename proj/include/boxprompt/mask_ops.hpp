#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "boxprompt/grid.hpp"

namespace boxprompt {

enum class Connectivity { Four = 4, Eight = 8 };

/// Inclusive pixel rectangle.
struct BoundingBox {
    int x_min = 0;
    int y_min = 0;
    int x_max = 0;
    int y_max = 0;

    int width() const noexcept { return x_max - x_min + 1; }
    int height() const noexcept { return y_max - y_min + 1; }
    long long area() const noexcept { return static_cast<long long>(width()) * height(); }

    bool well_formed() const noexcept {
        return 0 <= x_min && x_min <= x_max && 0 <= y_min && y_min <= y_max;
    }
    bool fits_within(int image_width, int image_height) const noexcept {
        return well_formed() && x_max < image_width && y_max < image_height;
    }
    bool contains(const BoundingBox& inner) const noexcept {
        return x_min <= inner.x_min && y_min <= inner.y_min && inner.x_max <= x_max &&
               inner.y_max <= y_max;
    }
    bool contains_pixel(int row, int col) const noexcept {
        return x_min <= col && col <= x_max && y_min <= row && row <= y_max;
    }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Whole-image rectangle for a width x height grid.
BoundingBox full_image_box(int width, int height);

struct ComponentLabeling {
    int width = 0;
    int height = 0;
    /// 0 = background, 1..k = components in row-major discovery order.
    std::vector<std::int32_t> labels;
    /// sizes[i] is the pixel count of label i; sizes[0] counts background.
    std::vector<std::int64_t> sizes;

    int component_count() const noexcept { return sizes.empty() ? 0 : static_cast<int>(sizes.size()) - 1; }
    std::int32_t label_at(int row, int col) const {
        return labels[static_cast<std::size_t>(row) * width + col];
    }
};

/// Foreground iff value >= theta.
BinaryMask threshold(const ProbabilityMap& map, double theta);

/// Breadth-first labeling; the first component found in a row-major scan gets label 1.
ComponentLabeling label_components(const BinaryMask& mask, Connectivity connectivity = Connectivity::Four);

/// Label of the component with the most pixels, earliest label on ties; nullopt if none.
std::optional<std::int32_t> largest_label(const ComponentLabeling& labeling);

/// Keeps only the largest connected component.
BinaryMask largest_component_filter(const BinaryMask& mask, Connectivity connectivity = Connectivity::Four);

/// OR-pooling over factor x factor blocks. factor must divide both dimensions.
BinaryMask downscale_mask(const BinaryMask& mask, int factor);

/// Tightest inclusive box around the foreground; nullopt for an empty mask.
std::optional<BoundingBox> bbox_from_mask(const BinaryMask& mask);

/// Maps a box on a downscaled grid back to the covering full-resolution box:
/// (x_min*f, y_min*f, (x_max+1)*f-1, (y_max+1)*f-1).
BoundingBox rescale_bbox(const BoundingBox& box, int factor);

struct FilterResult {
    /// Full-resolution foreground whose downscaled block belongs to the kept component.
    BinaryMask kept;
    /// Rescaled box of the kept downscaled component.
    std::optional<BoundingBox> box;
};

/// Largest-component filtering on a factor-downscaled copy of the mask, with the
/// result mapped back to full resolution.
FilterResult filter_largest_downscaled(const BinaryMask& mask, int factor,
                                       Connectivity connectivity = Connectivity::Four);

}  // namespace boxprompt
