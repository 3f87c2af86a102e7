#include "boxprompt/mask_ops.hpp"

#include <algorithm>
#include <string>

namespace boxprompt {

BoundingBox full_image_box(int width, int height) {
    if (width <= 0 || height <= 0) {
        throw Error(ErrorKind::InvalidArgument, "full-image box needs a non-empty image");
    }
    return {0, 0, width - 1, height - 1};
}

BinaryMask threshold(const ProbabilityMap& map, double theta) {
    if (!(theta >= 0.0 && theta <= 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "theta must lie in [0,1], got " + std::to_string(theta));
    }
    BinaryMask out(map.width(), map.height());
    const auto in = map.values();
    auto bits = out.values();
    for (std::size_t i = 0; i < in.size(); ++i) {
        bits[i] = static_cast<double>(in[i]) >= theta ? 1 : 0;
    }
    return out;
}

ComponentLabeling label_components(const BinaryMask& mask, Connectivity connectivity) {
    const int w = mask.width();
    const int h = mask.height();
    ComponentLabeling result;
    result.width = w;
    result.height = h;
    result.labels.assign(mask.size(), 0);
    result.sizes.push_back(0);

    static constexpr int kDr[8] = {-1, 1, 0, 0, -1, -1, 1, 1};
    static constexpr int kDc[8] = {0, 0, -1, 1, -1, 1, -1, 1};
    const int neighbours = connectivity == Connectivity::Eight ? 8 : 4;

    const auto bits = mask.values();
    auto& labels = result.labels;
    std::vector<std::int32_t> queue;
    queue.reserve(mask.size());

    std::int64_t background = 0;
    std::int32_t next = 0;
    for (std::size_t start = 0; start < bits.size(); ++start) {
        if (bits[start] == 0) {
            ++background;
            continue;
        }
        if (labels[start] != 0) continue;

        const std::int32_t label = ++next;
        std::int64_t count = 0;
        queue.clear();
        queue.push_back(static_cast<std::int32_t>(start));
        labels[start] = label;
        for (std::size_t head = 0; head < queue.size(); ++head) {
            const int p = queue[head];
            ++count;
            const int r = p / w;
            const int c = p % w;
            for (int k = 0; k < neighbours; ++k) {
                const int nr = r + kDr[k];
                const int nc = c + kDc[k];
                if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
                const int q = nr * w + nc;
                if (bits[q] != 0 && labels[q] == 0) {
                    labels[q] = label;
                    queue.push_back(q);
                }
            }
        }
        result.sizes.push_back(count);
    }
    result.sizes[0] = background;
    return result;
}

std::optional<std::int32_t> largest_label(const ComponentLabeling& labeling) {
    std::optional<std::int32_t> best;
    std::int64_t best_size = 0;
    for (std::size_t i = 1; i < labeling.sizes.size(); ++i) {
        if (labeling.sizes[i] > best_size) {  // strict: earliest label wins ties
            best_size = labeling.sizes[i];
            best = static_cast<std::int32_t>(i);
        }
    }
    return best;
}

namespace {

BinaryMask mask_of_label(const ComponentLabeling& labeling, std::optional<std::int32_t> label) {
    BinaryMask out(labeling.width, labeling.height);
    if (!label) return out;
    auto bits = out.values();
    for (std::size_t i = 0; i < labeling.labels.size(); ++i) {
        bits[i] = labeling.labels[i] == *label ? 1 : 0;
    }
    return out;
}

}  // namespace

BinaryMask largest_component_filter(const BinaryMask& mask, Connectivity connectivity) {
    const auto labeling = label_components(mask, connectivity);
    return mask_of_label(labeling, largest_label(labeling));
}

BinaryMask downscale_mask(const BinaryMask& mask, int factor) {
    if (factor < 1) {
        throw Error(ErrorKind::InvalidArgument, "downscale factor must be >= 1");
    }
    if (mask.width() % factor != 0 || mask.height() % factor != 0) {
        throw Error(ErrorKind::NonDivisibleFactor,
                    "factor " + std::to_string(factor) + " does not divide " +
                        std::to_string(mask.width()) + "x" + std::to_string(mask.height()));
    }
    if (factor == 1) return mask;

    const int out_w = mask.width() / factor;
    const int out_h = mask.height() / factor;
    BinaryMask out(out_w, out_h);
    for (int r = 0; r < mask.height(); ++r) {
        const auto* row = &mask.at(r, 0);
        auto* dst = &out.at(r / factor, 0);
        for (int oc = 0; oc < out_w; ++oc, row += factor) {
            std::uint8_t any = 0;
            for (int k = 0; k < factor; ++k) any |= row[k];
            dst[oc] |= static_cast<std::uint8_t>(any != 0);
        }
    }
    return out;
}

std::optional<BoundingBox> bbox_from_mask(const BinaryMask& mask) {
    if (mask.empty()) return std::nullopt;
    int x_min = mask.width(), y_min = mask.height(), x_max = -1, y_max = -1;
    for (int r = 0; r < mask.height(); ++r) {
        const auto* row = &mask.at(r, 0);
        int first = -1, last = -1;
        for (int c = 0; c < mask.width(); ++c) {
            if (row[c] != 0) {
                if (first < 0) first = c;
                last = c;
            }
        }
        if (first < 0) continue;
        y_min = std::min(y_min, r);
        y_max = r;
        x_min = std::min(x_min, first);
        x_max = std::max(x_max, last);
    }
    if (y_max < 0) return std::nullopt;
    return BoundingBox{x_min, y_min, x_max, y_max};
}

BoundingBox rescale_bbox(const BoundingBox& box, int factor) {
    if (factor < 1) {
        throw Error(ErrorKind::InvalidArgument, "rescale factor must be >= 1");
    }
    return {box.x_min * factor, box.y_min * factor, (box.x_max + 1) * factor - 1,
            (box.y_max + 1) * factor - 1};
}

FilterResult filter_largest_downscaled(const BinaryMask& mask, int factor, Connectivity connectivity) {
    const BinaryMask coarse = downscale_mask(mask, factor);
    const auto labeling = label_components(coarse, connectivity);
    const auto keep = largest_label(labeling);

    FilterResult result{BinaryMask(mask.width(), mask.height()), std::nullopt};
    if (!keep) return result;

    const BinaryMask kept_coarse = mask_of_label(labeling, keep);
    for (int r = 0; r < mask.height(); ++r) {
        const auto* src = &mask.at(r, 0);
        const auto* block = &kept_coarse.at(r / factor, 0);
        auto* dst = &result.kept.at(r, 0);
        for (int oc = 0; oc < kept_coarse.width(); ++oc, src += factor, dst += factor) {
            if (block[oc] == 0) continue;
            for (int k = 0; k < factor; ++k) dst[k] = src[k] != 0 ? 1 : 0;
        }
    }
    result.box = rescale_bbox(*bbox_from_mask(kept_coarse), factor);
    return result;
}

}  // namespace boxprompt
