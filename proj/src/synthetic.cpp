#include "boxprompt/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "boxprompt/mask_ops.hpp"
#include "boxprompt/segmenter.hpp"

namespace boxprompt {

namespace {

/// splitmix64 stream; portable, unlike the std distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_ - 0x9e3779b97f4a7c15ULL);
    }
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
    }
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(next() >> 11) * 0x1.0p-53);
    }

private:
    std::uint64_t state_;
};

/// Square (Chebyshev) dilation by radius via two prefix-sum passes.
BinaryMask dilate(const BinaryMask& mask, int radius) {
    const int w = mask.width(), h = mask.height();
    BinaryMask horiz(w, h), out(w, h);
    std::vector<int> prefix(static_cast<std::size_t>(std::max(w, h)) + 1);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) prefix[c + 1] = prefix[c] + (mask.at(r, c) != 0);
        for (int c = 0; c < w; ++c) {
            const int lo = std::max(0, c - radius), hi = std::min(w - 1, c + radius);
            horiz.at(r, c) = prefix[hi + 1] - prefix[lo] > 0;
        }
    }
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) prefix[r + 1] = prefix[r] + horiz.at(r, c);
        for (int r = 0; r < h; ++r) {
            const int lo = std::max(0, r - radius), hi = std::min(h - 1, r + radius);
            out.at(r, c) = prefix[hi + 1] - prefix[lo] > 0;
        }
    }
    return out;
}

void fill_rect(BinaryMask& mask, int r0, int c0, int r1, int c1) {
    r0 = std::max(r0, 0);
    c0 = std::max(c0, 0);
    r1 = std::min(r1, mask.height() - 1);
    c1 = std::min(c1, mask.width() - 1);
    for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) mask.at(r, c) = 1;
    }
}

}  // namespace

ProbabilityMap noisy_coarse_generator(const BinaryMask& gt, const NoiseSpec& spec) {
    const auto& lv = spec.levels;
    for (float v : {lv.target, lv.speckle, lv.background}) {
        if (!(v >= 0.0f && v <= 1.0f)) {
            throw Error(ErrorKind::InvalidArgument, "confidence levels must lie in [0,1]");
        }
    }
    if (spec.speckle_count < 0 || spec.speckle_size < 1 || spec.min_gap < 1) {
        throw Error(ErrorKind::InvalidArgument, "need speckle_count >= 0, speckle_size >= 1, min_gap >= 1");
    }

    ProbabilityMap map(gt.width(), gt.height(), lv.background);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt[i] != 0) map[i] = lv.target;
    }
    if (spec.speckle_count == 0) return map;

    const auto labeling = label_components(gt, Connectivity::Four);
    const auto largest = largest_label(labeling);
    const std::int64_t largest_size = largest ? labeling.sizes[*largest] : 0;
    if (spec.speckle_size >= largest_size) {
        throw Error(ErrorKind::SpeckleTooLarge,
                    fmt::format("speckle of {} px is not smaller than the largest target component ({} px)",
                                spec.speckle_size, largest_size));
    }

    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(spec.speckle_size))));
    const int rows = (spec.speckle_size + cols - 1) / cols;
    if (rows > gt.height() || cols > gt.width()) {
        throw Error(ErrorKind::SpecklePlacementFailed, "speckle does not fit in the image");
    }

    BinaryMask blocked(gt.width(), gt.height());
    if (spec.avoid_target_box) {
        if (auto box = bbox_from_mask(gt)) {
            fill_rect(blocked, box->y_min - spec.min_gap, box->x_min - spec.min_gap, box->y_max + spec.min_gap,
                      box->x_max + spec.min_gap);
        }
    } else {
        blocked = dilate(gt, spec.min_gap);
    }

    Rng rng(spec.seed);
    const int max_attempts = 1000 * spec.speckle_count;
    int placed = 0;
    for (int attempt = 0; attempt < max_attempts && placed < spec.speckle_count; ++attempt) {
        const int r0 = rng.uniform_int(0, gt.height() - rows);
        const int c0 = rng.uniform_int(0, gt.width() - cols);
        bool free = true;
        for (int i = 0; i < spec.speckle_size && free; ++i) {
            free = blocked.at(r0 + i / cols, c0 + i % cols) == 0;
        }
        if (!free) continue;
        for (int i = 0; i < spec.speckle_size; ++i) {
            map.at(r0 + i / cols, c0 + i % cols) = lv.speckle;
        }
        fill_rect(blocked, r0 - spec.min_gap, c0 - spec.min_gap, r0 + rows - 1 + spec.min_gap,
                  c0 + cols - 1 + spec.min_gap);
        ++placed;
    }
    if (placed < spec.speckle_count) {
        throw Error(ErrorKind::SpecklePlacementFailed,
                    fmt::format("placed {} of {} speckles", placed, spec.speckle_count));
    }
    return map;
}

BinaryMask ellipse_mask(int size, double center_row, double center_col, double radius_rows, double radius_cols) {
    BinaryMask mask(size, size);
    for (int r = 0; r < size; ++r) {
        const double dy = (r - center_row) / radius_rows;
        for (int c = 0; c < size; ++c) {
            const double dx = (c - center_col) / radius_cols;
            mask.at(r, c) = dx * dx + dy * dy <= 1.0 ? 1 : 0;
        }
    }
    return mask;
}

Dataset make_synthetic_dataset(const SyntheticDatasetSpec& spec) {
    if (spec.size <= 0 || spec.cases_per_domain < 0) {
        throw Error(ErrorKind::InvalidArgument, "synthetic dataset needs a positive size");
    }
    Dataset dataset;
    for (std::size_t d = 0; d < spec.domains.size(); ++d) {
        const std::string& domain = spec.domains[d];
        auto& cases = dataset.domains[domain];
        for (int i = 0; i < spec.cases_per_domain; ++i) {
            const std::uint64_t case_seed = mix64(spec.seed ^ mix64((static_cast<std::uint64_t>(d) << 32) | i));
            Rng rng(case_seed);
            const double s = spec.size;
            BinaryMask gt = ellipse_mask(spec.size, rng.uniform(0.3 * s, 0.7 * s), rng.uniform(0.3 * s, 0.7 * s),
                                         rng.uniform(0.06 * s, 0.2 * s), rng.uniform(0.06 * s, 0.2 * s));

            Image image(spec.size, spec.size);
            const int fg = 150 + 12 * static_cast<int>(d);
            const int bg = 40 + 15 * static_cast<int>(d);
            for (std::size_t p = 0; p < image.size(); ++p) {
                const int base = gt[p] != 0 ? fg : bg;
                image[p] = static_cast<std::uint8_t>(std::clamp(base + rng.uniform_int(-20, 20), 0, 255));
            }

            NoiseSpec noise = spec.noise;
            noise.seed = mix64(case_seed);
            CaseRecord record;
            record.case_id = make_case_id(domain, fmt::format("case_{:03d}", i));
            record.domain = domain;
            record.coarse_map = noisy_coarse_generator(gt, noise);
            record.gt_mask = std::move(gt);
            record.image = std::move(image);
            cases.push_back(std::move(record));
        }
    }
    return dataset;
}

}  // namespace boxprompt
