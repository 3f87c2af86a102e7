#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "boxprompt/grid.hpp"
#include "boxprompt/pipeline.hpp"

namespace boxprompt {

struct ConfidenceLevels {
    float target = 0.95f;      // ground-truth pixels
    float speckle = 0.85f;     // noise blobs, meant to pass theta1
    float background = 0.10f;  // everything else, meant to fail theta1
};

struct NoiseSpec {
    int speckle_count = 0;
    /// Pixels per speckle; must be smaller than the largest ground-truth component.
    int speckle_size = 2;
    ConfidenceLevels levels;
    std::uint64_t seed = 0;
    /// Minimum Chebyshev gap between a speckle and the target or another speckle.
    int min_gap = 8;
    /// Keep speckles outside the target's bounding box (plus the gap) as well.
    bool avoid_target_box = false;
};

/// Coarse probability map emulating a noisy backbone: the target at levels.target,
/// speckle_count compact blobs at levels.speckle, background at levels.background.
/// Deterministic for a given seed. Throws SpeckleTooLarge or SpecklePlacementFailed.
ProbabilityMap noisy_coarse_generator(const BinaryMask& gt, const NoiseSpec& spec);

/// Filled ellipse.
BinaryMask ellipse_mask(int size, double center_row, double center_col, double radius_rows, double radius_cols);

struct SyntheticDatasetSpec {
    std::vector<std::string> domains{"A", "B", "C", "D", "E", "F"};
    int cases_per_domain = 16;
    int size = kDefaultTileSize;
    std::uint64_t seed = 1;
    /// seed is replaced per case; the rest applies to every case.
    NoiseSpec noise{.speckle_count = 3, .speckle_size = 12, .levels = {}};
};

/// Ellipse targets with per-domain intensity shifts and speckled coarse maps.
Dataset make_synthetic_dataset(const SyntheticDatasetSpec& spec);

}  // namespace boxprompt
