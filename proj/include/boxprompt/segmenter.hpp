#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "boxprompt/compose.hpp"
#include "boxprompt/grid.hpp"

namespace boxprompt {

/// Box-prompted segmenter boundary.
///
/// predict() receives a composite and returns one probability map of composite
/// size per box. Boxes are consumed slot by slot in slot order, then in list order
/// within a slot. Implementations that cannot be called from several threads at
/// once report reentrant() == false and the pipeline serialises their calls.
class Segmenter {
public:
    virtual ~Segmenter() = default;

    virtual std::vector<ProbabilityMap> predict(const CompositeBatch& batch) = 0;
    virtual bool reentrant() const noexcept { return true; }
};

/// Throws SegmenterContractViolation for a wrong map count, wrong dimensions or
/// values outside [0,1].
void check_segmenter_output(const CompositeBatch& batch, const std::vector<ProbabilityMap>& maps);

/// Returns, per box, 1.0 on ground-truth pixels inside the box and 0.0 elsewhere.
class PerfectMockSegmenter final : public Segmenter {
public:
    explicit PerfectMockSegmenter(std::map<std::string, BinaryMask> ground_truth);

    std::vector<ProbabilityMap> predict(const CompositeBatch& batch) override;

private:
    std::map<std::string, BinaryMask> ground_truth_;
};

struct NoisySegmenterSpec {
    std::uint64_t seed = 0;
    /// Ground-truth pixels draw from [target_low, 1].
    double target_low = 0.4;
    /// Background pixels inside the box draw from [0, background_high].
    double background_high = 0.6;
};

/// Deterministic per-pixel noise inside each box; zero outside it. A pixel's
/// confidence depends only on (seed, case, tile row, tile col), never on the box.
class NoisyMockSegmenter final : public Segmenter {
public:
    NoisyMockSegmenter(std::map<std::string, BinaryMask> ground_truth, NoisySegmenterSpec spec);

    std::vector<ProbabilityMap> predict(const CompositeBatch& batch) override;

    /// Confidence for a tile pixel, in tile coordinates.
    float confidence(const std::string& case_id, int row, int col, bool on_target) const;

    const NoisySegmenterSpec& spec() const noexcept { return spec_; }

private:
    std::map<std::string, BinaryMask> ground_truth_;
    NoisySegmenterSpec spec_;
};

/// 64-bit FNV-1a, stable across platforms.
std::uint64_t stable_hash(std::string_view text);

/// splitmix64 finaliser.
std::uint64_t mix64(std::uint64_t x);

}  // namespace boxprompt
