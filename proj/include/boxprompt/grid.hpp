#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "boxprompt/error.hpp"

namespace boxprompt {

/// Row-major 2-D pixel grid. The tag keeps masks, probability maps and
/// images from silently converting into each other.
template <typename T, typename Tag>
class Grid {
public:
    using value_type = T;

    Grid() = default;

    Grid(int width, int height, T fill = T{}) : width_(width), height_(height) {
        if (width < 0 || height < 0) {
            throw Error(ErrorKind::InvalidArgument, "negative grid dimension");
        }
        values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }

    Grid(int width, int height, std::vector<T> values)
        : width_(width), height_(height), values_(std::move(values)) {
        if (width < 0 || height < 0 ||
            values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
            throw Error(ErrorKind::DimensionMismatch,
                        "grid of " + std::to_string(width) + "x" + std::to_string(height) +
                            " cannot hold " + std::to_string(values_.size()) + " values");
        }
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    T& at(int row, int col) { return values_[index(row, col)]; }
    const T& at(int row, int col) const { return values_[index(row, col)]; }

    T& operator[](std::size_t i) { return values_[i]; }
    const T& operator[](std::size_t i) const { return values_[i]; }

    std::span<T> values() noexcept { return values_; }
    std::span<const T> values() const noexcept { return values_; }

    bool same_shape(int width, int height) const noexcept {
        return width_ == width && height_ == height;
    }
    template <typename U, typename OtherTag>
    bool same_shape(const Grid<U, OtherTag>& other) const noexcept {
        return same_shape(other.width(), other.height());
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t index(int row, int col) const noexcept {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(col);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> values_;
};

struct BinaryMaskTag {};
struct ProbabilityMapTag {};
struct ImageTag {};

/// Foreground is 1, background 0.
using BinaryMask = Grid<std::uint8_t, BinaryMaskTag>;
/// Confidences in [0,1].
using ProbabilityMap = Grid<float, ProbabilityMapTag>;
/// 8-bit grayscale intensities.
using Image = Grid<std::uint8_t, ImageTag>;

inline std::size_t count_foreground(const BinaryMask& mask) {
    std::size_t n = 0;
    for (auto v : mask.values()) n += (v != 0);
    return n;
}

/// Throws OutOfRangeValue unless every value is finite and inside [0,1].
void validate_probabilities(const ProbabilityMap& map);

}  // namespace boxprompt
