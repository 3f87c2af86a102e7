#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace boxprompt {

enum class ErrorKind {
    // validation
    InvalidArgument,
    NonDivisibleFactor,
    DimensionMismatch,
    MixedTileSizes,
    BoxOutOfBounds,
    EmptyInput,
    EmptyMask,
    MissingGroundTruth,
    SpeckleTooLarge,
    SpecklePlacementFailed,
    // storage
    Io,
    UnsupportedPng,
    BadMagic,
    WrongDtype,
    WrongRank,
    UnsupportedLayout,
    TruncatedPayload,
    OutOfRangeValue,
    SchemaVersionMismatch,
    MalformedJson,
    ContainmentViolation,
    DatasetMissing,
    DatasetIncomplete,
    MissingPredictions,
    // segmenter boundary
    SegmenterContractViolation,
};

std::string_view to_string(ErrorKind kind);

/// Coarse grouping used for process exit codes.
enum class ErrorCategory { Validation, Io, Contract };

ErrorCategory category_of(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

    ErrorKind kind() const noexcept { return kind_; }
    /// Message without the kind prefix.
    const std::string& detail() const noexcept { return detail_; }
    ErrorCategory category() const noexcept { return category_of(kind_); }

private:
    ErrorKind kind_;
    std::string detail_;
};

}  // namespace boxprompt
