#include "boxprompt/error.hpp"

#include <cmath>

#include "boxprompt/grid.hpp"

namespace boxprompt {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::NonDivisibleFactor: return "NonDivisibleFactor";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::MixedTileSizes: return "MixedTileSizes";
        case ErrorKind::BoxOutOfBounds: return "BoxOutOfBounds";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::EmptyMask: return "EmptyMask";
        case ErrorKind::MissingGroundTruth: return "MissingGroundTruth";
        case ErrorKind::SpeckleTooLarge: return "SpeckleTooLarge";
        case ErrorKind::SpecklePlacementFailed: return "SpecklePlacementFailed";
        case ErrorKind::Io: return "Io";
        case ErrorKind::UnsupportedPng: return "UnsupportedPng";
        case ErrorKind::BadMagic: return "BadMagic";
        case ErrorKind::WrongDtype: return "WrongDtype";
        case ErrorKind::WrongRank: return "WrongRank";
        case ErrorKind::UnsupportedLayout: return "UnsupportedLayout";
        case ErrorKind::TruncatedPayload: return "TruncatedPayload";
        case ErrorKind::OutOfRangeValue: return "OutOfRangeValue";
        case ErrorKind::SchemaVersionMismatch: return "SchemaVersionMismatch";
        case ErrorKind::MalformedJson: return "MalformedJson";
        case ErrorKind::ContainmentViolation: return "ContainmentViolation";
        case ErrorKind::DatasetMissing: return "DatasetMissing";
        case ErrorKind::DatasetIncomplete: return "DatasetIncomplete";
        case ErrorKind::MissingPredictions: return "MissingPredictions";
        case ErrorKind::SegmenterContractViolation: return "SegmenterContractViolation";
    }
    return "Unknown";
}

ErrorCategory category_of(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Io:
        case ErrorKind::UnsupportedPng:
        case ErrorKind::BadMagic:
        case ErrorKind::WrongDtype:
        case ErrorKind::WrongRank:
        case ErrorKind::UnsupportedLayout:
        case ErrorKind::TruncatedPayload:
        case ErrorKind::OutOfRangeValue:
        case ErrorKind::SchemaVersionMismatch:
        case ErrorKind::MalformedJson:
        case ErrorKind::ContainmentViolation:
        case ErrorKind::DatasetMissing:
        case ErrorKind::DatasetIncomplete:
        case ErrorKind::MissingPredictions:
            return ErrorCategory::Io;
        case ErrorKind::SegmenterContractViolation:
            return ErrorCategory::Contract;
        default:
            return ErrorCategory::Validation;
    }
}

void validate_probabilities(const ProbabilityMap& map) {
    const auto values = map.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const float v = values[i];
        if (!(v >= 0.0f && v <= 1.0f)) {  // also rejects NaN
            throw Error(ErrorKind::OutOfRangeValue,
                        "probability " + std::to_string(v) + " at flat index " + std::to_string(i) +
                            " is outside [0,1]");
        }
    }
}

}  // namespace boxprompt
